/*
 * Copyright 2026 The coplank Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "coplank/plank_sim.hpp"

#include "coplank/errors.hpp"

#include <algorithm>
#include <cmath>

namespace coplank::sim {

void PhysicsParams::validate() const
{
    if (!(plank_length > 0.0)) throw ConfigError("plank_length must be positive");
    if (!(gravity >= 0.0)) throw ConfigError("gravity must be non-negative");
    if (!(grasp_stiffness >= 0.0 && grasp_damping >= 0.0)) throw ConfigError("grasp gains must be non-negative");
    if (!(end_admittance > 0.0)) throw ConfigError("end_admittance must be positive");
    if (!(hand_admittance > 0.0)) throw ConfigError("hand_admittance must be positive");
    if (!(rolling_damping >= 0.0)) throw ConfigError("rolling_damping must be non-negative");
    if (!(actuator_lag >= 0.0)) throw ConfigError("actuator_lag must be non-negative");
    if (!(theta_limit > 0.0 && theta_limit < 1.5)) throw ConfigError("theta_limit must lie in (0, 1.5)");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(control_period >= dt)) throw ConfigError("control_period must be at least dt");
    if (!(tau_scale > 0.0)) throw ConfigError("tau_scale must be positive");
}

int PhysicsParams::substeps() const
{
    return std::max(1, static_cast<int>(std::lround(control_period / dt)));
}

double SimWorld::theta() const
{
    return std::asin(std::clamp((z_h - z) / params.plank_length, -1.0, 1.0));
}

double SimWorld::x_h() const
{
    const double rel = z_h - z;
    const double l = params.plank_length;
    return x + std::sqrt(std::max(0.0, l * l - rel * rel));
}

double SimWorld::tau() const
{
    return params.tau_scale * (std::abs(fx) + std::abs(fz) + std::abs(torque));
}

SimWorld SimWorld::at_rest(const PhysicsParams& params, double d, double theta)
{
    params.validate();
    SimWorld w;
    w.params = params;
    w.d = std::clamp(d, 0.0, 1.0);
    w.z_h = params.plank_length * std::sin(theta);
    w.hand = w.far_end();
    return w;
}

double ball_acceleration(double theta, double along_plank_accel, double ball_speed,
                         const PhysicsParams& params)
{
    return -kRollingFactor * (params.gravity * std::sin(theta) + along_plank_accel) -
           params.rolling_damping * ball_speed;
}

SimWorld step(const SimWorld& w, const Action& robot, const Vec2& human_v, double dt)
{
    if (!(dt > 0.0)) throw ContractViolation("sim::step: dt must be positive");
    const PhysicsParams& p = w.params;
    const double l = p.plank_length;
    SimWorld n = w;

    // Robot end: first-order velocity tracking, then position.
    const double blend = p.actuator_lag > 0.0 ? std::min(1.0, dt / p.actuator_lag) : 1.0;
    n.vx = w.vx + (robot.x_dot - w.vx) * blend;
    n.vz = w.vz + (robot.z_dot - w.vz) * blend;
    const double ax = (n.vx - w.vx) / dt;
    const double az = (n.vz - w.vz) / dt;
    n.x = w.x + n.vx * dt;
    n.z = w.z + n.vz * dt;

    // Far end height: robot motion, commanded pitch rate and the grasp force
    // through the end admittance, damper term taken implicitly.
    const double k = p.grasp_stiffness;
    const double c = p.grasp_damping;
    const double b = p.end_admittance;
    const double driven = n.vz + l * std::cos(w.theta()) * robot.theta_dot +
                          (k * (w.hand.z - w.z_h) + c * human_v.z) / b;
    double end_vz = driven / (1.0 + c / b);
    n.z_h = w.z_h + end_vz * dt;
    const double lim = l * std::sin(p.theta_limit);
    if (std::abs(n.z_h - n.z) > lim) {
        n.z_h = n.z + std::copysign(lim, n.z_h - n.z);
        end_vz = (n.z_h - w.z_h) / dt;
    }
    n.end_vz = end_vz;
    n.end_vx = (n.x_h() - w.x_h()) / dt;

    // Hand: commanded velocity plus arm compliance yielding to the grasp
    // spring, spring term taken implicitly.
    const double h = p.hand_admittance;
    const double gain = k * dt / h;
    const Vec2 end = n.far_end();
    n.hand.x = (w.hand.x + human_v.x * dt + gain * end.x) / (1.0 + gain);
    n.hand.z = (w.hand.z + human_v.z * dt + gain * end.z) / (1.0 + gain);
    n.hand_v = {(n.hand.x - w.hand.x) / dt, (n.hand.z - w.hand.z) / dt};

    n.fx = k * (n.hand.x - end.x) + c * (n.hand_v.x - n.end_vx);
    n.fz = k * (n.hand.z - end.z) + c * (n.hand_v.z - n.end_vz);
    const double th = n.theta();
    n.torque = l * std::cos(th) * n.fz - l * std::sin(th) * n.fx;

    // Ball, semi-implicit Euler on the updated pitch.
    const double a_par = ax * std::cos(th) + az * std::sin(th);
    const double acc = ball_acceleration(th, a_par, w.d_dot * l, p);
    n.d_dot = w.d_dot + acc / l * dt;
    n.d = w.d + n.d_dot * dt;
    if (n.d < 0.0) {
        n.d = 0.0;
        n.d_dot = 0.0;
    } else if (n.d > 1.0) {
        n.d = 1.0;
        n.d_dot = 0.0;
    }
    n.time = w.time + dt;
    return n;
}

SimWorld advance(const SimWorld& w, const Action& robot, const Vec2& human_v)
{
    SimWorld n = w;
    const int steps = w.params.substeps();
    for (int i = 0; i < steps; ++i) n = step(n, robot, human_v, w.params.dt);
    return n;
}

// ------------------------------------------------------------------- Sensor

Sensor::Sensor(SensorParams params, std::uint64_t seed) : params_(params), rng_(seed)
{
    if (!(params_.rate_hz > 0.0)) throw ConfigError("sensor rate must be positive");
    if (!(params_.d_noise >= 0.0 && params_.d_dot_noise >= 0.0 && params_.tau_noise >= 0.0))
        throw ConfigError("sensor noise levels must be non-negative");
}

State Sensor::observe(const SimWorld& w, double ball_goal)
{
    const auto noise = [&](double std) {
        if (std <= 0.0) return 0.0;
        return std::normal_distribution<double>(0.0, std)(rng_);
    };
    const double period = 1.0 / params_.rate_hz;
    if (w.time >= next_sample_ - 1e-9) {
        d_ = std::clamp(w.d + noise(params_.d_noise), 0.0, 1.0);
        d_dot_ = w.d_dot + noise(params_.d_dot_noise);
        next_sample_ = (std::floor(w.time / period + 1e-9) + 1.0) * period;
    }
    State s;
    s.x = w.x;
    s.z = w.z;
    s.theta = w.theta();
    s.d = d_;
    s.delta_d = d_ - ball_goal;
    s.d_dot = d_dot_;
    s.tau = std::max(0.0, w.tau() + noise(params_.tau_noise));
    return s;
}

// -------------------------------------------------------------------- Human

std::string to_string(HumanKind kind)
{
    switch (kind) {
    case HumanKind::Compliant: return "compliant";
    case HumanKind::Resistive: return "resistive";
    case HumanKind::GoalSeeking: return "goal-seeking";
    case HumanKind::Still: return "still";
    }
    return "unknown";
}

HumanKind human_kind_from_string(const std::string& s)
{
    if (s == "compliant") return HumanKind::Compliant;
    if (s == "resistive") return HumanKind::Resistive;
    if (s == "goal-seeking") return HumanKind::GoalSeeking;
    if (s == "still") return HumanKind::Still;
    throw ConfigError("unknown human profile kind '" + s + "'");
}

void HumanProfile::validate() const
{
    if (!(pose_kp >= 0.0 && resist_gain >= 0.0 && follow_gain >= 0.0 && tilt_kp >= 0.0 &&
          tilt_kd >= 0.0 && tilt_track >= 0.0 && goal_awareness >= 0.0))
        throw ConfigError("human gains must be non-negative");
    if (reaction_delay < 0) throw ConfigError("human reaction_delay must be non-negative");
    if (!(noise_std >= 0.0)) throw ConfigError("human noise_std must be non-negative");
    if (!(max_speed > 0.0)) throw ConfigError("human max_speed must be positive");
}

ScriptedHuman::ScriptedHuman(HumanProfile profile, std::uint64_t seed) : profile_(profile), rng_(seed)
{
    profile_.validate();
}

void ScriptedHuman::reset(const SimWorld& w)
{
    preferred_hand_ = w.hand;
    preferred_end_ = w.far_end();
    history_.clear();
    initialized_ = true;
}

Vec2 ScriptedHuman::command(const SimWorld& w, double ball_goal)
{
    if (!initialized_) reset(w);
    history_.push_back(w);
    while (history_.size() > static_cast<std::size_t>(profile_.reaction_delay) + 1) history_.pop_front();
    const SimWorld& seen = history_.front();
    const HumanProfile& p = profile_;

    if (p.kind == HumanKind::Still) return {};

    // Vertical hand velocity that tilts the plank toward the ball goal.
    const auto goal_vz = [&] {
        const double want = std::clamp(p.tilt_kp * (seen.d - ball_goal) + p.tilt_kd * seen.d_dot,
                                       -p.tilt_max, p.tilt_max);
        const double target_z = seen.z + seen.params.plank_length * std::sin(want);
        return p.tilt_track * (target_z - seen.hand.z);
    };

    Vec2 v;
    const Vec2 end = seen.far_end();
    switch (p.kind) {
    case HumanKind::GoalSeeking:
        v.x = p.pose_kp * (preferred_hand_.x - seen.hand.x);
        v.z = p.goal_awareness * goal_vz();
        break;
    case HumanKind::Resistive: {
        const double want_x = preferred_hand_.x + p.resist_gain * (preferred_end_.x - end.x);
        const double want_z = preferred_hand_.z + p.resist_gain * (preferred_end_.z - end.z);
        v.x = p.pose_kp * (want_x - seen.hand.x);
        v.z = p.pose_kp * (want_z - seen.hand.z) + p.goal_awareness * goal_vz();
        break;
    }
    case HumanKind::Compliant:
        v.x = p.follow_gain * (end.x - seen.hand.x);
        v.z = p.follow_gain * (end.z - seen.hand.z) + p.goal_awareness * goal_vz();
        break;
    case HumanKind::Still: break;
    }

    if (p.noise_std > 0.0) {
        std::normal_distribution<double> n(0.0, p.noise_std);
        v.x += n(rng_);
        v.z += n(rng_);
    }
    v.x = std::clamp(v.x, -p.max_speed, p.max_speed);
    v.z = std::clamp(v.z, -p.max_speed, p.max_speed);
    return v;
}

// ---------------------------------------------------------------------- Env

PlankEnv::PlankEnv(PhysicsParams physics, SensorParams sensor, HumanProfile human, std::uint64_t seed)
    : world_(SimWorld::at_rest(physics, 0.5)),
      sensor_(sensor, seed * 2654435761ULL + 17),
      human_(human, seed * 40503ULL + 101)
{
}

State PlankEnv::reset(const StartConfig& start)
{
    world_ = SimWorld::at_rest(world_.params, start.d, start.theta);
    goal_ = start.goal;
    human_.reset(world_);
    sensor_.reset();
    last_human_ = {};
    last_obs_ = sensor_.observe(world_, goal_);
    return last_obs_;
}

State PlankEnv::step(const Action& a)
{
    return step(a, human_.command(world_, goal_));
}

State PlankEnv::step(const Action& a, const Vec2& human_v)
{
    world_ = advance(world_, a, human_v);
    last_human_ = human_v;
    last_obs_ = sensor_.observe(world_, goal_);
    return last_obs_;
}

} // namespace coplank::sim
