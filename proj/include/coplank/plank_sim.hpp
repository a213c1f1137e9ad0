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

#pragma once

// Planar ball-on-plank world shared by a velocity-controlled robot end and a
// human hand.
//
// Geometry (all in the X-Z plane):
//   robot end      (x, z), integrates the commanded (x_dot, z_dot) through a
//                  first-order actuator lag
//   far end        (x_h, z_h) = (x + L cos theta, z + L sin theta); its height
//                  moves with the robot end, the commanded pitch rate and the
//                  grasp force acting through an admittance
//   human hand     driven by the human velocity command and yielding to the
//                  grasp spring through the arm admittance
//   ball           d in [0, 1] along the plank from the robot end; rolls
//                  without slip: d'' L = -(5/7)(g sin theta + a_par) - b d' L
//
// theta > 0 means the far end is higher, so the ball rolls toward the robot.

#include "coplank/types.hpp"

#include <cstdint>
#include <deque>
#include <random>
#include <string>

namespace coplank::sim {

inline constexpr double kRollingFactor = 5.0 / 7.0;

struct PhysicsParams {
    double plank_length = 1.0;        ///< m
    double gravity = 9.81;            ///< m/s^2
    double grasp_stiffness = 200.0;   ///< N/m
    double grasp_damping = 20.0;      ///< N s/m
    double end_admittance = 100.0;    ///< N s/m resisting far-end motion
    double hand_admittance = 100.0;   ///< N s/m, human arm yielding to the grasp force
    double rolling_damping = 2.0;     ///< 1/s
    double actuator_lag = 0.05;       ///< s
    double theta_limit = 0.5;         ///< rad
    double tau_scale = 0.05;          ///< converts summed |force| + |torque| to tau units
    double dt = 0.05;                 ///< s, physics step
    double control_period = 0.25;     ///< s, observation/control step

    void validate() const;
    int substeps() const;
};

struct Vec2 {
    double x = 0.0;
    double z = 0.0;
};

struct SimWorld {
    PhysicsParams params;

    double x = 0.0;       ///< robot end
    double z = 0.0;
    double vx = 0.0;      ///< realized robot end velocity
    double vz = 0.0;
    double z_h = 0.0;     ///< far end height
    double end_vz = 0.0;  ///< far end vertical velocity over the last step
    double end_vx = 0.0;
    Vec2 hand;            ///< human hand position
    Vec2 hand_v;          ///< human hand velocity over the last step
    double d = 0.5;       ///< ball position, plank-scaled
    double d_dot = 0.0;   ///< ball velocity, plank-scaled
    double fx = 0.0;      ///< grasp force on the far end
    double fz = 0.0;
    double torque = 0.0;  ///< grasp torque about the robot end
    double time = 0.0;

    double theta() const;
    double x_h() const;
    Vec2 far_end() const { return {x_h(), z_h}; }
    /// Summed absolute grasp force/torque magnitude (>= 0).
    double tau() const;

    /// Level plank, robot end at the origin, hand resting on the far end.
    static SimWorld at_rest(const PhysicsParams& params, double d, double theta = 0.0);
};

/// Ball acceleration along the plank in m/s^2 (before dividing by L).
double ball_acceleration(double theta, double along_plank_accel, double ball_speed,
                         const PhysicsParams& params);

/// One physics step of length dt. Commands are held for the whole step.
SimWorld step(const SimWorld& w, const Action& robot, const Vec2& human_v, double dt);

/// params.substeps() physics steps at params.dt.
SimWorld advance(const SimWorld& w, const Action& robot, const Vec2& human_v);

// ---------------------------------------------------------------- observation

struct SensorParams {
    double rate_hz = 4.0;        ///< vision refresh rate
    double d_noise = 0.01;       ///< std, scaled units
    double d_dot_noise = 0.02;   ///< std, scaled units / s
    double tau_noise = 0.0;      ///< std, tau units
};

/// Produces State observations. Vision channels (d, d_dot) refresh at the
/// configured rate and carry Gaussian noise; proprioception is exact.
class Sensor {
public:
    Sensor(SensorParams params, std::uint64_t seed);

    State observe(const SimWorld& w, double ball_goal);
    /// Forces a fresh vision sample on the next observe().
    void reset() { next_sample_ = -1.0; }

private:
    SensorParams params_;
    std::mt19937_64 rng_;
    double next_sample_ = -1.0;
    double d_ = 0.0;
    double d_dot_ = 0.0;
};

// ---------------------------------------------------------------------- human

enum class HumanKind { Compliant, Resistive, GoalSeeking, Still };

std::string to_string(HumanKind kind);
HumanKind human_kind_from_string(const std::string& s);

struct HumanProfile {
    HumanKind kind = HumanKind::GoalSeeking;
    /// Pull of the hand toward its preferred pose (1/s).
    double pose_kp = 2.0;
    /// Resistive: hand offset per unit far-end displacement from the preferred pose.
    double resist_gain = 1.5;
    /// Compliant: rate at which the hand follows the far end (1/s).
    double follow_gain = 4.0;
    /// Weight of the ball-goal tilt law (1 for goal-seeking humans).
    double goal_awareness = 1.0;
    /// Desired pitch = tilt_kp (d - goal) + tilt_kd d_dot, clipped to tilt_max.
    double tilt_kp = 0.1;
    double tilt_kd = 0.1;
    double tilt_max = 0.05;
    double tilt_track = 3.0;   ///< 1/s
    double max_speed = 0.2;    ///< m/s
    double noise_std = 0.0;    ///< m/s
    int reaction_delay = 1;    ///< control steps

    void validate() const;
};

/// Scripted partner. Call reset() with the starting world to fix the
/// preferred pose, then command() once per control step.
class ScriptedHuman {
public:
    ScriptedHuman(HumanProfile profile, std::uint64_t seed);

    void reset(const SimWorld& w);
    Vec2 command(const SimWorld& w, double ball_goal);

    const HumanProfile& profile() const { return profile_; }

private:
    HumanProfile profile_;
    std::mt19937_64 rng_;
    Vec2 preferred_hand_;
    Vec2 preferred_end_;
    std::deque<SimWorld> history_;
    bool initialized_ = false;
};

// --------------------------------------------------------------- environment

struct StartConfig {
    double d = 0.2;
    double goal = 0.8;
    double theta = 0.0;
};

/// World + sensor + optional scripted partner, advanced one control period at a time.
class PlankEnv {
public:
    PlankEnv(PhysicsParams physics, SensorParams sensor, HumanProfile human, std::uint64_t seed);

    State reset(const StartConfig& start);
    /// Advance one control period with the scripted human.
    State step(const Action& a);
    /// Advance one control period with an externally supplied hand velocity.
    State step(const Action& a, const Vec2& human_v);

    const SimWorld& world() const { return world_; }
    double goal() const { return goal_; }
    void set_goal(double goal) { goal_ = goal; }
    const State& last_observation() const { return last_obs_; }
    Vec2 last_human_command() const { return last_human_; }

private:
    SimWorld world_;
    Sensor sensor_;
    ScriptedHuman human_;
    double goal_ = 0.5;
    State last_obs_;
    Vec2 last_human_;
};

} // namespace coplank::sim
