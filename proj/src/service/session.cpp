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

#include "coplank/service/session.hpp"

#include "coplank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace coplank::service {

namespace {

constexpr int kFrameLogVersion = 1;

std::uint64_t tick_seed(std::uint64_t seed, std::int64_t seq)
{
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(seq) + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string exact(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

Session::Session(std::string id, Checkpoint checkpoint, Scenario scenario, SessionOptions options)
    : id_(std::move(id)),
      checkpoint_(std::move(checkpoint)),
      scenario_(std::move(scenario)),
      options_(std::move(options)),
      mode_(options_.mode),
      sensor_(scenario_.sensor, scenario_.seed)
{
    scenario_.validate();
    options_.ucb.validate();
    checkpoint_.bounds.validate();
    if (!(options_.decay_tau > 0.0)) throw ConfigError("decay_tau must be positive");
    for (const Action& a : options_.replay) {
        if (!checkpoint_.bounds.contains_closed(a)) throw ConfigError("replay action outside the action bounds");
    }
    reset();
}

Session Session::open(std::string id, const std::filesystem::path& checkpoint, Scenario scenario,
                      SessionOptions options)
{
    return Session(std::move(id), load_checkpoint(checkpoint), std::move(scenario), std::move(options));
}

void Session::reset()
{
    world_ = sim::SimWorld::at_rest(scenario_.physics, scenario_.start.d, scenario_.start.theta);
    sensor_.reset();
    obs_ = sensor_.observe(world_, scenario_.start.goal);
    command_ = {};
    hand_ = {};
    silence_ = 0.0;
    replay_pos_ = 0;

    double ucb = 0.0;
    try {
        ucb = opt::q_ucb(checkpoint_.q, obs_, Action{}, options_.ucb.delta);
    } catch (const Error&) {
        ucb = std::nan("");
    }
    initial_ = make_frame(obs_, Action{}, ucb, false);
}

StateFrame Session::make_frame(const State& s, const Action& a, double ucb, bool degraded)
{
    StateFrame f;
    f.t = world_.time;
    f.state = s;
    f.action = a;
    f.cost = coplank::cost(s, checkpoint_.q.cost);
    f.tau = s.tau;
    f.ucb = ucb;
    f.seq = seq_;
    f.degraded = degraded;
    return f;
}

void Session::emit(const StateFrame& f)
{
    ++metrics_.frames;
    if (f.degraded) ++metrics_.degraded;
    metrics_.cost_sum += f.cost;
    metrics_.tau_sum += f.tau;
    log_.push_back(f);
}

StateFrame Session::tick(const std::optional<HandCommand>& command)
{
    const q::QModel& q = checkpoint_.q;
    Action a;
    double ucb = 0.0;
    bool degraded = false;

    if (mode_ == Mode::Agent) {
        try {
            opt::UcbConfig cfg = options_.ucb;
            cfg.seed = tick_seed(scenario_.seed, seq_);
            const opt::OptimizeResult r = opt::optimize_action(q, obs_, cfg, checkpoint_.bounds);
            a = r.action;
            ucb = r.value;
        } catch (const Error&) {
            degraded = true;
        }
    } else if (mode_ == Mode::Replay && replay_pos_ < options_.replay.size()) {
        a = options_.replay[replay_pos_++];
    }
    if (mode_ != Mode::Agent || degraded) {
        try {
            ucb = opt::q_ucb(q, obs_, a, options_.ucb.delta);
        } catch (const Error&) {
            ucb = std::nan("");
        }
    }

    if (command) {
        command_ = {std::clamp(command->vx, -kHandLimit, kHandLimit),
                    std::clamp(command->vz, -kHandLimit, kHandLimit)};
        silence_ = 0.0;
    }
    const double period = world_.params.control_period;
    const double dt = world_.params.dt;
    const double decay = std::exp(-dt / options_.decay_tau);
    for (int i = 0; i < world_.params.substeps(); ++i) {
        if (silence_ >= period - 1e-9) {
            command_.x *= decay;
            command_.z *= decay;
        }
        hand_ = command_;
        world_ = sim::step(world_, a, hand_, dt);
        silence_ += dt;
    }
    obs_ = sensor_.observe(world_, scenario_.start.goal);

    ++seq_;
    const StateFrame f = make_frame(obs_, a, ucb, degraded);
    emit(f);
    return f;
}

bool Session::apply(const ClientMessage& m)
{
    if (const auto* mode = std::get_if<ModeCommand>(&m)) {
        set_mode(mode->mode);
        return true;
    }
    if (std::holds_alternative<ResetCommand>(m)) {
        reset();
        return true;
    }
    // Hand commands are consumed by tick(); unknown types are the caller's to log.
    return std::holds_alternative<HandCommand>(m);
}

void Session::write_log(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# coplank frames v" << kFrameLogVersion << '\n';
    out << "seq,t";
    for (auto n : kStateNames) out << ',' << n;
    for (auto n : kActionNames) out << ',' << n;
    out << ",cost,tau,ucb,degraded\n";
    for (const StateFrame& f : log_) {
        out << f.seq << ',' << exact(f.t);
        const StateVector s = f.state.vec();
        const ActionVector a = f.action.vec();
        for (int i = 0; i < kStateDim; ++i) out << ',' << exact(s[i]);
        for (int i = 0; i < kActionDim; ++i) out << ',' << exact(a[i]);
        out << ',' << exact(f.cost) << ',' << exact(f.tau) << ',' << exact(f.ucb) << ',' << (f.degraded ? 1 : 0)
            << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<StateFrame> read_frame_log(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open frame log " + path.string());
    std::string line;
    const std::string header = "# coplank frames v" + std::to_string(kFrameLogVersion);
    if (!std::getline(in, line) || line != header)
        throw LoadError(path.string() + ": expected header '" + header + "'");
    if (!std::getline(in, line)) throw LoadError(path.string() + ": missing column row");
    constexpr std::size_t kCols = 2 + kStateDim + kActionDim + 4;
    std::vector<StateFrame> out;
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw LoadError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (v.size() != kCols)
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(kCols) +
                            " columns");
        StateFrame f;
        f.seq = static_cast<std::int64_t>(v[0]);
        f.t = v[1];
        f.state = State::from_vec(Eigen::Map<const StateVector>(v.data() + 2));
        f.action = Action::from_vec(Eigen::Map<const ActionVector>(v.data() + 2 + kStateDim));
        std::size_t k = 2 + kStateDim + kActionDim;
        f.cost = v[k++];
        f.tau = v[k++];
        f.ucb = v[k++];
        f.degraded = v[k] != 0.0;
        out.push_back(f);
    }
    return out;
}

} // namespace coplank::service
