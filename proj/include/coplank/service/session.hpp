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

// One live human-robot session: the simulator, the frozen agent on the
// robot end and a remotely steered hand on the other. tick() is pure with
// respect to wall time; the server decides when to call it.

#include "coplank/action_optimizer.hpp"
#include "coplank/checkpoint.hpp"
#include "coplank/plank_sim.hpp"
#include "coplank/scenario.hpp"
#include "coplank/service/protocol.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace coplank::service {

struct SessionOptions {
    opt::UcbConfig ucb;
    /// Time constant of the hand command decay once the client falls silent.
    double decay_tau = 0.5;
    Mode mode = Mode::Agent;
    /// Robot actions played back in Replay mode, one per tick, then zeros.
    std::vector<Action> replay;
};

/// Running sums over emitted frames, accumulated in emission order.
struct Metrics {
    std::int64_t frames = 0;
    std::int64_t degraded = 0;
    double cost_sum = 0.0;
    double tau_sum = 0.0;

    double cost_mean() const { return frames ? cost_sum / static_cast<double>(frames) : 0.0; }
    double tau_mean() const { return frames ? tau_sum / static_cast<double>(frames) : 0.0; }
};

class Session {
public:
    /// Throws ConfigError on an invalid scenario or options.
    Session(std::string id, Checkpoint checkpoint, Scenario scenario, SessionOptions options = {});

    /// Loads the checkpoint first; a bad file raises LoadError and no session exists.
    static Session open(std::string id, const std::filesystem::path& checkpoint, Scenario scenario,
                        SessionOptions options = {});

    const std::string& id() const { return id_; }

    /// The frame describing the start state (seq 0), queued at open and after reset.
    const StateFrame& initial_frame() const { return initial_; }

    /// One control period. `command` is the newest hand command received
    /// since the previous tick, if any.
    StateFrame tick(const std::optional<HandCommand>& command = std::nullopt);

    /// Applies a client message. Returns false for unknown types.
    bool apply(const ClientMessage& m);

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }

    /// Back to the scenario start. Metrics, log and seq continue.
    void reset();

    const Metrics& metrics() const { return metrics_; }
    const std::vector<StateFrame>& log() const { return log_; }
    const sim::SimWorld& world() const { return world_; }
    /// Hand velocity applied during the last physics substep.
    sim::Vec2 hand_velocity() const { return hand_; }
    double control_period() const { return world_.params.control_period; }
    const ActionBounds& bounds() const { return checkpoint_.bounds; }

    /// CSV frame log, schema "frames" v1 (docs/formats.md).
    void write_log(const std::filesystem::path& path) const;

private:
    StateFrame make_frame(const State& s, const Action& a, double ucb, bool degraded);
    void emit(const StateFrame& f);

    std::string id_;
    Checkpoint checkpoint_;
    Scenario scenario_;
    SessionOptions options_;
    Mode mode_;

    sim::SimWorld world_;
    sim::Sensor sensor_;
    State obs_;
    sim::Vec2 command_;
    sim::Vec2 hand_;
    double silence_ = 0.0; ///< seconds since the last hand command
    std::int64_t seq_ = 0;
    std::size_t replay_pos_ = 0;

    StateFrame initial_;
    Metrics metrics_;
    std::vector<StateFrame> log_;
};

/// Reads a frame log written by Session::write_log. Throws LoadError.
std::vector<StateFrame> read_frame_log(const std::filesystem::path& path);

} // namespace coplank::service
