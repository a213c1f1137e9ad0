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

// WebSocket wire protocol between the session server and a steering client.
// JSON text frames; see docs/formats.md for the full schema.

#include "coplank/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace coplank::service {

inline constexpr int kProtocolVersion = 1;
/// Hand velocity commands are clamped to +-this many m/s.
inline constexpr double kHandLimit = 0.2;

enum class Mode { Agent, Frozen, Replay };
std::string to_string(Mode m);

struct HandCommand {
    double vx = 0.0;
    double vz = 0.0;
    std::int64_t seq = 0;
};

struct ModeCommand {
    Mode mode = Mode::Agent;
};

struct ResetCommand {};

/// A well-formed message whose type this server does not know.
struct UnknownMessage {
    std::string type;
};

using ClientMessage = std::variant<HandCommand, ModeCommand, ResetCommand, UnknownMessage>;

/// Parses one client frame. Hand velocities come back already clamped.
/// Throws LoadError on malformed JSON or a known type with bad fields.
ClientMessage parse_client_message(const std::string& text);

std::string encode_hand(const HandCommand& c);
std::string encode_mode(Mode m);
std::string encode_reset();

struct StateFrame {
    double t = 0.0;
    State state;
    Action action;
    double cost = 0.0;
    double tau = 0.0;
    double ucb = 0.0;
    std::int64_t seq = 0;
    /// The optimizer failed on this tick and the zero action was applied.
    bool degraded = false;

    bool operator==(const StateFrame&) const = default;
};

std::string encode_state(const StateFrame& f);
/// Inverse of encode_state (used by clients and tests). Throws LoadError.
StateFrame decode_state(const std::string& text);
std::string encode_error(const std::string& msg);

/// Message type of an arbitrary frame, or nullopt if it is not a JSON object with a string "type".
std::optional<std::string> message_type(const std::string& text);

} // namespace coplank::service
