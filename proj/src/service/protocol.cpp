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

#include "coplank/service/protocol.hpp"

#include "coplank/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace coplank::service {

using nlohmann::json;

namespace {

double finite_number(const json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw LoadError(std::string("field '") + key + "' must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw LoadError(std::string("field '") + key + "' must be finite");
    return v;
}

json parse_object(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw LoadError("message must be a JSON object");
    return j;
}

} // namespace

std::string to_string(Mode m)
{
    switch (m) {
    case Mode::Agent: return "agent";
    case Mode::Frozen: return "frozen";
    case Mode::Replay: return "replay";
    }
    return "unknown";
}

ClientMessage parse_client_message(const std::string& text)
{
    const json j = parse_object(text);
    const auto type = j.find("type");
    if (type == j.end() || !type->is_string()) throw LoadError("message needs a string 'type'");
    const std::string t = type->get<std::string>();

    if (t == "hand") {
        HandCommand c;
        c.vx = std::clamp(finite_number(j, "vx"), -kHandLimit, kHandLimit);
        c.vz = std::clamp(finite_number(j, "vz"), -kHandLimit, kHandLimit);
        const auto seq = j.find("seq");
        if (seq == j.end() || !seq->is_number_integer()) throw LoadError("field 'seq' must be an integer");
        c.seq = seq->get<std::int64_t>();
        return c;
    }
    if (t == "mode") {
        const auto v = j.find("value");
        if (v == j.end() || !v->is_string()) throw LoadError("field 'value' must be a string");
        const std::string s = v->get<std::string>();
        // Replay is chosen when a session is created, never by the client.
        if (s == "agent") return ModeCommand{Mode::Agent};
        if (s == "frozen") return ModeCommand{Mode::Frozen};
        throw LoadError("mode value must be 'agent' or 'frozen', got '" + s + "'");
    }
    if (t == "reset") return ResetCommand{};
    return UnknownMessage{t};
}

std::string encode_hand(const HandCommand& c)
{
    return json{{"type", "hand"}, {"vx", c.vx}, {"vz", c.vz}, {"seq", c.seq}}.dump();
}

std::string encode_mode(Mode m)
{
    return json{{"type", "mode"}, {"value", to_string(m)}}.dump();
}

std::string encode_reset()
{
    return json{{"type", "reset"}}.dump();
}

std::string encode_state(const StateFrame& f)
{
    const StateVector s = f.state.vec();
    const ActionVector a = f.action.vec();
    json j;
    j["type"] = "state";
    j["v"] = kProtocolVersion;
    j["t"] = f.t;
    j["state"] = std::vector<double>(s.data(), s.data() + kStateDim);
    j["action"] = std::vector<double>(a.data(), a.data() + kActionDim);
    j["cost"] = f.cost;
    j["tau"] = f.tau;
    j["ucb"] = f.ucb;
    j["seq"] = f.seq;
    j["degraded"] = f.degraded;
    return j.dump();
}

StateFrame decode_state(const std::string& text)
{
    const json j = parse_object(text);
    if (j.value("type", std::string()) != "state") throw LoadError("not a state frame");
    const int v = j.value("v", 0);
    if (v != kProtocolVersion)
        throw LoadError("state frame protocol v" + std::to_string(v) + ", expected v" +
                        std::to_string(kProtocolVersion));
    StateFrame f;
    try {
        f.t = j.at("t").get<double>();
        const auto s = j.at("state").get<std::vector<double>>();
        const auto a = j.at("action").get<std::vector<double>>();
        if (s.size() != kStateDim || a.size() != kActionDim) throw LoadError("state/action length mismatch");
        f.state = State::from_vec(Eigen::Map<const StateVector>(s.data()));
        f.action = Action::from_vec(Eigen::Map<const ActionVector>(a.data()));
        f.cost = j.at("cost").get<double>();
        f.tau = j.at("tau").get<double>();
        f.ucb = j.at("ucb").get<double>();
        f.seq = j.at("seq").get<std::int64_t>();
        f.degraded = j.value("degraded", false);
    } catch (const json::exception& e) {
        throw LoadError(std::string("bad state frame: ") + e.what());
    }
    return f;
}

std::string encode_error(const std::string& msg)
{
    return json{{"type", "error"}, {"msg", msg}}.dump();
}

std::optional<std::string> message_type(const std::string& text)
{
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    const auto t = j.find("type");
    if (t == j.end() || !t->is_string()) return std::nullopt;
    return t->get<std::string>();
}

} // namespace coplank::service
