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

#include "coplank/scenario.hpp"

#include "coplank/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace coplank {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object()) throw ConfigError("scenario: '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("scenario: unknown key '" + where + "." + key + "'");
    }
}

template <class T>
void read(const json& obj, const char* key, T& out)
{
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: bad value for '") + key + "': " + e.what());
    }
}

} // namespace

void Scenario::validate() const
{
    physics.validate();
    human.validate();
    if (!(sensor.rate_hz > 0.0)) throw ConfigError("scenario: sensor.rate_hz must be positive");
    if (!(sensor.d_noise >= 0.0 && sensor.d_dot_noise >= 0.0 && sensor.tau_noise >= 0.0))
        throw ConfigError("scenario: sensor noise levels must be non-negative");
    if (!(start.d >= 0.0 && start.d <= 1.0)) throw ConfigError("scenario: start.d must lie in [0, 1]");
    if (!(start.goal >= 0.0 && start.goal <= 1.0)) throw ConfigError("scenario: start.goal must lie in [0, 1]");
    if (!(std::abs(start.theta) < physics.theta_limit))
        throw ConfigError("scenario: |start.theta| must be below physics.theta_limit");
}

Scenario parse_scenario(const std::string& json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
    }
    check_keys(doc, "", {"version", "name", "physics", "sensor", "human", "start", "seed"});

    int version = kScenarioVersion;
    read(doc, "version", version);
    if (version != kScenarioVersion)
        throw ConfigError("scenario: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kScenarioVersion) + ")");

    Scenario s;
    read(doc, "name", s.name);
    read(doc, "seed", s.seed);

    if (doc.contains("physics")) {
        const json& p = doc["physics"];
        check_keys(p, "physics",
                   {"plank_length", "gravity", "grasp_stiffness", "grasp_damping", "end_admittance", "hand_admittance",
                    "rolling_damping", "actuator_lag", "theta_limit", "tau_scale", "dt", "control_period"});
        read(p, "plank_length", s.physics.plank_length);
        read(p, "gravity", s.physics.gravity);
        read(p, "grasp_stiffness", s.physics.grasp_stiffness);
        read(p, "grasp_damping", s.physics.grasp_damping);
        read(p, "end_admittance", s.physics.end_admittance);
        read(p, "hand_admittance", s.physics.hand_admittance);
        read(p, "rolling_damping", s.physics.rolling_damping);
        read(p, "actuator_lag", s.physics.actuator_lag);
        read(p, "theta_limit", s.physics.theta_limit);
        read(p, "tau_scale", s.physics.tau_scale);
        read(p, "dt", s.physics.dt);
        read(p, "control_period", s.physics.control_period);
    }
    if (doc.contains("sensor")) {
        const json& p = doc["sensor"];
        check_keys(p, "sensor", {"rate_hz", "d_noise", "d_dot_noise", "tau_noise"});
        read(p, "rate_hz", s.sensor.rate_hz);
        read(p, "d_noise", s.sensor.d_noise);
        read(p, "d_dot_noise", s.sensor.d_dot_noise);
        read(p, "tau_noise", s.sensor.tau_noise);
    }
    if (doc.contains("human")) {
        const json& p = doc["human"];
        check_keys(p, "human",
                   {"kind", "pose_kp", "resist_gain", "follow_gain", "goal_awareness", "tilt_kp", "tilt_kd",
                    "tilt_max", "tilt_track", "max_speed", "noise_std", "reaction_delay"});
        if (p.contains("kind")) {
            std::string kind;
            read(p, "kind", kind);
            s.human.kind = sim::human_kind_from_string(kind);
        }
        read(p, "pose_kp", s.human.pose_kp);
        read(p, "resist_gain", s.human.resist_gain);
        read(p, "follow_gain", s.human.follow_gain);
        read(p, "goal_awareness", s.human.goal_awareness);
        read(p, "tilt_kp", s.human.tilt_kp);
        read(p, "tilt_kd", s.human.tilt_kd);
        read(p, "tilt_max", s.human.tilt_max);
        read(p, "tilt_track", s.human.tilt_track);
        read(p, "max_speed", s.human.max_speed);
        read(p, "noise_std", s.human.noise_std);
        read(p, "reaction_delay", s.human.reaction_delay);
    }
    if (doc.contains("start")) {
        const json& p = doc["start"];
        check_keys(p, "start", {"d", "goal", "theta"});
        read(p, "d", s.start.d);
        read(p, "goal", s.start.goal);
        read(p, "theta", s.start.theta);
    }
    s.validate();
    return s;
}

std::string scenario_to_json(const Scenario& s)
{
    json doc;
    doc["version"] = kScenarioVersion;
    doc["name"] = s.name;
    doc["seed"] = s.seed;
    const auto& p = s.physics;
    doc["physics"] = {{"plank_length", p.plank_length},   {"gravity", p.gravity},
                      {"grasp_stiffness", p.grasp_stiffness}, {"grasp_damping", p.grasp_damping},
                      {"end_admittance", p.end_admittance}, {"hand_admittance", p.hand_admittance},
                      {"rolling_damping", p.rolling_damping},
                      {"actuator_lag", p.actuator_lag},   {"theta_limit", p.theta_limit},
                      {"tau_scale", p.tau_scale},         {"dt", p.dt},
                      {"control_period", p.control_period}};
    doc["sensor"] = {{"rate_hz", s.sensor.rate_hz},
                     {"d_noise", s.sensor.d_noise},
                     {"d_dot_noise", s.sensor.d_dot_noise},
                     {"tau_noise", s.sensor.tau_noise}};
    const auto& h = s.human;
    doc["human"] = {{"kind", sim::to_string(h.kind)},
                    {"pose_kp", h.pose_kp},
                    {"resist_gain", h.resist_gain},
                    {"follow_gain", h.follow_gain},
                    {"goal_awareness", h.goal_awareness},
                    {"tilt_kp", h.tilt_kp},
                    {"tilt_kd", h.tilt_kd},
                    {"tilt_max", h.tilt_max},
                    {"tilt_track", h.tilt_track},
                    {"max_speed", h.max_speed},
                    {"noise_std", h.noise_std},
                    {"reaction_delay", h.reaction_delay}};
    doc["start"] = {{"d", s.start.d}, {"goal", s.start.goal}, {"theta", s.start.theta}};
    return doc.dump(2) + "\n";
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_scenario(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void save_scenario(const Scenario& s, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario file " + path.string());
    out << scenario_to_json(s);
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace coplank
