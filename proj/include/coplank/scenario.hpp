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

// Scenario files: JSON documents describing the simulated world, the scripted
// partner and the start configuration. Every field is optional and falls back
// to the defaults of the corresponding struct. See docs/formats.md.

#include "coplank/plank_sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace coplank {

inline constexpr int kScenarioVersion = 1;

struct Scenario {
    std::string name = "default";
    sim::PhysicsParams physics;
    sim::SensorParams sensor;
    sim::HumanProfile human;
    sim::StartConfig start;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Throws ConfigError on malformed JSON, unknown keys or invalid values.
Scenario parse_scenario(const std::string& json_text);
std::string scenario_to_json(const Scenario& s);

/// Throws ConfigError when the file is missing or unreadable.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

} // namespace coplank
