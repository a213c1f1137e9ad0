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

// Trained agent on disk: forward model, Q model and the action box used to
// train it. Tagged text format, see docs/formats.md.

#include "coplank/forward_model.hpp"
#include "coplank/q_learner.hpp"

#include <filesystem>
#include <iosfwd>

namespace coplank {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    fm::ForwardModel forward;
    q::QModel q;
    ActionBounds bounds;
};

void write_checkpoint(std::ostream& out, const Checkpoint& c);
/// Throws LoadError with the offending line or a version diagnostic.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace coplank
