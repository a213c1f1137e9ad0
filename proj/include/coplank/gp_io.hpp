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

#include "coplank/gp.hpp"

#include <iosfwd>

namespace coplank::gp {

/// Text format, one tagged field per line (see docs/formats.md):
///
///   gp_model 1
///   dim <D>
///   points <N>
///   max_points <M>
///   jitter <initial> <max> <factor>
///   signal_std <v>
///   noise_std <v>
///   lengthscales <l_1> ... <l_D>
///   inputs
///   <N rows of D values>
///   targets
///   <N values>
///   end_gp_model
///
/// Numbers are written with max_digits10 so that reading rebuilds the exact
/// same factorization.
inline constexpr int kGpFormatVersion = 1;

void write_text(std::ostream& out, const GpModel& model);

/// Throws LoadError on malformed input or an unknown version.
GpModel read_text(std::istream& in);

} // namespace coplank::gp
