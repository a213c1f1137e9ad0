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

// Plot-ready series derived from a run directory written by
// exp::write_run_artifacts. Everything here reads CSV and writes CSV; no
// model is reconstructed.

#include "coplank/types.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace coplank::report {

/// Files a run directory must contain for report().
inline constexpr std::array<const char*, 4> kRunFiles = {"eval_steps.csv", "iterations.csv", "relevance.csv",
                                                         "heldout.csv"};

/// Files report() writes into its output directory.
inline constexpr std::array<const char*, 5> kReportFiles = {"step_response.csv", "tau_trace.csv", "fm_bands.csv",
                                                            "relevance_normalized.csv", "calibration.csv"};

/// A versioned CSV file: "# coplank <kind> v<N>", a column row, data rows.
struct CsvTable {
    std::string kind;
    int version = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    /// Index of a column; throws LoadError naming the file when absent.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;

    std::filesystem::path source;
};

/// Throws LoadError on a missing file, wrong kind/version or ragged row.
CsvTable read_csv(const std::filesystem::path& path, const std::string& kind);

struct Summary {
    /// Fraction of held-out steps whose actual value lies in mean ± 2 std.
    std::array<double, kStateDim> calibration{};
    /// Inputs of the delta_theta relevance row, most relevant first.
    std::vector<std::string> theta_ranking;
    struct Iteration {
        int iteration = 0;
        double overshoot = 0.0;
        double settling = 0.0;
        double tau = 0.0;
        double cost = 0.0;
    };
    std::vector<Iteration> iterations;
};

/// Reads `run_dir`, writes kReportFiles into `out_dir` (created if needed)
/// and returns the headline numbers. A missing input file raises LoadError
/// listing every expected file.
Summary report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

/// Session frame log (written by the interaction service) to
/// session_trace.csv in `out_dir`: time, ball error, tau and running means.
/// Returns the number of frames.
std::size_t report_frames(const std::filesystem::path& frames_csv, const std::filesystem::path& out_dir);

/// Human-readable multi-line rendering of a summary.
std::string format_summary(const Summary& s);

} // namespace coplank::report
