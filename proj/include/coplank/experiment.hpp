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

// Desk-scale experiment protocol: bootstrap data collection, the GP
// Q-learning outer loop against the simulator, greedy step-response
// evaluation, and the CSV artifacts written for each run.

#include "coplank/action_optimizer.hpp"
#include "coplank/checkpoint.hpp"
#include "coplank/forward_model.hpp"
#include "coplank/q_learner.hpp"
#include "coplank/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace coplank::exp {

/// Version of every CSV schema written by this module (docs/formats.md).
inline constexpr int kCsvSchemaVersion = 1;

enum class CostPreset { PositionOnly, WithForce };

std::string to_string(CostPreset p);
CostPreset cost_preset_from_string(const std::string& s);
CostSpec make_cost(CostPreset p);

struct ExperimentConfig {
    Scenario scenario;
    CostPreset preset = CostPreset::PositionOnly;
    double gamma = 0.2;
    double delta = -0.5;
    ActionBounds bounds;

    int bootstrap_samples = 150;
    /// Bootstrap segments restart from a random ball position and goal after this many steps.
    int bootstrap_segment = 30;
    /// Low-pass factor of the exploratory bootstrap policy (0 = white noise).
    double bootstrap_smoothing = 0.7;

    int iterations = 3;
    int episodes = 50;
    int steps = 20;
    double epsilon = 0.2;
    /// Real-environment control steps collected with the current policy per iteration.
    int collect_steps = 40;

    int eval_trials = 1;
    int eval_steps = 80;
    double eval_start = 0.2;
    double eval_goal = 0.8;

    int fm_restarts = 6;
    int q_restarts = 2;
    /// Q hyperparameters are optimized on at most this many recent rows.
    int q_fit_points = 250;
    /// Lower bound on the Q noise std. Q targets are noise-free model
    /// outputs, so an unbounded fit drives the noise to zero and the Gram
    /// matrix towards singularity.
    double q_noise_floor = 1e-4;
    q::QPriorMean q_prior = q::QPriorMean::Zero;
    /// Extra Halton actions paired with each bootstrap state when seeding Q,
    /// so the initial fit sees action contrasts at a fixed state.
    int q_seed_actions = 3;
    /// Simulated episodes start from every recorded real state instead of
    /// only those collected in the current iteration.
    bool episode_starts_all = true;
    int optimizer_restarts = 5;
    int optimizer_iters = 100;

    std::uint64_t seed = 1;
    std::filesystem::path output_dir;

    /// Throws ConfigError when a count or weight is out of range.
    void validate() const;
};

struct Agent {
    fm::ForwardModel forward;
    q::QModel q;
};

/// Greedy UCB action for observation s. Falls back to the zero action when
/// the optimizer fails; `degraded` reports that case.
struct PolicyOutput {
    Action action;
    double ucb = 0.0;
    bool degraded = false;
};
PolicyOutput greedy_action(const q::QModel& q, const State& s, const ExperimentConfig& cfg,
                           std::uint64_t seed);

/// Smoothed random in-bounds actions against the scenario's partner.
std::vector<Transition> bootstrap(const ExperimentConfig& cfg);

/// Forward model trained on the bootstrap data and the initial Q model.
Agent initialize(const ExperimentConfig& cfg, const std::vector<Transition>& data);

/// Real-environment rollout of the greedy UCB policy from random starts.
std::vector<Transition> collect(const Agent& agent, const ExperimentConfig& cfg, int iteration);

struct EvalRow {
    double t = 0.0;
    State s;
    double d_true = 0.0;
    Action a;
    double cost = 0.0;
    double q_mean = 0.0;
    double q_std = 0.0;
    double ucb = 0.0;
};

struct TrialResult {
    std::vector<EvalRow> rows;
    double overshoot = 0.0;
    double settling_time = 0.0; ///< +inf when the ball never settles
    double tau_mean = 0.0;
    double cost_mean = 0.0;
};

/// Step response from eval_start to eval_goal with a partner seeded by env_seed.
TrialResult evaluate_trial(const Agent& agent, const ExperimentConfig& cfg, std::uint64_t env_seed);

/// Seed of evaluation trial k; shared by every iteration so comparisons are paired.
std::uint64_t eval_seed(const ExperimentConfig& cfg, int trial);

/// Largest excursion of d past the goal after the first crossing, in the
/// direction of travel from d[0]. Zero when the goal is never crossed.
double overshoot(const std::vector<double>& d, double goal);

/// First sample time from which |d - goal| < band holds for `hold` seconds.
/// +inf if that never happens inside the series.
double settling_time(const std::vector<double>& t, const std::vector<double>& d, double goal,
                     double band = 0.1, double hold = 5.0);

struct IterationSummary {
    int iteration = 0;
    std::vector<TrialResult> trials;
    Eigen::Index q_points = 0;
    Eigen::Index fm_points = 0;

    double overshoot_mean() const;
    double settling_mean() const;
    double tau_mean() const;
    double cost_mean() const;
};

struct RunResult {
    std::vector<Transition> transitions; ///< every real transition, bootstrap first
    std::vector<int> transition_iteration; ///< -1 for bootstrap rows
    std::vector<Agent> agents;           ///< agents[k] after k outer iterations
    std::vector<IterationSummary> summaries;
};

using Progress = std::function<void(const std::string&)>;

/// Bootstrap (or `data` when non-empty), initialize, then cfg.iterations outer
/// iterations, evaluating the agent after initialization and after every
/// iteration.
RunResult run(const ExperimentConfig& cfg, const std::vector<Transition>& data = {},
              const Progress& progress = {});

/// Held-out one-step predictions (observation variance) on a fresh
/// smoothed-random trajectory.
struct HeldOutRow {
    int step = 0;
    int dim = 0;
    double actual = 0.0;
    double mean = 0.0;
    double std = 0.0;
};
std::vector<HeldOutRow> held_out_predictions(const fm::ForwardModel& model, const ExperimentConfig& cfg,
                                             int steps, std::uint64_t seed);

// ------------------------------------------------------------------ artifacts

void write_transitions_csv(const std::filesystem::path& path, const std::vector<Transition>& data,
                           const std::vector<int>& iteration = {});
/// Throws LoadError on a malformed file.
std::vector<Transition> read_transitions_csv(const std::filesystem::path& path);

void write_eval_csv(const std::filesystem::path& path, const std::vector<IterationSummary>& summaries);
void write_iterations_csv(const std::filesystem::path& path, const std::vector<IterationSummary>& summaries);
void write_relevance_csv(const std::filesystem::path& path, const fm::RelevanceTable& table);
void write_heldout_csv(const std::filesystem::path& path, const std::vector<HeldOutRow>& rows);

/// Writes transitions.csv, eval_steps.csv, iterations.csv, relevance.csv,
/// heldout.csv, config.json and checkpoint.txt into cfg.output_dir.
void write_run_artifacts(const ExperimentConfig& cfg, const RunResult& result);

std::string config_to_json(const ExperimentConfig& cfg);
/// Flags take precedence; this only fills a config from a file.
ExperimentConfig config_from_json(const std::string& text);

} // namespace coplank::exp
