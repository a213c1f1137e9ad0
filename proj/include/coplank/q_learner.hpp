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

// GP action-value function with the probabilistic Q update.
//
// The Q target for a transition (s, a) with predicted next state N(mu, Sigma) is
//   E[c(s')] + gamma * min_a' E[Q(s', a')],
// both expectations taken analytically over the Gaussian next state.

#include "coplank/forward_model.hpp"
#include "coplank/gp.hpp"
#include "coplank/types.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace coplank::q {

/// Q(s, a) = prior_mean + GP residual. The GP stores targets minus prior_mean.
struct QModel {
    gp::GpModel gp;
    double gamma = 0.2;
    CostSpec cost;
    double prior_mean = 0.0;

    void validate() const;
    /// Posterior of Q at (s, a), prior_mean included.
    gp::Prediction predict(const State& s, const Action& a) const;
};

/// Constant prior mean of a freshly initialized Q model.
enum class QPriorMean {
    Zero,     ///< the plain zero-mean GP prior
    DataMean, ///< mean of the initial targets
};

/// (mu - s*)^T W (mu - s*) + tr(W Sigma).
double expected_cost(const GaussianState& g, const CostSpec& cost);

/// Expectation of the Q posterior mean over s ~ N(g.mean, diag(g.var)) with
/// the action held fixed. prior_mean for an empty model.
double expected_q(const QModel& q, const GaussianState& g, const Action& a);

/// 64-point Halton design (bases 2, 3, 5) scaled into the open action box.
std::vector<Action> halton_candidates(const ActionBounds& bounds, int count = 64);

/// E[c] + gamma * max(0, min over candidates of expected_q). The floor keeps
/// the target a valid cost-to-go when the GP extrapolates below zero.
/// Candidates must be non-empty.
double bellman_target(const QModel& q, const GaussianState& g_next, std::span<const Action> candidates);

struct Update {
    QModel model;
    double target = 0.0;
    bool overwrote = false;
};

/// Row-match tolerance (max-norm) for overwriting an existing Q input.
inline constexpr double kOverwriteTolerance = 1e-9;

Update q_update(const QModel& q, const State& s, const Action& a, const GaussianState& g_next,
                std::span<const Action> candidates);

/// Q hyperparameter heuristic: input std lengthscales, target RMS signal, 0.1 noise ratio.
gp::Hyperparams q_heuristic(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);

/// Fit a Q model whose targets are the immediate predicted costs of the seed pairs.
QModel init_q(const fm::ForwardModel& model, std::span<const std::pair<State, Action>> seed_pairs,
              const CostSpec& cost, double gamma, const gp::FitOptions& fit,
              const gp::Hyperparams* hyper_init = nullptr, QPriorMean prior = QPriorMean::Zero);

struct EpisodeConfig {
    double epsilon = 0.2;
    int steps = 20;
    ActionBounds bounds;
    std::vector<Action> candidates; ///< empty means halton_candidates(bounds)
};

struct EpisodeStep {
    State s;
    Action a;
    bool explored = false;
    double target = 0.0;
};

struct EpisodeResult {
    QModel q;
    std::vector<EpisodeStep> steps;
};

/// One simulated episode on the forward model with epsilon-greedy actions.
/// The random stream is consumed as: one uniform [0,1) draw per step for the
/// exploration decision, then three uniform draws (x, z, theta order) in
/// (-xi, xi) when exploring.
EpisodeResult run_episode(QModel q, const fm::ForwardModel& model, const State& s0,
                          const EpisodeConfig& config, std::mt19937_64& rng);

EpisodeResult run_episode(QModel q, const fm::ForwardModel& model, const State& s0,
                          const EpisodeConfig& config, std::uint64_t seed);

struct IterationConfig {
    int episodes = 50;
    EpisodeConfig episode;
    gp::FitOptions fm_fit;
    gp::FitOptions q_fit;
    std::uint64_t seed = 0;
    /// Episode start states; empty means the states of `transitions`.
    std::vector<State> starts;
};

struct IterationResult {
    QModel q;
    fm::ForwardModel fm;
    std::vector<EpisodeStep> trace;
    std::vector<double> episode_mean_targets;
};

/// Update the forward model with real transitions, run simulated episodes
/// from states drawn uniformly among config.starts (default: the states of
/// those transitions), then refit Q
/// hyperparameters (only when at least one episode ran).
IterationResult train_iteration(QModel q, fm::ForwardModel model,
                                std::span<const Transition> transitions,
                                const IterationConfig& config);

} // namespace coplank::q
