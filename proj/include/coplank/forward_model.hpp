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
#include "coplank/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace coplank::fm {

/// Seven independent GPs over (s, a) predicting the per-dimension state change.
class ForwardModel {
public:
    ForwardModel() = default;
    explicit ForwardModel(std::vector<gp::GpModel> per_dim);

    /// Untrained model: every dimension is the zero-mean prior.
    static ForwardModel prior(const gp::Hyperparams& hyper, gp::ModelOptions options = {});

    const gp::GpModel& dim(int i) const { return per_dim_.at(static_cast<std::size_t>(i)); }
    const std::vector<gp::GpModel>& models() const { return per_dim_; }
    Eigen::Index size() const { return per_dim_.empty() ? 0 : per_dim_.front().size(); }

    /// Next-state belief. delta_d is re-derived from the predicted d and the
    /// goal implied by s, and inherits d's variance. The variance is that of
    /// the latent change; with `observation` set the fitted noise variance is
    /// added, giving the spread of the next measured state.
    GaussianState predict(const State& s, const Action& a, bool observation = false) const;

private:
    std::vector<gp::GpModel> per_dim_;
};

struct TrainOptions {
    gp::FitOptions fit;
    /// Shared initial hyperparameters; when empty a data-driven heuristic is used.
    std::optional<gp::Hyperparams> init;
};

/// Heuristic start: lengthscales = input std, sf = target RMS, sn = 0.1 sf.
gp::Hyperparams heuristic_hyperparams(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);

/// Fit each output dimension on inputs (s_i, a_i) and targets s_{i+1} - s_i.
ForwardModel train(std::span<const Transition> transitions, const TrainOptions& options = {});

/// Append transitions to every dimension and refit, warm-starting each
/// dimension from its current hyperparameters.
ForwardModel update(const ForwardModel& model, std::span<const Transition> transitions,
                    const gp::FitOptions& fit);

using RelevanceTable = Eigen::Matrix<double, kStateDim, kInputDim>;

/// Inverse squared lengthscales, each row divided by its maximum.
RelevanceTable relevance(const ForwardModel& model);

using RolloutPolicy = std::function<Action(const State&, std::mt19937_64&)>;

struct RolloutStep {
    GaussianState predicted;
    Action action;
};

/// Iterates predict, feeding each predicted mean (projected onto the valid
/// state domain) into the policy. Throws ContractViolation when the policy
/// leaves the action box.
std::vector<RolloutStep> rollout(const ForwardModel& model, const GaussianState& start,
                                 const RolloutPolicy& policy, int steps, std::uint64_t seed,
                                 const ActionBounds& bounds = {});

Eigen::MatrixXd transition_inputs(std::span<const Transition> transitions);
Eigen::MatrixXd transition_deltas(std::span<const Transition> transitions);

} // namespace coplank::fm
