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

#include "coplank/q_learner.hpp"
#include "coplank/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>

namespace coplank::opt {

struct RpropParams {
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double step_init = 0.1;
    double step_min = 1e-6;
    double step_max = 1.0;
};

struct UcbConfig {
    /// Uncertainty weight. The objective is mean - delta * std, so a negative
    /// delta penalizes uncertain actions under minimization.
    double delta = -0.5;
    int restarts = 5;
    int max_iters = 100;
    double grad_step = 1e-4;
    RpropParams rprop;
    std::uint64_t seed = 0;
    /// |alpha| cap; keeps bound_transform strictly inside the box in floating point.
    double alpha_limit = 25.0;

    void validate() const;
};

/// m(s,a) - delta * sqrt(v(s,a)).
double q_ucb(const q::QModel& q, const State& s, const Action& a, double delta);

/// a_j = xi_j (1 - e^-alpha_j) / (1 + e^-alpha_j), written as xi_j tanh(alpha_j / 2).
Action bound_transform(const ActionVector& alpha, const ActionBounds& bounds);

/// Inverse of bound_transform. Throws OutOfDomain unless |a_j| < xi_j.
ActionVector inverse_bound_transform(const Action& a, const ActionBounds& bounds);

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// Central differences per coordinate. Throws GradientEvaluationError on a
/// non-finite function value.
Eigen::VectorXd numeric_gradient(const ScalarFn& f, const Eigen::VectorXd& alpha, double step);

struct OptimizeResult {
    Action action;
    double value = 0.0;
    int evaluations = 0;
};

/// Rprop (with step reversal on sign flips) over alpha from cfg.restarts
/// starts: alpha = 0, then random in-box draws. Returns the best evaluated
/// candidate over all restarts.
OptimizeResult minimize_bounded(const std::function<double(const Action&)>& objective,
                                const UcbConfig& cfg, const ActionBounds& bounds);

/// argmin_a q_ucb(q, s, a, cfg.delta).
OptimizeResult optimize_action(const q::QModel& q, const State& s, const UcbConfig& cfg,
                               const ActionBounds& bounds);

} // namespace coplank::opt
