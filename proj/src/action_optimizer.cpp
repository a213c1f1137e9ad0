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

#include "coplank/action_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace coplank::opt {

using Eigen::VectorXd;

void UcbConfig::validate() const
{
    if (restarts < 1) throw ContractViolation("UcbConfig: restarts must be >= 1");
    if (max_iters < 0) throw ContractViolation("UcbConfig: max_iters must be >= 0");
    if (!(grad_step > 0.0)) throw ContractViolation("UcbConfig: grad_step must be positive");
    const RpropParams& r = rprop;
    if (!(r.step_init > 0.0 && r.step_min > 0.0 && r.step_max > 0.0 && r.step_min <= r.step_max))
        throw ContractViolation("UcbConfig: Rprop step sizes must be positive and ordered");
    if (!(r.eta_plus > 1.0 && r.eta_minus > 0.0 && r.eta_minus < 1.0))
        throw ContractViolation("UcbConfig: need eta_plus > 1 > eta_minus > 0");
    if (!(alpha_limit > 0.0)) throw ContractViolation("UcbConfig: alpha_limit must be positive");
}

double q_ucb(const q::QModel& q, const State& s, const Action& a, double delta)
{
    const gp::Prediction p = q.predict(s, a);
    if (delta == 0.0) return p.mean;
    return p.mean - delta * std::sqrt(p.variance);
}

Action bound_transform(const ActionVector& alpha, const ActionBounds& bounds)
{
    ActionVector a;
    for (int j = 0; j < kActionDim; ++j) {
        if (std::isinf(alpha[j])) {
            a[j] = std::copysign(bounds.xi[j], alpha[j]);
        } else {
            a[j] = bounds.xi[j] * std::tanh(0.5 * alpha[j]);
        }
    }
    return Action::from_vec(a);
}

ActionVector inverse_bound_transform(const Action& a, const ActionBounds& bounds)
{
    const ActionVector v = a.vec();
    ActionVector alpha;
    for (int j = 0; j < kActionDim; ++j) {
        const double u = v[j] / bounds.xi[j];
        if (!(std::abs(u) < 1.0)) {
            std::ostringstream msg;
            msg << "inverse_bound_transform: |a_" << j << "| = " << std::abs(v[j])
                << " is not below xi = " << bounds.xi[j];
            throw OutOfDomain(msg.str());
        }
        alpha[j] = 2.0 * std::atanh(u);
    }
    return alpha;
}

VectorXd numeric_gradient(const ScalarFn& f, const VectorXd& alpha, double step)
{
    if (!(step > 0.0)) throw ContractViolation("numeric_gradient: step must be positive");
    VectorXd g(alpha.size());
    VectorXd probe = alpha;
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        probe[j] = alpha[j] + step;
        const double up = f(probe);
        probe[j] = alpha[j] - step;
        const double down = f(probe);
        probe[j] = alpha[j];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw GradientEvaluationError("numeric_gradient: objective is not finite near alpha");
        g[j] = (up - down) / (2.0 * step);
    }
    return g;
}

OptimizeResult minimize_bounded(const std::function<double(const Action&)>& objective,
                                const UcbConfig& cfg, const ActionBounds& bounds)
{
    cfg.validate();
    bounds.validate();
    const RpropParams& rp = cfg.rprop;

    OptimizeResult result;
    const ScalarFn f = [&](const VectorXd& alpha) {
        ++result.evaluations;
        return objective(bound_transform(ActionVector(alpha), bounds));
    };
    const auto clamp_alpha = [&](VectorXd& alpha) {
        alpha = alpha.cwiseMax(-cfg.alpha_limit).cwiseMin(cfg.alpha_limit);
    };

    std::mt19937_64 rng(cfg.seed);
    double best_value = std::numeric_limits<double>::infinity();
    VectorXd best_alpha;
    std::ostringstream failures;

    for (int r = 0; r < cfg.restarts; ++r) {
        VectorXd alpha = VectorXd::Zero(kActionDim);
        if (r > 0) {
            // Uniform draw over 95% of the box, mapped back to alpha space.
            ActionVector a0;
            for (int j = 0; j < kActionDim; ++j) {
                std::uniform_real_distribution<double> u(-0.95 * bounds.xi[j], 0.95 * bounds.xi[j]);
                a0[j] = u(rng);
            }
            alpha = inverse_bound_transform(Action::from_vec(a0), bounds);
        }

        try {
            double value = f(alpha);
            if (!std::isfinite(value)) throw GradientEvaluationError("objective not finite at restart start");
            if (value < best_value) {
                best_value = value;
                best_alpha = alpha;
            }

            VectorXd step = VectorXd::Constant(kActionDim, rp.step_init);
            VectorXd g_prev = VectorXd::Zero(kActionDim);
            VectorXd last_move = VectorXd::Zero(kActionDim);
            for (int it = 0; it < cfg.max_iters; ++it) {
                VectorXd g = numeric_gradient(f, alpha, cfg.grad_step);
                if (g.cwiseAbs().maxCoeff() == 0.0) break;
                for (int j = 0; j < kActionDim; ++j) {
                    const double s = g[j] * g_prev[j];
                    if (s > 0.0) {
                        step[j] = std::min(step[j] * rp.eta_plus, rp.step_max);
                        last_move[j] = -std::copysign(step[j], g[j]);
                        alpha[j] += last_move[j];
                    } else if (s < 0.0) {
                        step[j] = std::max(step[j] * rp.eta_minus, rp.step_min);
                        alpha[j] -= last_move[j];
                        last_move[j] = 0.0;
                        g[j] = 0.0;
                    } else {
                        last_move[j] = g[j] == 0.0 ? 0.0 : -std::copysign(step[j], g[j]);
                        alpha[j] += last_move[j];
                    }
                }
                clamp_alpha(alpha);
                g_prev = g;
                value = f(alpha);
                if (!std::isfinite(value)) throw GradientEvaluationError("objective not finite during Rprop");
                if (value < best_value) {
                    best_value = value;
                    best_alpha = alpha;
                }
                if (step.maxCoeff() <= rp.step_min) break;
            }
        } catch (const GradientEvaluationError& e) {
            failures << " restart " << r << ": " << e.what() << ';';
        }
    }

    if (best_alpha.size() == 0) throw OptimizationFailed("optimize_action: every restart failed;" + failures.str());
    result.action = bound_transform(ActionVector(best_alpha), bounds);
    result.value = best_value;
    return result;
}

OptimizeResult optimize_action(const q::QModel& q, const State& s, const UcbConfig& cfg,
                               const ActionBounds& bounds)
{
    return minimize_bounded([&](const Action& a) { return q_ucb(q, s, a, cfg.delta); }, cfg, bounds);
}

} // namespace coplank::opt
