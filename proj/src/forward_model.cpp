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

#include "coplank/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coplank::fm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ForwardModel::ForwardModel(std::vector<gp::GpModel> per_dim) : per_dim_(std::move(per_dim))
{
    if (per_dim_.size() != static_cast<std::size_t>(kStateDim))
        throw ContractViolation("ForwardModel needs one GP per state dimension");
    for (const auto& m : per_dim_) {
        if (m.dim() != kInputDim) throw ContractViolation("ForwardModel GPs must take (s, a) inputs");
        if (m.size() != per_dim_.front().size())
            throw ContractViolation("ForwardModel GPs must share training inputs");
    }
}

ForwardModel ForwardModel::prior(const gp::Hyperparams& hyper, gp::ModelOptions options)
{
    std::vector<gp::GpModel> dims;
    for (int i = 0; i < kStateDim; ++i) dims.push_back(gp::GpModel::prior(hyper, options));
    return ForwardModel(std::move(dims));
}

GaussianState ForwardModel::predict(const State& s, const Action& a, bool observation) const
{
    const InputVector x = make_input(s, a);
    GaussianState g;
    g.mean = s.vec();
    for (int i = 0; i < kStateDim; ++i) {
        const gp::Prediction p = per_dim_[static_cast<std::size_t>(i)].predict(x);
        g.mean[i] += p.mean;
        g.var[i] = p.variance;
        if (observation) {
            const gp::GpModel& m = per_dim_[static_cast<std::size_t>(i)];
            g.var[i] += m.hyper().noise_std * m.hyper().noise_std + m.jitter();
        }
    }
    g.mean[kDeltaD] = g.mean[kD] - s.goal();
    g.var[kDeltaD] = g.var[kD];
    return g;
}

MatrixXd transition_inputs(std::span<const Transition> transitions)
{
    MatrixXd x(static_cast<Eigen::Index>(transitions.size()), kInputDim);
    for (std::size_t i = 0; i < transitions.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = make_input(transitions[i].s, transitions[i].a).transpose();
    return x;
}

MatrixXd transition_deltas(std::span<const Transition> transitions)
{
    MatrixXd y(static_cast<Eigen::Index>(transitions.size()), kStateDim);
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        y.row(static_cast<Eigen::Index>(i)) =
            (transitions[i].s_next.vec() - transitions[i].s.vec()).transpose();
    }
    return y;
}

gp::Hyperparams heuristic_hyperparams(const MatrixXd& inputs, const VectorXd& targets)
{
    const double n = static_cast<double>(std::max<Eigen::Index>(inputs.rows(), 1));
    gp::Hyperparams h;
    const VectorXd mean = inputs.colwise().mean().transpose();
    h.lengthscales = ((inputs.rowwise() - mean.transpose()).array().square().colwise().sum() / n)
                         .sqrt()
                         .transpose()
                         .matrix();
    for (Eigen::Index d = 0; d < h.lengthscales.size(); ++d) {
        if (!(h.lengthscales[d] > 1e-9)) h.lengthscales[d] = 1.0;
    }
    const double rms = targets.size() ? std::sqrt(targets.squaredNorm() / n) : 1.0;
    h.signal_std = std::max(rms, 1e-6);
    h.noise_std = 0.1 * h.signal_std;
    return h;
}

ForwardModel train(std::span<const Transition> transitions, const TrainOptions& options)
{
    if (transitions.size() < 10) throw ContractViolation("forward model training needs >= 10 transitions");
    const MatrixXd x = transition_inputs(transitions);
    const MatrixXd y = transition_deltas(transitions);

    std::vector<gp::GpModel> dims;
    for (int i = 0; i < kStateDim; ++i) {
        const VectorXd yi = y.col(i);
        const gp::Hyperparams init = options.init ? *options.init : heuristic_hyperparams(x, yi);
        gp::FitOptions fo = options.fit;
        fo.seed = options.fit.seed + static_cast<std::uint64_t>(i);
        try {
            dims.push_back(gp::fit(x, yi, init, fo));
        } catch (const FittingFailed& e) {
            throw FittingFailed("forward model dimension '" + std::string(kStateNames[static_cast<std::size_t>(i)]) +
                                "': " + e.what());
        }
    }
    return ForwardModel(std::move(dims));
}

ForwardModel update(const ForwardModel& model, std::span<const Transition> transitions,
                    const gp::FitOptions& fit)
{
    if (transitions.empty()) return model;
    const MatrixXd new_x = transition_inputs(transitions);
    const MatrixXd new_y = transition_deltas(transitions);

    std::vector<gp::GpModel> dims;
    for (int i = 0; i < kStateDim; ++i) {
        const gp::GpModel& old = model.dim(i);
        MatrixXd x(old.size() + new_x.rows(), kInputDim);
        x << old.inputs(), new_x;
        VectorXd y(old.size() + new_y.rows());
        y << old.targets(), new_y.col(i);
        gp::FitOptions fo = fit;
        fo.seed = fit.seed + static_cast<std::uint64_t>(i);
        fo.model = old.options();
        try {
            dims.push_back(gp::fit(x, y, old.hyper(), fo));
        } catch (const FittingFailed& e) {
            throw FittingFailed("forward model dimension '" + std::string(kStateNames[static_cast<std::size_t>(i)]) +
                                "': " + e.what());
        }
    }
    return ForwardModel(std::move(dims));
}

RelevanceTable relevance(const ForwardModel& model)
{
    RelevanceTable table;
    for (int i = 0; i < kStateDim; ++i) {
        const VectorXd inv = model.dim(i).hyper().lengthscales.array().square().inverse().matrix();
        table.row(i) = (inv / inv.maxCoeff()).transpose();
    }
    return table;
}

std::vector<RolloutStep> rollout(const ForwardModel& model, const GaussianState& start,
                                 const RolloutPolicy& policy, int steps, std::uint64_t seed,
                                 const ActionBounds& bounds)
{
    if (steps < 1) throw ContractViolation("rollout: steps must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<RolloutStep> out;
    out.reserve(static_cast<std::size_t>(steps));
    const double goal = start.mean_state().goal();
    State s = start.mean_state();
    for (int t = 0; t < steps; ++t) {
        const Action a = policy(s, rng);
        if (!bounds.contains_closed(a)) throw ContractViolation("rollout: policy returned an out-of-bounds action");
        GaussianState g = model.predict(s, a);
        out.push_back({g, a});
        s = project_state(g.mean_state(), goal);
    }
    return out;
}

} // namespace coplank::fm
