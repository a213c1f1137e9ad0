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

#include "coplank/q_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coplank::q {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void QModel::validate() const
{
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("QModel: gamma must lie in [0, 1)");
    if (gp.dim() != kInputDim) throw ContractViolation("QModel: GP must take (s, a) inputs");
    cost.validate();
    if (!std::isfinite(prior_mean)) throw ContractViolation("QModel: prior_mean must be finite");
}

gp::Prediction QModel::predict(const State& s, const Action& a) const
{
    gp::Prediction p = gp.predict(make_input(s, a));
    p.mean += prior_mean;
    return p;
}

double expected_cost(const GaussianState& g, const CostSpec& cost)
{
    const StateVector e = g.mean - cost.target;
    const double quad = (cost.weights.array() * e.array().square()).sum();
    const double trace = (cost.weights.array() * g.var.array().max(0.0)).sum();
    return quad + trace;
}

double expected_q(const QModel& q, const GaussianState& g, const Action& a)
{
    const gp::GpModel& m = q.gp;
    if (m.empty()) return q.prior_mean;

    InputVector mu;
    mu << g.mean, a.vec();
    InputVector var = InputVector::Zero();
    var.head<kStateDim>() = g.var.cwiseMax(0.0);

    const VectorXd ls2 = m.hyper().lengthscales.array().square().matrix();
    const VectorXd denom = var + ls2;
    // |Sigma W^-1 + I|^{-1/2} for diagonal Sigma and W.
    const double prefactor = 1.0 / std::sqrt((var.array() / ls2.array() + 1.0).prod());

    const VectorXd r2 =
        (m.inputs().rowwise() - mu.transpose()).array().square().matrix() * denom.cwiseInverse();
    const VectorXd l = (m.signal_variance() * (-0.5 * r2.array()).exp()).matrix();
    return q.prior_mean + prefactor * m.alpha().dot(l);
}

std::vector<Action> halton_candidates(const ActionBounds& bounds, int count)
{
    bounds.validate();
    const auto radical_inverse = [](int index, int base) {
        double f = 1.0;
        double r = 0.0;
        while (index > 0) {
            f /= base;
            r += f * (index % base);
            index /= base;
        }
        return r;
    };
    std::vector<Action> out;
    out.reserve(static_cast<std::size_t>(count));
    constexpr int kBases[kActionDim] = {2, 3, 5};
    for (int i = 1; i <= count; ++i) {
        ActionVector v;
        for (int j = 0; j < kActionDim; ++j) v[j] = bounds.xi[j] * (2.0 * radical_inverse(i, kBases[j]) - 1.0);
        out.push_back(Action::from_vec(v));
    }
    return out;
}

double bellman_target(const QModel& q, const GaussianState& g_next, std::span<const Action> candidates)
{
    if (candidates.empty()) throw ContractViolation("bellman_target: no action candidates");
    const double immediate = expected_cost(g_next, q.cost);
    if (q.gamma == 0.0) return immediate;
    double best = std::numeric_limits<double>::infinity();
    for (const Action& c : candidates) best = std::min(best, expected_q(q, g_next, c));
    // Costs are non-negative, so is every cost-to-go; GP extrapolation is not.
    return immediate + q.gamma * std::max(0.0, best);
}

Update q_update(const QModel& q, const State& s, const Action& a, const GaussianState& g_next,
                std::span<const Action> candidates)
{
    const double target = bellman_target(q, g_next, candidates);
    const InputVector x = make_input(s, a);

    const MatrixXd& rows = q.gp.inputs();
    for (Eigen::Index i = rows.rows() - 1; i >= 0; --i) {
        if ((rows.row(i).transpose() - x).cwiseAbs().maxCoeff() <= kOverwriteTolerance) {
            return {QModel{q.gp.with_target(i, target - q.prior_mean), q.gamma, q.cost, q.prior_mean},
                    target, true};
        }
    }
    MatrixXd nx = x.transpose();
    VectorXd ny(1);
    ny[0] = target - q.prior_mean;
    return {QModel{gp::add_observations(q.gp, nx, ny), q.gamma, q.cost, q.prior_mean}, target, false};
}

gp::Hyperparams q_heuristic(const MatrixXd& inputs, const VectorXd& targets)
{
    return fm::heuristic_hyperparams(inputs, targets);
}

QModel init_q(const fm::ForwardModel& model, std::span<const std::pair<State, Action>> seed_pairs,
              const CostSpec& cost, double gamma, const gp::FitOptions& fit,
              const gp::Hyperparams* hyper_init, QPriorMean prior)
{
    if (seed_pairs.size() < 10) throw ContractViolation("init_q: need at least 10 seed pairs");
    cost.validate();

    // Duplicate inputs collapse onto one row holding the latest target.
    std::vector<InputVector> xs;
    std::vector<double> ys;
    for (const auto& [s, a] : seed_pairs) {
        const InputVector x = make_input(s, a);
        const double y = expected_cost(model.predict(s, a), cost);
        auto hit = std::find_if(xs.begin(), xs.end(), [&](const InputVector& r) {
            return (r - x).cwiseAbs().maxCoeff() <= kOverwriteTolerance;
        });
        if (hit != xs.end()) {
            ys[static_cast<std::size_t>(hit - xs.begin())] = y;
        } else {
            xs.push_back(x);
            ys.push_back(y);
        }
    }
    MatrixXd x(static_cast<Eigen::Index>(xs.size()), kInputDim);
    VectorXd y(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
        y[static_cast<Eigen::Index>(i)] = ys[i];
    }

    QModel q;
    q.gamma = gamma;
    q.cost = cost;
    if (prior == QPriorMean::DataMean) {
        q.prior_mean = y.mean();
        y.array() -= q.prior_mean;
    }
    gp::Hyperparams init = hyper_init ? *hyper_init : q_heuristic(x, y);
    if (x.rows() < 2) {
        init.noise_std = 0.0;
        q.gp = gp::GpModel::build(x, y, init, fit.model);
    } else {
        q.gp = gp::fit(x, y, init, fit);
    }
    q.validate();
    return q;
}

namespace {

Action greedy_candidate(const QModel& q, const State& s, std::span<const Action> candidates)
{
    const GaussianState here = GaussianState::point(s);
    double best = std::numeric_limits<double>::infinity();
    Action chosen = candidates.front();
    for (const Action& c : candidates) {
        const double v = expected_q(q, here, c);
        if (v < best) {
            best = v;
            chosen = c;
        }
    }
    return chosen;
}

} // namespace

EpisodeResult run_episode(QModel q, const fm::ForwardModel& model, const State& s0,
                          const EpisodeConfig& config, std::mt19937_64& rng)
{
    if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0))
        throw ContractViolation("run_episode: epsilon must lie in [0, 1]");
    if (config.steps < 1) throw ContractViolation("run_episode: steps must be >= 1");

    std::vector<Action> candidates =
        config.candidates.empty() ? halton_candidates(config.bounds) : config.candidates;
    const std::size_t grid_size = candidates.size();
    candidates.push_back(Action{}); // slot for the current greedy action

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double goal = s0.goal();
    EpisodeResult out;
    out.steps.reserve(static_cast<std::size_t>(config.steps));
    State s = s0;
    for (int t = 0; t < config.steps; ++t) {
        const Action greedy = greedy_candidate(q, s, std::span(candidates).first(grid_size));
        candidates.back() = greedy;

        Action a = greedy;
        const bool explore = unit(rng) < config.epsilon;
        if (explore) {
            ActionVector v;
            for (int j = 0; j < kActionDim; ++j) {
                std::uniform_real_distribution<double> u(-config.bounds.xi[j], config.bounds.xi[j]);
                v[j] = u(rng);
            }
            a = Action::from_vec(v);
        }

        const GaussianState g = model.predict(s, a);
        Update up = q_update(q, s, a, g, candidates);
        q = std::move(up.model);
        out.steps.push_back({s, a, explore, up.target});
        s = project_state(g.mean_state(), goal);
    }
    out.q = std::move(q);
    return out;
}

EpisodeResult run_episode(QModel q, const fm::ForwardModel& model, const State& s0,
                          const EpisodeConfig& config, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return run_episode(std::move(q), model, s0, config, rng);
}

IterationResult train_iteration(QModel q, fm::ForwardModel model,
                                std::span<const Transition> transitions,
                                const IterationConfig& config)
{
    if (config.episodes < 0) throw ContractViolation("train_iteration: episodes must be >= 0");

    IterationResult out;
    if (!transitions.empty()) model = fm::update(model, transitions, config.fm_fit);

    if (config.episodes > 0) {
        std::vector<State> starts = config.starts;
        if (starts.empty())
            for (const Transition& tr : transitions) starts.push_back(tr.s);
        if (starts.empty()) {
            const MatrixXd& x = model.dim(0).inputs();
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                starts.push_back(State::from_vec(x.row(i).head<kStateDim>().transpose()));
        }
        if (starts.empty()) throw ContractViolation("train_iteration: no start states available");

        std::mt19937_64 rng(config.seed);
        std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
        for (int e = 0; e < config.episodes; ++e) {
            const State& s0 = starts[pick(rng)];
            EpisodeResult ep = run_episode(std::move(q), model, s0, config.episode, rng);
            q = std::move(ep.q);
            double sum = 0.0;
            for (const EpisodeStep& st : ep.steps) sum += st.target;
            out.episode_mean_targets.push_back(sum / static_cast<double>(ep.steps.size()));
            out.trace.insert(out.trace.end(), ep.steps.begin(), ep.steps.end());
        }

        gp::FitOptions fo = config.q_fit;
        fo.model = q.gp.options();
        if (q.gp.size() >= 2) q.gp = gp::fit(q.gp.inputs(), q.gp.targets(), q.gp.hyper(), fo);
    }
    out.q = std::move(q);
    out.fm = std::move(model);
    return out;
}

} // namespace coplank::q
