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

// Shared generators for the unit tests. Everything is seeded explicitly so a
// failing case can be reproduced from the printed seed.

#include "coplank/action_optimizer.hpp"
#include "coplank/forward_model.hpp"
#include "coplank/gp.hpp"
#include "coplank/plank_sim.hpp"
#include "coplank/q_learner.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <vector>

namespace coplank::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::MatrixXd random_inputs(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d,
                                     double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = uniform(rng, lo, hi);
    return x;
}

inline gp::Hyperparams random_hyper(std::mt19937_64& rng, Eigen::Index d) {
    gp::Hyperparams h;
    h.lengthscales.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) h.lengthscales[j] = std::exp(uniform(rng, -1.0, 1.0));
    h.signal_std = std::exp(uniform(rng, -1.0, 1.0));
    h.noise_std = std::exp(uniform(rng, -3.0, -1.0));
    return h;
}

/// Smooth test function with a mild interaction term.
inline Eigen::VectorXd smooth_targets(const Eigen::MatrixXd& x, std::mt19937_64& rng, double noise) {
    std::normal_distribution<double> n(0.0, noise);
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double v = std::sin(2.0 * x(i, 0));
        if (x.cols() > 1) v += 0.5 * x(i, 0) * x(i, 1);
        y[i] = v + n(rng);
    }
    return y;
}

inline State random_state(std::mt19937_64& rng) {
    State s;
    s.x = uniform(rng, -0.1, 0.1);
    s.z = uniform(rng, -0.1, 0.1);
    s.theta = uniform(rng, -0.2, 0.2);
    s.d = uniform(rng, 0.1, 0.9);
    s.delta_d = s.d - uniform(rng, 0.2, 0.8);
    s.d_dot = uniform(rng, -0.3, 0.3);
    s.tau = uniform(rng, 0.0, 3.0);
    return s;
}

inline Action random_action(std::mt19937_64& rng, const ActionBounds& b = {}) {
    return {uniform(rng, -b.xi[0], b.xi[0]) * 0.999, uniform(rng, -b.xi[1], b.xi[1]) * 0.999,
            uniform(rng, -b.xi[2], b.xi[2]) * 0.999};
}

/// Gaussian belief around a random state with variances up to `max_var`.
inline GaussianState random_belief(std::mt19937_64& rng, double max_var) {
    GaussianState g;
    g.mean = random_state(rng).vec();
    for (int i = 0; i < kStateDim; ++i) g.var[i] = uniform(rng, 0.0, max_var);
    return g;
}

/// Transitions of a synthetic linear-ish system, cheap to fit.
inline std::vector<Transition> synthetic_transitions(std::mt19937_64& rng, int n, double noise = 1e-3) {
    std::normal_distribution<double> eps(0.0, noise);
    std::vector<Transition> out;
    for (int i = 0; i < n; ++i) {
        Transition t;
        t.s = random_state(rng);
        t.a = random_action(rng);
        const double goal = t.s.goal();
        State n2 = t.s;
        n2.x += 0.25 * t.a.x_dot + eps(rng);
        n2.z += 0.25 * t.a.z_dot + eps(rng);
        n2.theta += 0.25 * t.a.theta_dot + eps(rng);
        n2.d_dot += -0.5 * t.s.theta - 1.5 * t.a.theta_dot + 0.8 * t.a.x_dot + eps(rng);
        n2.d += 0.25 * t.s.d_dot + eps(rng);
        n2.delta_d = n2.d - goal;
        n2.tau = std::abs(t.s.tau * 0.8 + eps(rng));
        t.s_next = n2;
        out.push_back(t);
    }
    return out;
}

/// Forward model with fixed hyperparameters on synthetic data (no fitting).
inline fm::ForwardModel fixed_forward_model(const std::vector<Transition>& data, double noise_std = 0.01) {
    const Eigen::MatrixXd x = fm::transition_inputs(data);
    const Eigen::MatrixXd y = fm::transition_deltas(data);
    std::vector<gp::GpModel> dims;
    for (int d = 0; d < kStateDim; ++d) {
        gp::Hyperparams h = gp::Hyperparams::isotropic(kInputDim, 1.0, 0.2, noise_std);
        dims.push_back(gp::GpModel::build(x, y.col(d), h));
    }
    return fm::ForwardModel(std::move(dims));
}

/// Random Q model: a GP over (s, a) with random targets and hyperparameters.
inline q::QModel random_q(std::mt19937_64& rng, int points) {
    Eigen::MatrixXd x(points, kInputDim);
    Eigen::VectorXd y(points);
    for (int i = 0; i < points; ++i) {
        x.row(i) = make_input(random_state(rng), random_action(rng)).transpose();
        y[i] = uniform(rng, 0.0, 0.5);
    }
    gp::Hyperparams h;
    h.lengthscales.resize(kInputDim);
    for (int j = 0; j < kInputDim; ++j) h.lengthscales[j] = std::exp(uniform(rng, -2.0, 0.5));
    h.signal_std = uniform(rng, 0.1, 0.5);
    h.noise_std = 0.01;
    q::QModel q;
    q.gp = gp::GpModel::build(x, y, h);
    q.cost = CostSpec::with_force();
    q.prior_mean = uniform(rng, 0.0, 0.2);
    return q;
}

/// Monte Carlo estimate of E[f(s)] under a diagonal Gaussian belief.
struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

template <class F>
inline McEstimate monte_carlo(const GaussianState& g, std::mt19937_64& rng, int n, F f) {
    std::normal_distribution<double> z(0.0, 1.0);
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        StateVector s;
        for (int i = 0; i < kStateDim; ++i) s[i] = g.mean[i] + std::sqrt(g.var[i]) * z(rng);
        const double v = f(s);
        sum += v;
        sum2 += v * v;
    }
    const double m = sum / n;
    return {m, std::sqrt(std::max(0.0, sum2 / n - m * m) / n)};
}

/// Learned and exact Q value of one (state, action) pair of the chain below.
struct ChainValue {
    int state = 0;
    int action = 0;
    double learned = 0.0;
    double exact = 0.0;
};

// Two ball positions, two actions (stay / move to the other position). The
// forward model is fitted to those four transitions only, so its predictions
// there are near deterministic; repeated Q updates should reach the fixed
// point of exact value iteration on the same chain.
inline std::vector<ChainValue> two_state_chain(int sweeps = 60) {
    const double goal = 0.9;
    const std::array<double, 2> pos = {0.3, 0.7};
    const std::array<Action, 2> acts = {Action{0.0, 0.0, -0.1}, Action{0.0, 0.0, 0.1}}; // stay, move
    const auto make_state = [&](int i) {
        State s;
        s.d = pos[static_cast<std::size_t>(i)];
        s.delta_d = s.d - goal;
        return s;
    };
    const auto next = [](int i, int a) { return a == 0 ? i : 1 - i; };

    std::vector<Transition> data;
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 2; ++a)
            data.push_back({make_state(i), acts[static_cast<std::size_t>(a)], make_state(next(i, a))});

    gp::Hyperparams h = gp::Hyperparams::isotropic(kInputDim, 50.0, 0.5, 1e-4);
    h.lengthscales[kD] = 0.1;
    h.lengthscales[kDeltaD] = 0.1;
    h.lengthscales[kStateDim + 2] = 0.05;
    const Eigen::MatrixXd x = fm::transition_inputs(data);
    const Eigen::MatrixXd y = fm::transition_deltas(data);
    std::vector<gp::GpModel> dims;
    for (int d = 0; d < kStateDim; ++d) dims.push_back(gp::GpModel::build(x, y.col(d), h));
    const fm::ForwardModel model(std::move(dims));

    const double gamma = 0.5;
    q::QModel q;
    q.gamma = gamma;
    q.cost = CostSpec::position_only();
    q.gp = gp::GpModel::build(x, Eigen::VectorXd::Zero(4), h);

    const std::vector<Action> cands(acts.begin(), acts.end());
    for (int sweep = 0; sweep < sweeps; ++sweep)
        for (const Transition& t : data) q = q::q_update(q, t.s, t.a, model.predict(t.s, t.a), cands).model;

    // Exact value iteration.
    std::array<double, 2> c{};
    for (int i = 0; i < 2; ++i) c[static_cast<std::size_t>(i)] = cost(make_state(i), q.cost);
    std::array<std::array<double, 2>, 2> qv{};
    for (int it = 0; it < 200; ++it) {
        auto nq = qv;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a) {
                const auto j = static_cast<std::size_t>(next(i, a));
                nq[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = c[j] + gamma * std::min(qv[j][0], qv[j][1]);
            }
        qv = nq;
    }
    std::vector<ChainValue> out;
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 2; ++a)
            out.push_back({i, a, q.predict(make_state(i), acts[static_cast<std::size_t>(a)]).mean,
                           qv[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)]});
    if (q.gp.size() != 4) out.clear(); // overwrites must not grow the model
    return out;
}

/// Gap of the optimizer's UCB value above the best point of an exhaustive
/// 64^3 action grid, as a fraction of the objective range on that grid.
/// Negative when the optimizer beats the grid. One entry per trained Q model.
inline std::vector<double> grid_oracle_gaps(int models) {
    std::mt19937_64 rng(211);
    const auto data = synthetic_transitions(rng, 80, 5e-3);
    fm::TrainOptions to;
    to.fit.restarts = 1;
    const fm::ForwardModel model = fm::train(data, to);
    const ActionBounds b;
    constexpr int kGrid = 64;
    std::vector<double> gaps;
    for (int trial = 0; trial < models; ++trial) {
        std::vector<std::pair<State, Action>> pairs;
        for (int k = 0; k < 40; ++k) pairs.emplace_back(random_state(rng), random_action(rng, b));
        gp::FitOptions fit;
        fit.restarts = 1;
        fit.seed = static_cast<std::uint64_t>(trial);
        const q::QModel q = q::init_q(model, pairs, CostSpec::position_only(), 0.2, fit);
        const State s = pairs[static_cast<std::size_t>(trial)].first;

        opt::UcbConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const opt::OptimizeResult r = opt::optimize_action(q, s, cfg, b);
        if (!b.contains_closed(r.action)) {
            gaps.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int i = 0; i < kGrid; ++i)
            for (int j = 0; j < kGrid; ++j)
                for (int k = 0; k < kGrid; ++k) {
                    const auto at = [&](int n, int dim) { return b.xi[dim] * (2.0 * (n + 0.5) / kGrid - 1.0); };
                    const double v = opt::q_ucb(q, s, Action{at(i, 0), at(j, 1), at(k, 2)}, cfg.delta);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
        gaps.push_back((r.value - lo) / (hi - lo));
    }
    return gaps;
}

} // namespace coplank::testing
