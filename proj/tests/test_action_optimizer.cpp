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

#include "support.hpp"

#include "coplank/action_optimizer.hpp"
#include "coplank/errors.hpp"

#include <doctest.h>

#include <algorithm>

using namespace coplank;
using namespace coplank::testing;

TEST_CASE("bound transform hand value") {
    ActionBounds b;
    b.xi = ActionVector(0.1, 0.1, 0.1);
    const Action a = opt::bound_transform(ActionVector::Constant(std::log(3.0)), b);
    CHECK(a.x_dot == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(a.z_dot == doctest::Approx(0.05).epsilon(1e-14));
    const Action z = opt::bound_transform(ActionVector::Zero(), b);
    CHECK(z == Action{});
}

TEST_CASE("bound transform round trip and range") {
    std::mt19937_64 rng(201);
    const ActionBounds b;
    for (int k = 0; k < 1000; ++k) {
        ActionVector alpha;
        for (int j = 0; j < kActionDim; ++j) alpha[j] = uniform(rng, -10.0, 10.0);
        const Action a = opt::bound_transform(alpha, b);
        CHECK(b.contains(a));
        const ActionVector back = opt::inverse_bound_transform(a, b);
        CHECK((back - alpha).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, std::exp(alpha.cwiseAbs().maxCoeff())));
        const Action a2 = random_action(rng, b);
        CHECK((opt::bound_transform(opt::inverse_bound_transform(a2, b), b).vec() - a2.vec()).cwiseAbs().maxCoeff() <
              1e-10);
    }
    // The transform stays strictly inside the box up to the alpha cap.
    CHECK(b.contains(opt::bound_transform(ActionVector::Constant(25.0), b)));
    CHECK_THROWS_AS(opt::inverse_bound_transform(Action{0.1, 0.0, 0.0}, b), OutOfDomain);
}

TEST_CASE("numeric gradient of a known function") {
    const opt::ScalarFn f = [](const Eigen::VectorXd& v) { return std::sin(v[0]) + v[0] * v[1] * v[1]; };
    Eigen::VectorXd p(2);
    p << 0.4, -0.7;
    const Eigen::VectorXd g = opt::numeric_gradient(f, p, 1e-4);
    CHECK(g[0] == doctest::Approx(std::cos(0.4) + 0.49).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(2.0 * 0.4 * -0.7).epsilon(1e-7));

    const opt::ScalarFn bad = [](const Eigen::VectorXd& v) { return v[0] > 0.0 ? std::nan("") : 0.0; };
    CHECK_THROWS_AS(opt::numeric_gradient(bad, Eigen::VectorXd::Zero(1), 1e-4), GradientEvaluationError);
}

TEST_CASE("quadratic bowl minimum is recovered") {
    std::mt19937_64 rng(203);
    const ActionBounds b;
    opt::UcbConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const Action c = random_action(rng, b);
        const auto bowl = [&](const Action& a) { return (a.vec() - c.vec()).squaredNorm(); };
        cfg.seed = static_cast<std::uint64_t>(trial);
        const opt::OptimizeResult r = opt::minimize_bounded(bowl, cfg, b);
        CHECK((r.action.vec() - c.vec()).cwiseAbs().maxCoeff() < 1e-3);
        CHECK(r.evaluations > 0);
    }
}

TEST_CASE("minimum on the boundary is approached from inside") {
    const ActionBounds b;
    const auto tilt = [](const Action& a) { return a.x_dot + a.z_dot - a.theta_dot; };
    const opt::OptimizeResult r = opt::minimize_bounded(tilt, opt::UcbConfig{}, b);
    CHECK(b.contains_closed(r.action));
    CHECK(r.value < -0.4 + 1e-3 * 0.8);
}

TEST_CASE("invalid optimizer settings are rejected") {
    opt::UcbConfig cfg;
    cfg.restarts = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}

TEST_CASE("q_ucb is mean minus delta times std") {
    std::mt19937_64 rng(207);
    const auto data = synthetic_transitions(rng, 30);
    const fm::ForwardModel m = fixed_forward_model(data);
    std::vector<std::pair<State, Action>> pairs;
    for (const auto& t : data) pairs.emplace_back(t.s, t.a);
    gp::FitOptions fit;
    fit.restarts = 1;
    const q::QModel q = q::init_q(m, pairs, CostSpec::position_only(), 0.2, fit);
    const State s = random_state(rng);
    const Action a = random_action(rng);
    const gp::Prediction p = q.predict(s, a);
    CHECK(opt::q_ucb(q, s, a, -0.5) == doctest::Approx(p.mean + 0.5 * std::sqrt(p.variance)));
    CHECK(opt::q_ucb(q, s, a, 0.0) == doctest::Approx(p.mean));
}

TEST_CASE("optimizer is near the grid optimum on trained Q models") {
    const std::vector<double> gaps = grid_oracle_gaps(20);
    for (std::size_t k = 0; k < gaps.size(); ++k) CHECK_MESSAGE(gaps[k] <= 1e-3, "model " << k << " gap " << gaps[k]);
    MESSAGE("worst optimizer gap (fraction of range) " << *std::max_element(gaps.begin(), gaps.end()));
}

TEST_CASE("bound transform saturates at the box edge") {
    ActionBounds b;
    const Action a = opt::bound_transform(ActionVector::Constant(40.0), b);
    CHECK(std::abs(a.x_dot - 0.1) < 1e-15);
    CHECK(std::abs(a.theta_dot - 0.2) < 1e-15);
    const Action n = opt::bound_transform(ActionVector::Constant(-40.0), b);
    CHECK(std::abs(n.z_dot + 0.1) < 1e-15);
}

TEST_CASE("numeric gradient of the UCB objective is Richardson consistent") {
    std::mt19937_64 rng(213);
    const auto data = synthetic_transitions(rng, 30);
    const fm::ForwardModel m = fixed_forward_model(data);
    std::vector<std::pair<State, Action>> pairs;
    for (const auto& t : data) pairs.emplace_back(t.s, t.a);
    gp::FitOptions fit;
    fit.restarts = 1;
    const q::QModel q = q::init_q(m, pairs, CostSpec::position_only(), 0.2, fit);
    const ActionBounds b;
    for (int trial = 0; trial < 10; ++trial) {
        const State s = random_state(rng);
        const opt::ScalarFn f = [&](const Eigen::VectorXd& alpha) {
            return opt::q_ucb(q, s, opt::bound_transform(alpha, b), -0.5);
        };
        Eigen::VectorXd alpha(3);
        for (int j = 0; j < 3; ++j) alpha[j] = uniform(rng, -2.0, 2.0);
        const Eigen::VectorXd g1 = opt::numeric_gradient(f, alpha, 0.2);
        const Eigen::VectorXd g2 = opt::numeric_gradient(f, alpha, 0.1);
        const Eigen::VectorXd g4 = opt::numeric_gradient(f, alpha, 0.05);
        // Central differences: halving h cuts the difference by about four.
        const double d12 = (g1 - g2).norm();
        const double d24 = (g2 - g4).norm();
        if (d12 < 1e-12) continue;
        CHECK(d12 / d24 == doctest::Approx(4.0).epsilon(0.25));
    }
}

TEST_CASE("flat objective of an empty Q model") {
    q::QModel q;
    q.gp = gp::GpModel::prior(gp::Hyperparams::isotropic(kInputDim, 1.0, 0.3, 0.01));
    const ActionBounds b;
    const opt::OptimizeResult r = opt::optimize_action(q, State{}, opt::UcbConfig{}, b);
    CHECK(b.contains(r.action));
    CHECK(std::isfinite(r.action.x_dot));
    CHECK(r.value == doctest::Approx(0.5 * 0.3));
}

TEST_CASE("optimizer never does worse than its restart points") {
    std::mt19937_64 rng(217);
    const auto data = synthetic_transitions(rng, 30);
    const fm::ForwardModel m = fixed_forward_model(data);
    std::vector<std::pair<State, Action>> pairs;
    for (const auto& t : data) pairs.emplace_back(t.s, t.a);
    gp::FitOptions fit;
    fit.restarts = 1;
    const q::QModel q = q::init_q(m, pairs, CostSpec::position_only(), 0.2, fit);
    const ActionBounds b;
    for (int trial = 0; trial < 10; ++trial) {
        const State s = random_state(rng);
        opt::UcbConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const opt::OptimizeResult r = opt::optimize_action(q, s, cfg, b);
        CHECK(b.contains(r.action));
        CHECK(r.value <= opt::q_ucb(q, s, Action{}, cfg.delta));
    }
}
