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

#include "coplank/errors.hpp"
#include "coplank/q_learner.hpp"

#include <doctest.h>

#include <algorithm>

using namespace coplank;
using namespace coplank::testing;

TEST_CASE("cost hand values") {
    CostSpec c = CostSpec::position_only();
    State s;
    s.delta_d = 0.5;
    CHECK(cost(s, c) == doctest::Approx(0.25));
    s.tau = 2.0;
    CHECK(cost(s, CostSpec::with_force()) == doctest::Approx(0.29));
    CHECK(cost(State{}, c) == 0.0);
    s.d_dot = 1.0;
    CHECK(cost(s, c) == doctest::Approx(0.25 + 0.2));
}

TEST_CASE("expected_cost closed form") {
    const CostSpec c = CostSpec::with_force();
    GaussianState g;
    CHECK(q::expected_cost(g, c) == 0.0);
    g.mean[kDeltaD] = 0.3;
    g.var[kDeltaD] = 0.01;
    g.var[kDDot] = 0.5;
    g.var[kTheta] = 100.0; // unweighted
    CHECK(q::expected_cost(g, c) == doctest::Approx(0.09 + 0.01 + 0.2 * 0.5));
}

TEST_CASE("expected_cost and expected_q match Monte Carlo within three standard errors") {
    std::mt19937_64 rng(101);
    constexpr int kSamples = 1000000;
    int worst_case = -1;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const q::QModel q = random_q(rng, 25);
        const GaussianState g = random_belief(rng, 0.02);
        const Action a = random_action(rng);

        const McEstimate mc_c = monte_carlo(g, rng, kSamples,
                                            [&](const StateVector& s) { return cost(State::from_vec(s), q.cost); });
        const double ec = q::expected_cost(g, q.cost);
        CHECK_MESSAGE(std::abs(ec - mc_c.mean) <= 3.0 * mc_c.se, "cost trial " << trial);

        const McEstimate mc_q = monte_carlo(
            g, rng, kSamples, [&](const StateVector& s) { return q.predict(State::from_vec(s), a).mean; });
        const double eq = q::expected_q(q, g, a);
        const double z = std::abs(eq - mc_q.mean) / mc_q.se;
        if (z > worst) {
            worst = z;
            worst_case = trial;
        }
        CHECK_MESSAGE(std::abs(eq - mc_q.mean) <= 3.0 * mc_q.se, "q trial " << trial);
    }
    MESSAGE("largest expected_q deviation " << worst << " SE (trial " << worst_case << ")");
}

TEST_CASE("expected_q tends to the posterior mean as the variance vanishes") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 20; ++trial) {
        const q::QModel q = random_q(rng, 30);
        GaussianState g = random_belief(rng, 0.0);
        g.var.setConstant(1e-14);
        const Action a = random_action(rng);
        CHECK(std::abs(q::expected_q(q, g, a) - q.predict(g.mean_state(), a).mean) < 1e-6);
    }
    q::QModel empty;
    empty.prior_mean = 0.7;
    CHECK(q::expected_q(empty, GaussianState{}, Action{}) == 0.7);
}

TEST_CASE("halton candidates fill the open action box deterministically") {
    const ActionBounds b;
    const auto c = q::halton_candidates(b);
    REQUIRE(c.size() == 64);
    CHECK(c == q::halton_candidates(b));
    for (const Action& a : c) CHECK(b.contains(a));
    // First point: radical inverses 1/2, 1/3, 1/5.
    CHECK(c[0].x_dot == doctest::Approx(0.0));
    CHECK(c[0].z_dot == doctest::Approx(0.1 * (2.0 / 3.0 - 1.0)));
    CHECK(c[0].theta_dot == doctest::Approx(0.2 * (2.0 / 5.0 - 1.0)));
}

TEST_CASE("bellman target at the goal with no uncertainty is zero") {
    q::QModel q;
    q.cost = CostSpec::position_only();
    q.gp = gp::GpModel::prior(gp::Hyperparams::isotropic(kInputDim, 1.0, 1.0, 0.01));
    const auto cands = q::halton_candidates(ActionBounds{});
    CHECK(q::bellman_target(q, GaussianState{}, cands) == 0.0);
    CHECK_THROWS_AS(q::bellman_target(q, GaussianState{}, std::span<const Action>{}), ContractViolation);
}

TEST_CASE("q_update overwrites matching rows and appends new ones") {
    std::mt19937_64 rng(107);
    q::QModel q = random_q(rng, 10);
    const auto cands = q::halton_candidates(ActionBounds{});
    const Eigen::VectorXd row = q.gp.inputs().row(3).transpose();
    const State s = State::from_vec(row.head<kStateDim>());
    const Action a = Action::from_vec(row.tail<kActionDim>());
    const GaussianState g = random_belief(rng, 0.01);

    const q::Update u = q::q_update(q, s, a, g, cands);
    CHECK(u.overwrote);
    CHECK(u.model.gp.size() == 10);
    CHECK(u.model.gp.targets()[3] == doctest::Approx(u.target - q.prior_mean));
    CHECK(u.target == doctest::Approx(q::bellman_target(q, g, cands)));

    const q::Update v = q::q_update(q, random_state(rng), random_action(rng), g, cands);
    CHECK_FALSE(v.overwrote);
    CHECK(v.model.gp.size() == 11);
}

TEST_CASE("init_q targets are the immediate predicted costs") {
    std::mt19937_64 rng(109);
    const auto data = synthetic_transitions(rng, 40);
    const fm::ForwardModel m = fixed_forward_model(data);
    std::vector<std::pair<State, Action>> pairs;
    for (const auto& t : data) pairs.emplace_back(t.s, t.a);
    gp::FitOptions fit;
    fit.restarts = 1;
    const CostSpec c = CostSpec::position_only();
    const q::QModel zero = q::init_q(m, pairs, c, 0.2, fit, nullptr, q::QPriorMean::Zero);
    CHECK(zero.prior_mean == 0.0);
    CHECK(zero.gp.size() == 40);
    CHECK(zero.gp.targets()[7] == doctest::Approx(q::expected_cost(m.predict(pairs[7].first, pairs[7].second), c)));

    const q::QModel centred = q::init_q(m, pairs, c, 0.2, fit, nullptr, q::QPriorMean::DataMean);
    CHECK(std::abs(centred.gp.targets().mean()) < 1e-12);
    CHECK(centred.prior_mean == doctest::Approx(zero.gp.targets().mean()));

    pairs.resize(5);
    CHECK_THROWS_AS(q::init_q(m, pairs, c, 0.2, fit), ContractViolation);
}

TEST_CASE("GP Q-learning reaches the value-iteration fixed point on a two-state chain") {
    const auto values = two_state_chain();
    REQUIRE(values.size() == 4);
    for (const ChainValue& v : values)
        CHECK_MESSAGE(std::abs(v.learned - v.exact) <= 0.05 * v.exact,
                      "state " << v.state << " action " << v.action << ": " << v.learned << " vs " << v.exact);
}

TEST_CASE("episodes are deterministic given the seed") {
    std::mt19937_64 rng(113);
    const auto data = synthetic_transitions(rng, 40);
    const fm::ForwardModel m = fixed_forward_model(data);
    q::QModel q = random_q(rng, 20);
    q.cost = CostSpec::position_only();
    q::EpisodeConfig cfg;
    cfg.steps = 8;
    const State s0 = data[0].s;
    const q::EpisodeResult a = q::run_episode(q, m, s0, cfg, 42);
    const q::EpisodeResult b = q::run_episode(q, m, s0, cfg, 42);
    REQUIRE(a.steps.size() == 8);
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK(a.steps[k].a == b.steps[k].a);
        CHECK(a.steps[k].target == b.steps[k].target);
        CHECK(cfg.bounds.contains_closed(a.steps[k].a));
    }
    CHECK(a.q.gp.targets() == b.q.gp.targets());
}

TEST_CASE("train_iteration draws episode starts from the given pool") {
    std::mt19937_64 rng(127);
    const auto data = synthetic_transitions(rng, 30);
    const fm::ForwardModel m = fixed_forward_model(data);
    q::QModel q = random_q(rng, 20);
    q.cost = CostSpec::position_only();
    q::IterationConfig cfg;
    cfg.episodes = 6;
    cfg.episode.steps = 1;
    cfg.q_fit.restarts = 1;
    cfg.q_fit.max_iters = 5;
    for (int k = 0; k < 3; ++k) cfg.starts.push_back(random_state(rng));
    const q::IterationResult r = q::train_iteration(q, m, {}, cfg);
    REQUIRE(r.trace.size() == 6);
    for (const q::EpisodeStep& st : r.trace)
        CHECK(std::find(cfg.starts.begin(), cfg.starts.end(), st.s) != cfg.starts.end());
    CHECK(r.fm.size() == m.size()); // no transitions, forward model untouched
}
