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

#include "coplank/checkpoint.hpp"
#include "coplank/errors.hpp"
#include "coplank/experiment.hpp"
#include "coplank/report.hpp"
#include "coplank/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace coplank;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("coplank_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

exp::ExperimentConfig tiny_config() {
    exp::ExperimentConfig cfg;
    cfg.bootstrap_samples = 30;
    cfg.bootstrap_segment = 10;
    cfg.iterations = 1;
    cfg.episodes = 2;
    cfg.steps = 3;
    cfg.collect_steps = 5;
    cfg.eval_trials = 2;
    cfg.eval_steps = 8;
    cfg.fm_restarts = 1;
    cfg.q_restarts = 1;
    cfg.q_fit_points = 40;
    cfg.optimizer_restarts = 2;
    cfg.optimizer_iters = 20;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("bootstrap collects exactly the configured transitions, in bounds and reproducibly") {
    exp::ExperimentConfig cfg;
    cfg.seed = 8;
    const auto a = exp::bootstrap(cfg);
    const auto b = exp::bootstrap(cfg);
    REQUIRE(a.size() == 150);
    for (const Transition& t : a) {
        CHECK(cfg.bounds.contains_closed(t.a));
        CHECK(t.s_next.tau >= 0.0);
        CHECK(t.s_next.d >= 0.0);
        CHECK(t.s_next.d <= 1.0);
    }
    const fs::path dir = scratch_dir("bootstrap");
    exp::write_transitions_csv(dir / "a.csv", a);
    exp::write_transitions_csv(dir / "b.csv", b);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

    cfg.seed = 9;
    CHECK_FALSE(exp::bootstrap(cfg)[5].s == a[5].s);

    const auto back = exp::read_transitions_csv(dir / "a.csv");
    REQUIRE(back.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(back[i].s == a[i].s);
        CHECK(back[i].a == a[i].a);
        CHECK(back[i].s_next == a[i].s_next);
    }
}

TEST_CASE("overshoot") {
    CHECK(exp::overshoot({0.2, 0.5, 0.85, 0.9, 0.82, 0.8}, 0.8) == doctest::Approx(0.1));
    CHECK(exp::overshoot({0.2, 0.4, 0.6, 0.7}, 0.8) == 0.0);
    CHECK(exp::overshoot({0.8, 0.6, 0.25, 0.3}, 0.3) == doctest::Approx(0.05));
    // Excursions before the first crossing do not count.
    CHECK(exp::overshoot({0.2, 0.1, 0.0, 0.5, 0.81}, 0.8) == doctest::Approx(0.01));
    CHECK(exp::overshoot({}, 0.5) == 0.0);
}

TEST_CASE("settling time") {
    std::vector<double> t, d;
    for (int i = 0; i <= 60; ++i) {
        t.push_back(0.25 * i);
        d.push_back(i < 10 ? 0.2 + 0.06 * i : 0.8 + (i == 20 ? 0.15 : 0.0));
    }
    // Inside from t = 2.25 but leaves the band at t = 5.0; settles from 5.25.
    CHECK(exp::settling_time(t, d, 0.8) == doctest::Approx(5.25));
    d[20] = 0.8;
    CHECK(exp::settling_time(t, d, 0.8) == doctest::Approx(2.25));
    CHECK(exp::settling_time(t, d, 0.8, 0.1, 20.0) == std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(exp::settling_time(t, {0.1}, 0.8), ContractViolation);
}

TEST_CASE("cost presets") {
    CHECK(exp::make_cost(exp::CostPreset::PositionOnly).weights[kTau] == 0.0);
    CHECK(exp::make_cost(exp::CostPreset::WithForce).weights[kTau] == 0.01);
    CHECK(exp::cost_preset_from_string(exp::to_string(exp::CostPreset::WithForce)) == exp::CostPreset::WithForce);
    CHECK_THROWS_AS(exp::cost_preset_from_string("gentle"), ConfigError);
}

TEST_CASE("config JSON round trip and validation") {
    exp::ExperimentConfig cfg = tiny_config();
    cfg.preset = exp::CostPreset::WithForce;
    cfg.gamma = 0.3;
    cfg.scenario.human.kind = sim::HumanKind::Resistive;
    cfg.bounds.xi = ActionVector(0.05, 0.1, 0.3);
    cfg.q_seed_actions = 2;
    cfg.episode_starts_all = !cfg.episode_starts_all;
    const exp::ExperimentConfig back = exp::config_from_json(exp::config_to_json(cfg));
    CHECK(exp::config_to_json(back) == exp::config_to_json(cfg));
    CHECK(back.gamma == 0.3);
    CHECK(back.scenario.human.kind == sim::HumanKind::Resistive);
    CHECK(back.bounds.xi == cfg.bounds.xi);
    CHECK(back.q_seed_actions == 2);
    CHECK(back.episode_starts_all == cfg.episode_starts_all);

    CHECK_THROWS_AS(exp::config_from_json("{\"gamma\": 1.5}"), ConfigError);
    CHECK_THROWS_AS(exp::config_from_json("{\"gama\": 0.5}"), ConfigError);
    CHECK_THROWS_AS(exp::config_from_json("not json"), ConfigError);
    exp::ExperimentConfig bad;
    bad.bootstrap_samples = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("scenario round trip and errors") {
    Scenario s;
    s.name = "narrow";
    s.physics.plank_length = 0.8;
    s.human.kind = sim::HumanKind::Compliant;
    s.sensor.d_noise = 0.02;
    s.start.goal = 0.3;
    s.seed = 77;
    const Scenario back = parse_scenario(scenario_to_json(s));
    CHECK(scenario_to_json(back) == scenario_to_json(s));
    CHECK(back.physics.plank_length == 0.8);
    CHECK(back.human.kind == sim::HumanKind::Compliant);

    CHECK(parse_scenario("{}").name == "default");
    CHECK_THROWS_AS(parse_scenario("{\"physics\": {\"plank_lenght\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("{\"physics\": {\"gravity\": -1}}"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
    std::mt19937_64 rng(401);
    const auto data = testing::synthetic_transitions(rng, 30);
    Checkpoint c;
    c.forward = testing::fixed_forward_model(data);
    std::vector<std::pair<State, Action>> pairs;
    for (const auto& t : data) pairs.emplace_back(t.s, t.a);
    gp::FitOptions fit;
    fit.restarts = 1;
    c.q = q::init_q(c.forward, pairs, CostSpec::with_force(), 0.2, fit, nullptr, q::QPriorMean::DataMean);
    c.bounds.xi = ActionVector(0.1, 0.05, 0.2);

    const fs::path dir = scratch_dir("checkpoint");
    save_checkpoint(c, dir / "ck.txt");
    const Checkpoint back = load_checkpoint(dir / "ck.txt");
    CHECK(back.bounds.xi == c.bounds.xi);
    CHECK(back.q.gamma == c.q.gamma);
    CHECK(back.q.prior_mean == c.q.prior_mean);
    CHECK(back.q.cost.weights == c.q.cost.weights);
    const State s = testing::random_state(rng);
    const Action a = testing::random_action(rng);
    CHECK(back.q.predict(s, a).mean == c.q.predict(s, a).mean);
    CHECK(back.forward.predict(s, a).mean == c.forward.predict(s, a).mean);

    std::string text = slurp(dir / "ck.txt");
    {
        std::ofstream out(dir / "trunc.txt");
        out << text.substr(0, text.size() / 3);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "trunc.txt"), LoadError);
    {
        std::ofstream out(dir / "garbage.txt");
        out << "coplank_checkpoint 999\n";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "garbage.txt"), LoadError);
    const auto pos = text.find("signal_std");
    REQUIRE(pos != std::string::npos);
    text.replace(pos + 11, 3, "abc");
    {
        std::ofstream out(dir / "bad_number.txt");
        out << text;
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "bad_number.txt"), LoadError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.txt"), LoadError);
}

TEST_CASE("a tiny end-to-end run is reproducible and reportable") {
    exp::ExperimentConfig cfg = tiny_config();
    cfg.output_dir = scratch_dir("run_a");
    const exp::RunResult a = exp::run(cfg);
    exp::write_run_artifacts(cfg, a);
    REQUIRE(a.summaries.size() == 2);
    REQUIRE(a.agents.size() == 2);
    CHECK(a.transitions.size() == 35);
    CHECK(a.summaries[0].trials.size() == 2);
    CHECK(a.summaries[0].trials[0].rows.size() == 8);
    // Paired evaluation: iteration 0 and 1 share partner seeds.
    CHECK(exp::eval_seed(cfg, 1) != exp::eval_seed(cfg, 0));

    exp::ExperimentConfig again = cfg;
    again.output_dir = scratch_dir("run_b");
    exp::write_run_artifacts(again, exp::run(again));
    for (const char* f : {"transitions.csv", "eval_steps.csv", "iterations.csv", "relevance.csv", "heldout.csv",
                          "checkpoint.txt"})
        CHECK_MESSAGE(slurp(cfg.output_dir / f) == slurp(again.output_dir / f), f);

    const fs::path out = scratch_dir("report");
    const report::Summary s = report::report(cfg.output_dir, out);
    for (const char* f : report::kReportFiles) CHECK(fs::is_regular_file(out / f));
    CHECK(s.iterations.size() == 2);
    CHECK(s.theta_ranking.size() == kInputDim);
    for (double c : s.calibration) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }

    // Step response rows are a quarter second apart within a trial.
    const report::CsvTable step = report::read_csv(out / "step_response.csv", "step_response");
    REQUIRE(step.rows.size() == 2 * 2 * 8);
    for (std::size_t r = 1; r < 8; ++r)
        CHECK(step.number(r, "t") - step.number(r - 1, "t") == doctest::Approx(0.25));
    CHECK(step.number(0, "goal") == doctest::Approx(cfg.eval_goal));

    const report::CsvTable rel = report::read_csv(out / "relevance_normalized.csv", "relevance_normalized");
    for (std::size_t r = 0; r < rel.rows.size(); ++r) {
        double peak = 0.0;
        for (auto n : kInputNames) peak = std::max(peak, rel.number(r, std::string(n)));
        CHECK(peak == doctest::Approx(1.0));
    }
    CHECK_FALSE(report::format_summary(s).empty());
}

TEST_CASE("report on an incomplete run directory names every expected file") {
    const fs::path empty = scratch_dir("empty_run");
    try {
        report::report(empty, scratch_dir("empty_out"));
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        for (const char* f : report::kRunFiles) CHECK(msg.find(f) != std::string::npos);
    }
}

TEST_CASE("versioned CSV reader rejects foreign and ragged files") {
    const fs::path dir = scratch_dir("csv");
    {
        std::ofstream out(dir / "wrong_version.csv");
        out << "# coplank heldout v7\nstep,dim\n1,2\n";
    }
    CHECK_THROWS_AS(report::read_csv(dir / "wrong_version.csv", "heldout"), LoadError);
    {
        std::ofstream out(dir / "ragged.csv");
        out << "# coplank heldout v1\nstep,dim\n1,2,3\n";
    }
    CHECK_THROWS_AS(report::read_csv(dir / "ragged.csv", "heldout"), LoadError);
    {
        std::ofstream out(dir / "kind.csv");
        out << "# coplank frames v1\nstep,dim\n1,2\n";
    }
    CHECK_THROWS_AS(report::read_csv(dir / "kind.csv", "heldout"), LoadError);
    CHECK_THROWS_AS(exp::read_transitions_csv(dir / "kind.csv"), LoadError);
}
