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

#include "coplank/experiment.hpp"

#include "coplank/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace coplank::exp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// splitmix64 finalizer; derives independent stream seeds from (seed, tag, index).
std::uint64_t mix(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0)
{
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + tag * 0xBF58476D1CE4E5B9ULL + index + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum Stream : std::uint64_t {
    kBootstrapEnv = 1,
    kBootstrapPolicy,
    kCollectEnv,
    kCollectStarts,
    kPolicy,
    kEvalEnv,
    kEvalPolicy,
    kFmFit,
    kQFit,
    kEpisodes,
    kHeldOut,
};

std::string num(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string exact(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

void header(std::ostream& out, const char* kind)
{
    out << "# coplank " << kind << " v" << kCsvSchemaVersion << '\n';
}

Action smoothed_random(const Action& prev, double smoothing, const ActionBounds& bounds,
                       std::mt19937_64& rng)
{
    ActionVector v;
    for (int j = 0; j < kActionDim; ++j) {
        std::uniform_real_distribution<double> u(-bounds.xi[j], bounds.xi[j]);
        v[j] = smoothing * prev.vec()[j] + (1.0 - smoothing) * u(rng);
    }
    return Action::from_vec(v);
}

sim::StartConfig random_start(std::mt19937_64& rng, double theta = 0.0)
{
    std::uniform_real_distribution<double> pos(0.1, 0.9);
    sim::StartConfig start;
    start.d = pos(rng);
    do {
        start.goal = pos(rng);
    } while (std::abs(start.goal - start.d) < 0.2);
    start.theta = theta;
    return start;
}

double mean_of(const std::vector<TrialResult>& trials, double TrialResult::*field)
{
    if (trials.empty()) return 0.0;
    double s = 0.0;
    for (const TrialResult& t : trials) s += t.*field;
    return s / static_cast<double>(trials.size());
}

} // namespace

std::string to_string(CostPreset p)
{
    return p == CostPreset::WithForce ? "with-force" : "position-only";
}

CostPreset cost_preset_from_string(const std::string& s)
{
    if (s == "position-only") return CostPreset::PositionOnly;
    if (s == "with-force") return CostPreset::WithForce;
    throw ConfigError("unknown cost preset '" + s + "' (expected position-only or with-force)");
}

CostSpec make_cost(CostPreset p)
{
    return p == CostPreset::WithForce ? CostSpec::with_force() : CostSpec::position_only();
}

void ExperimentConfig::validate() const
{
    scenario.validate();
    try {
        bounds.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!std::isfinite(delta)) throw ConfigError("delta must be finite");
    if (bootstrap_samples < 10) throw ConfigError("bootstrap_samples must be at least 10");
    if (bootstrap_segment < 1) throw ConfigError("bootstrap_segment must be positive");
    if (!(bootstrap_smoothing >= 0.0 && bootstrap_smoothing < 1.0))
        throw ConfigError("bootstrap_smoothing must lie in [0, 1)");
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (episodes < 0) throw ConfigError("episodes must be non-negative");
    if (steps < 1) throw ConfigError("steps must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (collect_steps < 1) throw ConfigError("collect_steps must be positive");
    if (eval_trials < 0) throw ConfigError("eval_trials must be non-negative");
    if (eval_steps < 1) throw ConfigError("eval_steps must be positive");
    if (!(eval_start >= 0.0 && eval_start <= 1.0 && eval_goal >= 0.0 && eval_goal <= 1.0))
        throw ConfigError("eval_start and eval_goal must lie in [0, 1]");
    if (fm_restarts < 1 || q_restarts < 1 || optimizer_restarts < 1)
        throw ConfigError("restart counts must be positive");
    if (q_fit_points < 0) throw ConfigError("q_fit_points must be non-negative");
    if (!(q_noise_floor > 0.0)) throw ConfigError("q_noise_floor must be positive");
    if (q_seed_actions < 0) throw ConfigError("q_seed_actions must be non-negative");
    if (optimizer_iters < 0) throw ConfigError("optimizer_iters must be non-negative");
}

PolicyOutput greedy_action(const q::QModel& q, const State& s, const ExperimentConfig& cfg,
                           std::uint64_t seed)
{
    opt::UcbConfig u;
    u.delta = cfg.delta;
    u.restarts = cfg.optimizer_restarts;
    u.max_iters = cfg.optimizer_iters;
    u.seed = seed;
    PolicyOutput out;
    try {
        const opt::OptimizeResult r = opt::optimize_action(q, s, u, cfg.bounds);
        out.action = r.action;
        out.ucb = r.value;
    } catch (const OptimizationFailed&) {
        out.degraded = true;
        out.ucb = opt::q_ucb(q, s, Action{}, cfg.delta);
    }
    return out;
}

std::vector<Transition> bootstrap(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Scenario& sc = cfg.scenario;
    sim::PlankEnv env(sc.physics, sc.sensor, sc.human, mix(cfg.seed, kBootstrapEnv));
    std::mt19937_64 rng(mix(cfg.seed, kBootstrapPolicy));

    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(cfg.bootstrap_samples));
    Action a;
    State s;
    for (int i = 0; i < cfg.bootstrap_samples; ++i) {
        if (i % cfg.bootstrap_segment == 0) {
            s = env.reset(i == 0 ? sc.start : random_start(rng));
            a = Action{};
        }
        a = smoothed_random(a, cfg.bootstrap_smoothing, cfg.bounds, rng);
        const State next = env.step(a);
        out.push_back({s, a, next});
        s = next;
    }
    return out;
}

Agent initialize(const ExperimentConfig& cfg, const std::vector<Transition>& data)
{
    fm::TrainOptions to;
    to.fit.restarts = cfg.fm_restarts;
    to.fit.seed = mix(cfg.seed, kFmFit);
    Agent agent;
    agent.forward = fm::train(data, to);

    std::vector<std::pair<State, Action>> pairs;
    const auto extra = static_cast<std::size_t>(cfg.q_seed_actions);
    pairs.reserve(data.size() * (1 + extra));
    const std::vector<Action> cand = q::halton_candidates(cfg.bounds);
    for (std::size_t i = 0; i < data.size(); ++i) {
        pairs.emplace_back(data[i].s, data[i].a);
        for (std::size_t k = 0; k < extra; ++k) pairs.emplace_back(data[i].s, cand[(i * extra + k) % cand.size()]);
    }
    gp::FitOptions qf;
    qf.restarts = cfg.q_restarts;
    qf.seed = mix(cfg.seed, kQFit);
    qf.max_fit_points = cfg.q_fit_points;
    qf.log_noise_min = std::log(cfg.q_noise_floor);
    agent.q = q::init_q(agent.forward, pairs, make_cost(cfg.preset), cfg.gamma, qf, nullptr, cfg.q_prior);
    return agent;
}

std::vector<Transition> collect(const Agent& agent, const ExperimentConfig& cfg, int iteration)
{
    const Scenario& sc = cfg.scenario;
    const auto it = static_cast<std::uint64_t>(iteration);
    sim::PlankEnv env(sc.physics, sc.sensor, sc.human, mix(cfg.seed, kCollectEnv, it));
    std::mt19937_64 rng(mix(cfg.seed, kCollectStarts, it));
    State s = env.reset(random_start(rng));
    std::vector<Transition> out;
    for (int k = 0; k < cfg.collect_steps; ++k) {
        const PolicyOutput p = greedy_action(agent.q, s, cfg, mix(cfg.seed, kPolicy, it * 100000 + k));
        const State next = env.step(p.action);
        out.push_back({s, p.action, next});
        s = next;
    }
    return out;
}

std::uint64_t eval_seed(const ExperimentConfig& cfg, int trial)
{
    return mix(cfg.seed, kEvalEnv, static_cast<std::uint64_t>(trial));
}

double overshoot(const std::vector<double>& d, double goal)
{
    if (d.empty()) return 0.0;
    const double dir = goal >= d.front() ? 1.0 : -1.0;
    bool crossed = false;
    double worst = 0.0;
    for (double v : d) {
        const double past = dir * (v - goal);
        if (past >= 0.0) crossed = true;
        if (crossed) worst = std::max(worst, past);
    }
    return worst;
}

double settling_time(const std::vector<double>& t, const std::vector<double>& d, double goal,
                     double band, double hold)
{
    if (t.size() != d.size()) throw ContractViolation("settling_time: t and d differ in length");
    const std::size_t n = t.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (t[n - 1] - t[i] < hold - 1e-9) break;
        bool ok = true;
        for (std::size_t j = i; j < n && t[j] <= t[i] + hold + 1e-9; ++j) {
            if (!(std::abs(d[j] - goal) < band)) {
                ok = false;
                break;
            }
        }
        if (ok) return t[i];
    }
    return kInf;
}

TrialResult evaluate_trial(const Agent& agent, const ExperimentConfig& cfg, std::uint64_t env_seed)
{
    const Scenario& sc = cfg.scenario;
    sim::PlankEnv env(sc.physics, sc.sensor, sc.human, env_seed);
    sim::StartConfig start;
    start.d = cfg.eval_start;
    start.goal = cfg.eval_goal;
    State s = env.reset(start);
    const CostSpec cost_spec = make_cost(cfg.preset);

    TrialResult out;
    std::vector<double> ts;
    std::vector<double> ds;
    double tau_sum = 0.0;
    double cost_sum = 0.0;
    for (int k = 0; k < cfg.eval_steps; ++k) {
        const PolicyOutput p = greedy_action(agent.q, s, cfg, mix(env_seed, kEvalPolicy, static_cast<std::uint64_t>(k)));
        const gp::Prediction qp = agent.q.predict(s, p.action);
        EvalRow row;
        row.t = k * sc.physics.control_period;
        row.s = s;
        row.d_true = env.world().d;
        row.a = p.action;
        row.cost = cost(s, cost_spec);
        row.q_mean = qp.mean;
        row.q_std = std::sqrt(qp.variance);
        row.ucb = p.ucb;
        out.rows.push_back(row);
        ts.push_back(row.t);
        ds.push_back(row.d_true);
        tau_sum += s.tau;
        cost_sum += row.cost;
        s = env.step(p.action);
    }
    out.overshoot = overshoot(ds, cfg.eval_goal);
    out.settling_time = settling_time(ts, ds, cfg.eval_goal);
    out.tau_mean = tau_sum / cfg.eval_steps;
    out.cost_mean = cost_sum / cfg.eval_steps;
    return out;
}

double IterationSummary::overshoot_mean() const { return mean_of(trials, &TrialResult::overshoot); }
double IterationSummary::settling_mean() const { return mean_of(trials, &TrialResult::settling_time); }
double IterationSummary::tau_mean() const { return mean_of(trials, &TrialResult::tau_mean); }
double IterationSummary::cost_mean() const { return mean_of(trials, &TrialResult::cost_mean); }

RunResult run(const ExperimentConfig& cfg, const std::vector<Transition>& data, const Progress& progress)
{
    cfg.validate();
    const auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    RunResult out;
    out.transitions = data.empty() ? bootstrap(cfg) : data;
    out.transition_iteration.assign(out.transitions.size(), -1);
    say("bootstrap: " + std::to_string(out.transitions.size()) + " transitions");

    Agent agent = initialize(cfg, out.transitions);
    say("initialized forward model and Q model");

    const auto evaluate = [&](int iteration, const Agent& a) {
        IterationSummary sum;
        sum.iteration = iteration;
        for (int k = 0; k < cfg.eval_trials; ++k) sum.trials.push_back(evaluate_trial(a, cfg, eval_seed(cfg, k)));
        sum.q_points = a.q.gp.size();
        sum.fm_points = a.forward.size();
        say("iteration " + std::to_string(iteration) + ": overshoot " + num(sum.overshoot_mean()) +
            ", settling " + num(sum.settling_mean()) + " s, tau " + num(sum.tau_mean()));
        out.summaries.push_back(std::move(sum));
    };

    out.agents.push_back(agent);
    evaluate(0, agent);

    for (int it = 1; it <= cfg.iterations; ++it) {
        const std::vector<Transition> fresh = collect(agent, cfg, it);
        out.transitions.insert(out.transitions.end(), fresh.begin(), fresh.end());
        out.transition_iteration.insert(out.transition_iteration.end(), fresh.size(), it);

        q::IterationConfig ic;
        ic.episodes = cfg.episodes;
        ic.episode.epsilon = cfg.epsilon;
        ic.episode.steps = cfg.steps;
        ic.episode.bounds = cfg.bounds;
        ic.fm_fit.restarts = cfg.fm_restarts;
        ic.fm_fit.seed = mix(cfg.seed, kFmFit, static_cast<std::uint64_t>(it));
        ic.q_fit.restarts = cfg.q_restarts;
        ic.q_fit.seed = mix(cfg.seed, kQFit, static_cast<std::uint64_t>(it));
        ic.q_fit.max_fit_points = cfg.q_fit_points;
        ic.q_fit.log_noise_min = std::log(cfg.q_noise_floor);
        ic.seed = mix(cfg.seed, kEpisodes, static_cast<std::uint64_t>(it));
        if (cfg.episode_starts_all)
            for (const Transition& t : out.transitions) ic.starts.push_back(t.s);
        q::IterationResult r = q::train_iteration(agent.q, agent.forward, fresh, ic);
        agent.q = std::move(r.q);
        agent.forward = std::move(r.fm);
        out.agents.push_back(agent);
        evaluate(it, agent);
    }
    return out;
}

std::vector<HeldOutRow> held_out_predictions(const fm::ForwardModel& model, const ExperimentConfig& cfg,
                                             int steps, std::uint64_t seed)
{
    const Scenario& sc = cfg.scenario;
    sim::PlankEnv env(sc.physics, sc.sensor, sc.human, mix(seed, kHeldOut));
    std::mt19937_64 rng(mix(seed, kHeldOut, 1));
    State s = env.reset(random_start(rng));
    Action a;
    std::vector<HeldOutRow> rows;
    for (int k = 0; k < steps; ++k) {
        a = smoothed_random(a, cfg.bootstrap_smoothing, cfg.bounds, rng);
        const GaussianState g = model.predict(s, a, true);
        const State next = env.step(a);
        const StateVector actual = next.vec();
        for (int i = 0; i < kStateDim; ++i)
            rows.push_back({k, i, actual[i], g.mean[i], std::sqrt(std::max(0.0, g.var[i]))});
        s = next;
    }
    return rows;
}

// ------------------------------------------------------------------ artifacts

void write_transitions_csv(const std::filesystem::path& path, const std::vector<Transition>& data,
                           const std::vector<int>& iteration)
{
    if (!iteration.empty() && iteration.size() != data.size())
        throw ContractViolation("write_transitions_csv: iteration tags do not match the data");
    std::ofstream out = open_out(path);
    header(out, "transitions");
    out << "iteration";
    for (auto n : kStateNames) out << ",s_" << n;
    for (auto n : kActionNames) out << ",a_" << n;
    for (auto n : kStateNames) out << ",next_" << n;
    out << '\n';
    for (std::size_t r = 0; r < data.size(); ++r) {
        out << (iteration.empty() ? -1 : iteration[r]);
        const StateVector s = data[r].s.vec();
        const ActionVector a = data[r].a.vec();
        const StateVector n = data[r].s_next.vec();
        for (int i = 0; i < kStateDim; ++i) out << ',' << exact(s[i]);
        for (int i = 0; i < kActionDim; ++i) out << ',' << exact(a[i]);
        for (int i = 0; i < kStateDim; ++i) out << ',' << exact(n[i]);
        out << '\n';
    }
    finish(out, path);
}

std::vector<Transition> read_transitions_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open transitions file " + path.string());
    std::string line;
    const std::string expected_header = "# coplank transitions v" + std::to_string(kCsvSchemaVersion);
    if (!std::getline(in, line) || line != expected_header)
        throw LoadError(path.string() + ": expected header '" + expected_header + "'");
    if (!std::getline(in, line)) throw LoadError(path.string() + ": missing column row");
    std::vector<Transition> out;
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw LoadError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (v.size() != static_cast<std::size_t>(1 + 2 * kStateDim + kActionDim))
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(1 + 2 * kStateDim + kActionDim) + " columns");
        Transition t;
        t.s = State::from_vec(Eigen::Map<const StateVector>(v.data() + 1));
        t.a = Action::from_vec(Eigen::Map<const ActionVector>(v.data() + 1 + kStateDim));
        t.s_next = State::from_vec(Eigen::Map<const StateVector>(v.data() + 1 + kStateDim + kActionDim));
        out.push_back(t);
    }
    return out;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<IterationSummary>& summaries)
{
    std::ofstream out = open_out(path);
    header(out, "eval_steps");
    out << "iteration,trial,step,t";
    for (auto n : kStateNames) out << ',' << n;
    out << ",d_true";
    for (auto n : kActionNames) out << ',' << n;
    out << ",cost,tau,q_mean,q_std,ucb\n";
    for (const IterationSummary& sum : summaries) {
        for (std::size_t k = 0; k < sum.trials.size(); ++k) {
            const auto& rows = sum.trials[k].rows;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const EvalRow& r = rows[i];
                out << sum.iteration << ',' << k << ',' << i << ',' << num(r.t);
                const StateVector s = r.s.vec();
                for (int j = 0; j < kStateDim; ++j) out << ',' << num(s[j]);
                out << ',' << num(r.d_true);
                const ActionVector a = r.a.vec();
                for (int j = 0; j < kActionDim; ++j) out << ',' << num(a[j]);
                out << ',' << num(r.cost) << ',' << num(r.s.tau) << ',' << num(r.q_mean) << ','
                    << num(r.q_std) << ',' << num(r.ucb) << '\n';
            }
        }
    }
    finish(out, path);
}

void write_iterations_csv(const std::filesystem::path& path, const std::vector<IterationSummary>& summaries)
{
    std::ofstream out = open_out(path);
    header(out, "iterations");
    out << "iteration,trials,overshoot_mean,settling_mean,tau_mean,cost_mean,q_points,fm_points\n";
    for (const IterationSummary& s : summaries) {
        out << s.iteration << ',' << s.trials.size() << ',' << num(s.overshoot_mean()) << ','
            << num(s.settling_mean()) << ',' << num(s.tau_mean()) << ',' << num(s.cost_mean()) << ','
            << s.q_points << ',' << s.fm_points << '\n';
    }
    finish(out, path);
}

void write_relevance_csv(const std::filesystem::path& path, const fm::RelevanceTable& table)
{
    std::ofstream out = open_out(path);
    header(out, "relevance");
    out << "output";
    for (auto n : kInputNames) out << ',' << n;
    out << '\n';
    for (int i = 0; i < kStateDim; ++i) {
        out << "delta_" << kStateNames[static_cast<std::size_t>(i)];
        for (int j = 0; j < kInputDim; ++j) out << ',' << num(table(i, j));
        out << '\n';
    }
    finish(out, path);
}

void write_heldout_csv(const std::filesystem::path& path, const std::vector<HeldOutRow>& rows)
{
    std::ofstream out = open_out(path);
    header(out, "heldout");
    out << "step,dim,name,actual,mean,std\n";
    for (const HeldOutRow& r : rows) {
        out << r.step << ',' << r.dim << ',' << kStateNames[static_cast<std::size_t>(r.dim)] << ','
            << num(r.actual) << ',' << num(r.mean) << ',' << num(r.std) << '\n';
    }
    finish(out, path);
}

void write_run_artifacts(const ExperimentConfig& cfg, const RunResult& result)
{
    if (cfg.output_dir.empty()) throw ConfigError("no output directory configured");
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    if (result.agents.empty()) throw ContractViolation("write_run_artifacts: run produced no agent");

    const auto& dir = cfg.output_dir;
    const Agent& last = result.agents.back();
    write_transitions_csv(dir / "transitions.csv", result.transitions, result.transition_iteration);
    write_eval_csv(dir / "eval_steps.csv", result.summaries);
    write_iterations_csv(dir / "iterations.csv", result.summaries);
    write_relevance_csv(dir / "relevance.csv", fm::relevance(last.forward));
    write_heldout_csv(dir / "heldout.csv", held_out_predictions(last.forward, cfg, 80, cfg.seed));
    {
        std::ofstream out = open_out(dir / "config.json");
        out << config_to_json(cfg);
        finish(out, dir / "config.json");
    }
    save_checkpoint({last.forward, last.q, cfg.bounds}, dir / "checkpoint.txt");
}

// ----------------------------------------------------------------------- json

std::string config_to_json(const ExperimentConfig& cfg)
{
    nlohmann::json j;
    j["version"] = kCsvSchemaVersion;
    j["scenario"] = nlohmann::json::parse(scenario_to_json(cfg.scenario));
    j["preset"] = to_string(cfg.preset);
    j["gamma"] = cfg.gamma;
    j["delta"] = cfg.delta;
    j["bounds"] = {cfg.bounds.xi[0], cfg.bounds.xi[1], cfg.bounds.xi[2]};
    j["bootstrap_samples"] = cfg.bootstrap_samples;
    j["bootstrap_segment"] = cfg.bootstrap_segment;
    j["bootstrap_smoothing"] = cfg.bootstrap_smoothing;
    j["iterations"] = cfg.iterations;
    j["episodes"] = cfg.episodes;
    j["steps"] = cfg.steps;
    j["epsilon"] = cfg.epsilon;
    j["collect_steps"] = cfg.collect_steps;
    j["eval_trials"] = cfg.eval_trials;
    j["eval_steps"] = cfg.eval_steps;
    j["eval_start"] = cfg.eval_start;
    j["eval_goal"] = cfg.eval_goal;
    j["fm_restarts"] = cfg.fm_restarts;
    j["q_restarts"] = cfg.q_restarts;
    j["q_fit_points"] = cfg.q_fit_points;
    j["q_noise_floor"] = cfg.q_noise_floor;
    j["q_prior"] = cfg.q_prior == q::QPriorMean::DataMean ? "data-mean" : "zero";
    j["q_seed_actions"] = cfg.q_seed_actions;
    j["episode_starts_all"] = cfg.episode_starts_all;
    j["optimizer_restarts"] = cfg.optimizer_restarts;
    j["optimizer_iters"] = cfg.optimizer_iters;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    ExperimentConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "version") {
                if (value.get<int>() != kCsvSchemaVersion)
                    throw ConfigError("config: unsupported version " + value.dump());
            } else if (key == "scenario") {
                cfg.scenario = parse_scenario(value.dump());
            } else if (key == "preset") {
                cfg.preset = cost_preset_from_string(value.get<std::string>());
            } else if (key == "gamma") {
                cfg.gamma = value.get<double>();
            } else if (key == "delta") {
                cfg.delta = value.get<double>();
            } else if (key == "bounds") {
                const auto xi = value.get<std::vector<double>>();
                if (xi.size() != kActionDim) throw ConfigError("config: bounds needs 3 values");
                cfg.bounds.xi = ActionVector(xi[0], xi[1], xi[2]);
            } else if (key == "bootstrap_samples") {
                cfg.bootstrap_samples = value.get<int>();
            } else if (key == "bootstrap_segment") {
                cfg.bootstrap_segment = value.get<int>();
            } else if (key == "bootstrap_smoothing") {
                cfg.bootstrap_smoothing = value.get<double>();
            } else if (key == "iterations") {
                cfg.iterations = value.get<int>();
            } else if (key == "episodes") {
                cfg.episodes = value.get<int>();
            } else if (key == "steps") {
                cfg.steps = value.get<int>();
            } else if (key == "epsilon") {
                cfg.epsilon = value.get<double>();
            } else if (key == "collect_steps") {
                cfg.collect_steps = value.get<int>();
            } else if (key == "eval_trials") {
                cfg.eval_trials = value.get<int>();
            } else if (key == "eval_steps") {
                cfg.eval_steps = value.get<int>();
            } else if (key == "eval_start") {
                cfg.eval_start = value.get<double>();
            } else if (key == "eval_goal") {
                cfg.eval_goal = value.get<double>();
            } else if (key == "fm_restarts") {
                cfg.fm_restarts = value.get<int>();
            } else if (key == "q_restarts") {
                cfg.q_restarts = value.get<int>();
            } else if (key == "q_fit_points") {
                cfg.q_fit_points = value.get<int>();
            } else if (key == "q_noise_floor") {
                cfg.q_noise_floor = value.get<double>();
            } else if (key == "q_prior") {
                const auto v = value.get<std::string>();
                if (v == "zero") cfg.q_prior = q::QPriorMean::Zero;
                else if (v == "data-mean") cfg.q_prior = q::QPriorMean::DataMean;
                else throw ConfigError("config: q_prior must be 'zero' or 'data-mean'");
            } else if (key == "episode_starts_all") {
                cfg.episode_starts_all = value.get<bool>();
            } else if (key == "q_seed_actions") {
                cfg.q_seed_actions = value.get<int>();
            } else if (key == "optimizer_restarts") {
                cfg.optimizer_restarts = value.get<int>();
            } else if (key == "optimizer_iters") {
                cfg.optimizer_iters = value.get<int>();
            } else if (key == "seed") {
                cfg.seed = value.get<std::uint64_t>();
            } else {
                throw ConfigError("config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: bad value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

} // namespace coplank::exp
