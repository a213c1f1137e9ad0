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

// coplank: bootstrap, train, evaluate, report and serve.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "coplank/checkpoint.hpp"
#include "coplank/errors.hpp"
#include "coplank/experiment.hpp"
#include "coplank/report.hpp"
#include "coplank/scenario.hpp"
#include "coplank/service/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

using namespace coplank;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Experiment flags. A config file is read first; any flag given on the
// command line then overrides the file.
class ConfigFlags {
public:
    void attach(CLI::App* app)
    {
        app->add_option("--config", config_file_, "experiment config JSON")->check(CLI::ExistingFile);
        app->add_option("--scenario", scenario_file_, "scenario JSON (overrides the config's scenario)")
            ->check(CLI::ExistingFile);
        add(app, "--human", human_, "partner profile: compliant|resistive|goal-seeking|still",
            [this](exp::ExperimentConfig& c) { c.scenario.human.kind = sim::human_kind_from_string(human_); });
        add(app, "--preset", preset_, "cost preset: position-only|with-force",
            [this](exp::ExperimentConfig& c) { c.preset = exp::cost_preset_from_string(preset_); });
        field(app, "--gamma", &exp::ExperimentConfig::gamma, "discount factor");
        field(app, "--delta", &exp::ExperimentConfig::delta, "UCB uncertainty weight");
        add(app, "--bounds", bounds_, "action half-ranges x_dot z_dot theta_dot", [this](exp::ExperimentConfig& c) {
            if (bounds_.size() != kActionDim) throw ConfigError("--bounds needs 3 values");
            c.bounds.xi = ActionVector(bounds_[0], bounds_[1], bounds_[2]);
        })->expected(3);
        field(app, "--bootstrap-samples", &exp::ExperimentConfig::bootstrap_samples, "bootstrap control steps");
        field(app, "--bootstrap-segment", &exp::ExperimentConfig::bootstrap_segment, "steps per bootstrap segment");
        field(app, "--bootstrap-smoothing", &exp::ExperimentConfig::bootstrap_smoothing, "bootstrap low-pass factor");
        field(app, "--iterations", &exp::ExperimentConfig::iterations, "outer iterations");
        field(app, "--episodes", &exp::ExperimentConfig::episodes, "Q-learning episodes per iteration");
        field(app, "--steps", &exp::ExperimentConfig::steps, "steps per episode");
        field(app, "--epsilon", &exp::ExperimentConfig::epsilon, "exploration probability");
        field(app, "--collect-steps", &exp::ExperimentConfig::collect_steps, "real steps collected per iteration");
        field(app, "--eval-trials", &exp::ExperimentConfig::eval_trials, "evaluation trials per iteration");
        field(app, "--eval-steps", &exp::ExperimentConfig::eval_steps, "control steps per evaluation trial");
        field(app, "--eval-start", &exp::ExperimentConfig::eval_start, "ball start position");
        field(app, "--eval-goal", &exp::ExperimentConfig::eval_goal, "ball goal position");
        field(app, "--fm-restarts", &exp::ExperimentConfig::fm_restarts, "forward model fit restarts");
        field(app, "--q-restarts", &exp::ExperimentConfig::q_restarts, "Q fit restarts");
        field(app, "--q-fit-points", &exp::ExperimentConfig::q_fit_points, "rows used for Q hyperparameters");
        field(app, "--q-noise-floor", &exp::ExperimentConfig::q_noise_floor, "lower bound on the Q noise std");
        add(app, "--q-prior", q_prior_, "Q prior mean: zero|data-mean", [this](exp::ExperimentConfig& c) {
            if (q_prior_ == "zero") c.q_prior = q::QPriorMean::Zero;
            else if (q_prior_ == "data-mean") c.q_prior = q::QPriorMean::DataMean;
            else throw ConfigError("--q-prior must be zero or data-mean");
        });
        field(app, "--q-seed-actions", &exp::ExperimentConfig::q_seed_actions,
              "extra actions per bootstrap state when seeding Q");
        add(app, "--episode-starts", episode_starts_, "episode start pool: iteration|all",
            [this](exp::ExperimentConfig& c) {
                if (episode_starts_ == "all") c.episode_starts_all = true;
                else if (episode_starts_ == "iteration") c.episode_starts_all = false;
                else throw ConfigError("--episode-starts must be iteration or all");
            });
        field(app, "--optimizer-restarts", &exp::ExperimentConfig::optimizer_restarts, "action optimizer restarts");
        field(app, "--optimizer-iters", &exp::ExperimentConfig::optimizer_iters, "action optimizer iterations");
        field(app, "--seed", &exp::ExperimentConfig::seed, "master seed");
        app->add_option("--out", out_, "output directory")->required();
    }

    exp::ExperimentConfig build() const
    {
        exp::ExperimentConfig cfg;
        if (!config_file_.empty()) cfg = exp::config_from_json(read_file(config_file_));
        if (!scenario_file_.empty()) cfg.scenario = load_scenario(scenario_file_);
        for (const auto& [opt, apply] : appliers_) {
            if (opt->count() > 0) apply(cfg);
        }
        cfg.output_dir = out_;
        cfg.validate();
        return cfg;
    }

private:
    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& storage, const std::string& help,
                     std::function<void(exp::ExperimentConfig&)> apply)
    {
        CLI::Option* o = app->add_option(name, storage, help);
        appliers_.emplace_back(o, std::move(apply));
        return o;
    }

    template <class T>
    void field(CLI::App* app, const std::string& name, T exp::ExperimentConfig::*member, const std::string& help)
    {
        auto value = std::make_shared<T>();
        CLI::Option* o = app->add_option(name, *value, help);
        appliers_.emplace_back(o, [value, member](exp::ExperimentConfig& c) { c.*member = *value; });
    }

    std::string config_file_;
    std::string scenario_file_;
    std::string human_;
    std::string preset_;
    std::string q_prior_;
    std::string episode_starts_;
    std::vector<double> bounds_;
    std::string out_;
    std::vector<std::pair<CLI::Option*, std::function<void(exp::ExperimentConfig&)>>> appliers_;
};

void write_config(const exp::ExperimentConfig& cfg)
{
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / "config.json");
    out << exp::config_to_json(cfg);
    if (!out) throw IoError("cannot write " + (cfg.output_dir / "config.json").string());
}

void print_summaries(const std::vector<exp::IterationSummary>& sums)
{
    std::printf("iteration  trials  overshoot  settling[s]  tau_mean  cost_mean\n");
    for (const auto& s : sums)
        std::printf("%9d  %6zu  %9.4f  %11.2f  %8.4f  %9.5f\n", s.iteration, s.trials.size(), s.overshoot_mean(),
                    s.settling_mean(), s.tau_mean(), s.cost_mean());
}

int cmd_bootstrap(const ConfigFlags& flags)
{
    const exp::ExperimentConfig cfg = flags.build();
    const auto data = exp::bootstrap(cfg);
    write_config(cfg);
    exp::write_transitions_csv(cfg.output_dir / "transitions.csv", data);
    std::printf("wrote %zu transitions to %s\n", data.size(), (cfg.output_dir / "transitions.csv").c_str());
    return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& data_file, bool quiet)
{
    const exp::ExperimentConfig cfg = flags.build();
    std::vector<Transition> data;
    if (!data_file.empty()) data = exp::read_transitions_csv(data_file);
    const auto progress = [quiet](const std::string& m) {
        if (!quiet) std::fprintf(stderr, "%s\n", m.c_str());
    };
    const exp::RunResult r = exp::run(cfg, data, progress);
    exp::write_run_artifacts(cfg, r);
    print_summaries(r.summaries);
    std::printf("artifacts in %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& checkpoint_file, int label)
{
    exp::ExperimentConfig cfg = flags.build();
    const Checkpoint ck = load_checkpoint(checkpoint_file);
    cfg.bounds = ck.bounds;
    const exp::Agent agent{ck.forward, ck.q};
    exp::IterationSummary sum;
    sum.iteration = label;
    sum.q_points = ck.q.gp.size();
    sum.fm_points = ck.forward.size();
    for (int k = 0; k < cfg.eval_trials; ++k)
        sum.trials.push_back(exp::evaluate_trial(agent, cfg, exp::eval_seed(cfg, k)));
    std::filesystem::create_directories(cfg.output_dir);
    exp::write_eval_csv(cfg.output_dir / "eval_steps.csv", {sum});
    exp::write_iterations_csv(cfg.output_dir / "iterations.csv", {sum});
    write_config(cfg);
    print_summaries({sum});
    return 0;
}

int cmd_report(const std::string& run_dir, std::string out_dir, const std::string& frames)
{
    if (out_dir.empty()) out_dir = (std::filesystem::path(run_dir) / "report").string();
    if (!frames.empty()) {
        const std::size_t n = report::report_frames(frames, out_dir);
        std::printf("%zu frames -> %s\n", n, (std::filesystem::path(out_dir) / "session_trace.csv").c_str());
        if (run_dir.empty()) return 0;
    }
    const report::Summary s = report::report(run_dir, out_dir);
    std::printf("%s", report::format_summary(s).c_str());
    std::printf("report files in %s\n", out_dir.c_str());
    return 0;
}

struct ServeFlags {
    std::string checkpoints = ".";
    std::string scenario;
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
    std::string log_dir;
    double time_scale = 1.0;
    double delta = -0.5;
    int restarts = 5;
};

int cmd_serve(const ServeFlags& f)
{
    service::ServerOptions o;
    o.address = f.address;
    o.port = f.port;
    o.checkpoint_dir = f.checkpoints;
    if (!f.scenario.empty()) o.scenario = load_scenario(f.scenario);
    o.log_dir = f.log_dir;
    o.time_scale = f.time_scale;
    o.session.ucb.delta = f.delta;
    o.session.ucb.restarts = f.restarts;

    // Block the signals before any thread starts so only sigwait sees them.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    service::Server server(o);
    server.start();
    std::printf("serving on %s:%u (checkpoints in %s)\n", f.address.c_str(), server.port(), f.checkpoints.c_str());
    std::fflush(stdout);
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian-process Q-learning for a human-robot plank balancing task"};
    app.require_subcommand(1);

    ConfigFlags boot_flags, train_flags, eval_flags;
    auto* boot = app.add_subcommand("bootstrap", "collect exploratory transitions against the simulator");
    boot_flags.attach(boot);

    auto* train = app.add_subcommand("train", "bootstrap (or load data), initialize and iterate; write artifacts");
    train_flags.attach(train);
    std::string data_file;
    bool quiet = false;
    train->add_option("--data", data_file, "transitions.csv to start from instead of bootstrapping")
        ->check(CLI::ExistingFile);
    train->add_flag("--quiet", quiet, "no progress output");

    auto* eval = app.add_subcommand("evaluate", "step-response trials of a saved checkpoint");
    eval_flags.attach(eval);
    std::string checkpoint_file;
    int label = 0;
    eval->add_option("--checkpoint", checkpoint_file, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--label", label, "iteration number written to the logs");

    auto* rep = app.add_subcommand("report", "plot-ready CSV series from a run directory or frame log");
    std::string run_dir, report_out, frames;
    rep->add_option("--run", run_dir, "run directory written by train");
    rep->add_option("--out", report_out, "output directory (default <run>/report)");
    rep->add_option("--frames", frames, "session frame log written by serve")->check(CLI::ExistingFile);

    auto* serve = app.add_subcommand("serve", "run the interaction service");
    ServeFlags sf;
    serve->add_option("--checkpoints", sf.checkpoints, "directory of named checkpoints")
        ->check(CLI::ExistingDirectory);
    serve->add_option("--scenario", sf.scenario, "scenario JSON")->check(CLI::ExistingFile);
    serve->add_option("--address", sf.address, "listen address");
    serve->add_option("--port", sf.port, "listen port (0 picks one)");
    serve->add_option("--log-dir", sf.log_dir, "where session frame logs are written");
    serve->add_option("--time-scale", sf.time_scale, "wall seconds per simulated second");
    serve->add_option("--delta", sf.delta, "UCB uncertainty weight");
    serve->add_option("--optimizer-restarts", sf.restarts, "action optimizer restarts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*boot) return cmd_bootstrap(boot_flags);
        if (*train) return cmd_train(train_flags, data_file, quiet);
        if (*eval) return cmd_evaluate(eval_flags, checkpoint_file, label);
        if (*rep) {
            if (run_dir.empty() && frames.empty()) throw ConfigError("report needs --run and/or --frames");
            return cmd_report(run_dir, report_out, frames);
        }
        if (*serve) return cmd_serve(sf);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitRuntime;
}
