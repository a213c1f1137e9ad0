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

#include "coplank/report.hpp"

#include "coplank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace coplank::report {

namespace {

constexpr int kReportVersion = 1;

std::string num(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

class Writer {
public:
    Writer(const std::filesystem::path& path, const char* kind) : path_(path), out_(path, std::ios::binary)
    {
        if (!out_) throw IoError("cannot write " + path.string());
        out_ << "# coplank " << kind << " v" << kReportVersion << '\n';
    }
    std::ofstream& out() { return out_; }
    void close()
    {
        out_.flush();
        if (!out_) throw IoError("write failed for " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

std::string expected_files_message(const std::filesystem::path& dir)
{
    std::string msg = "run directory " + dir.string() + " is incomplete; expected files:";
    for (const char* f : kRunFiles) {
        msg += ' ';
        msg += f;
        if (!std::filesystem::exists(dir / f)) msg += " (missing)";
    }
    return msg;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw LoadError(source.string() + ": no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const
{
    const std::string& cell = rows.at(row).at(column(name));
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw LoadError(source.string() + ": row " + std::to_string(row + 1) + ", column '" + name +
                        "': bad number '" + cell + "'");
    }
}

CsvTable read_csv(const std::filesystem::path& path, const std::string& kind)
{
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    CsvTable t;
    t.source = path;
    t.kind = kind;
    std::string line;
    const std::string prefix = "# coplank " + kind + " v";
    if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
        throw LoadError(path.string() + ": expected a '" + prefix + "<N>' header line");
    try {
        t.version = std::stoi(line.substr(prefix.size()));
    } catch (const std::exception&) {
        throw LoadError(path.string() + ": unreadable schema version in '" + line + "'");
    }
    if (t.version != kReportVersion)
        throw LoadError(path.string() + ": schema version " + std::to_string(t.version) + ", this build reads v" +
                        std::to_string(kReportVersion));
    if (!std::getline(in, line)) throw LoadError(path.string() + ": missing column row");
    t.columns = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.columns.size())
            throw LoadError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, expected " + std::to_string(t.columns.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

Summary report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir)
{
    for (const char* f : kRunFiles) {
        if (!std::filesystem::is_regular_file(run_dir / f)) throw LoadError(expected_files_message(run_dir));
    }
    const CsvTable eval = read_csv(run_dir / "eval_steps.csv", "eval_steps");
    const CsvTable iters = read_csv(run_dir / "iterations.csv", "iterations");
    const CsvTable rel = read_csv(run_dir / "relevance.csv", "relevance");
    const CsvTable held = read_csv(run_dir / "heldout.csv", "heldout");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    Summary summary;

    // Step response: ground-truth ball position against time per trial.
    {
        Writer w(out_dir / "step_response.csv", "step_response");
        w.out() << "iteration,trial,t,d_true,goal,abs_delta_d\n";
        for (std::size_t r = 0; r < eval.rows.size(); ++r) {
            const double goal = eval.number(r, "d") - eval.number(r, "delta_d");
            const double d = eval.number(r, "d_true");
            w.out() << eval.rows[r][eval.column("iteration")] << ',' << eval.rows[r][eval.column("trial")] << ','
                    << num(eval.number(r, "t")) << ',' << num(d) << ',' << num(goal) << ','
                    << num(std::abs(d - goal)) << '\n';
        }
        w.close();
    }

    // Interaction-force trace: mean and population std across trials.
    {
        struct Acc {
            double t = 0.0;
            std::vector<double> tau;
        };
        std::map<std::pair<long, long>, Acc> groups;
        for (std::size_t r = 0; r < eval.rows.size(); ++r) {
            const auto key = std::make_pair(std::lround(eval.number(r, "iteration")),
                                            std::lround(eval.number(r, "step")));
            Acc& a = groups[key];
            a.t = eval.number(r, "t");
            a.tau.push_back(eval.number(r, "tau"));
        }
        Writer w(out_dir / "tau_trace.csv", "tau_trace");
        w.out() << "iteration,step,t,trials,tau_mean,tau_std\n";
        for (const auto& [key, a] : groups) {
            const double n = static_cast<double>(a.tau.size());
            const double mean = std::accumulate(a.tau.begin(), a.tau.end(), 0.0) / n;
            double var = 0.0;
            for (double v : a.tau) var += (v - mean) * (v - mean);
            w.out() << key.first << ',' << key.second << ',' << num(a.t) << ',' << a.tau.size() << ','
                    << num(mean) << ',' << num(std::sqrt(var / n)) << '\n';
        }
        w.close();
    }

    // Forward-model prediction bands and their coverage.
    {
        std::array<int, kStateDim> inside{};
        std::array<int, kStateDim> count{};
        Writer w(out_dir / "fm_bands.csv", "fm_bands");
        w.out() << "step,dim,name,actual,mean,lower,upper,inside\n";
        for (std::size_t r = 0; r < held.rows.size(); ++r) {
            const long dim = std::lround(held.number(r, "dim"));
            if (dim < 0 || dim >= kStateDim)
                throw LoadError(held.source.string() + ": row " + std::to_string(r + 1) + ": dim out of range");
            const double actual = held.number(r, "actual");
            const double mean = held.number(r, "mean");
            const double sd = held.number(r, "std");
            const bool in = std::abs(actual - mean) <= 2.0 * sd;
            ++count[static_cast<std::size_t>(dim)];
            if (in) ++inside[static_cast<std::size_t>(dim)];
            w.out() << held.rows[r][held.column("step")] << ',' << dim << ','
                    << kStateNames[static_cast<std::size_t>(dim)] << ',' << num(actual) << ',' << num(mean) << ','
                    << num(mean - 2.0 * sd) << ',' << num(mean + 2.0 * sd) << ',' << (in ? 1 : 0) << '\n';
        }
        w.close();

        Writer c(out_dir / "calibration.csv", "calibration");
        c.out() << "dim,name,steps,inside_fraction\n";
        for (int i = 0; i < kStateDim; ++i) {
            const auto k = static_cast<std::size_t>(i);
            summary.calibration[k] = count[k] ? static_cast<double>(inside[k]) / count[k] : 0.0;
            c.out() << i << ',' << kStateNames[k] << ',' << count[k] << ',' << num(summary.calibration[k]) << '\n';
        }
        c.close();
    }

    // Relevance rows rescaled so that each row peaks at exactly 1.
    {
        Writer w(out_dir / "relevance_normalized.csv", "relevance_normalized");
        w.out() << "output";
        for (auto n : kInputNames) w.out() << ',' << n;
        w.out() << '\n';
        for (std::size_t r = 0; r < rel.rows.size(); ++r) {
            std::array<double, kInputDim> row{};
            for (int j = 0; j < kInputDim; ++j)
                row[static_cast<std::size_t>(j)] = rel.number(r, std::string(kInputNames[static_cast<std::size_t>(j)]));
            const double peak = *std::max_element(row.begin(), row.end());
            if (!(peak > 0.0)) throw LoadError(rel.source.string() + ": row " + std::to_string(r + 1) + " has no positive entry");
            const std::string& name = rel.rows[r][rel.column("output")];
            w.out() << name;
            for (double v : row) w.out() << ',' << num(v / peak);
            w.out() << '\n';
            if (name == "delta_theta") {
                std::vector<std::size_t> order(kInputDim);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return row[a] > row[b]; });
                for (auto j : order) summary.theta_ranking.emplace_back(kInputNames[j]);
            }
        }
        w.close();
    }

    for (std::size_t r = 0; r < iters.rows.size(); ++r) {
        Summary::Iteration it;
        it.iteration = static_cast<int>(std::lround(iters.number(r, "iteration")));
        it.overshoot = iters.number(r, "overshoot_mean");
        it.settling = iters.number(r, "settling_mean");
        it.tau = iters.number(r, "tau_mean");
        it.cost = iters.number(r, "cost_mean");
        summary.iterations.push_back(it);
    }
    return summary;
}

std::size_t report_frames(const std::filesystem::path& frames_csv, const std::filesystem::path& out_dir)
{
    const CsvTable frames = read_csv(frames_csv, "frames");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    Writer w(out_dir / "session_trace.csv", "session_trace");
    w.out() << "seq,t,d,delta_d,tau,cost,ucb,tau_running_mean,cost_running_mean,degraded\n";
    double tau_sum = 0.0;
    double cost_sum = 0.0;
    for (std::size_t r = 0; r < frames.rows.size(); ++r) {
        const double tau = frames.number(r, "tau");
        const double cost = frames.number(r, "cost");
        tau_sum += tau;
        cost_sum += cost;
        const double n = static_cast<double>(r + 1);
        w.out() << frames.rows[r][frames.column("seq")] << ',' << num(frames.number(r, "t")) << ','
                << num(frames.number(r, "d")) << ',' << num(frames.number(r, "delta_d")) << ',' << num(tau) << ','
                << num(cost) << ',' << num(frames.number(r, "ucb")) << ',' << num(tau_sum / n) << ','
                << num(cost_sum / n) << ',' << frames.rows[r][frames.column("degraded")] << '\n';
    }
    w.close();
    return frames.rows.size();
}

std::string format_summary(const Summary& s)
{
    std::ostringstream out;
    out << "iteration  overshoot  settling[s]  tau_mean  cost_mean\n";
    for (const auto& it : s.iterations) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%9d  %9.4f  %11.2f  %8.4f  %9.5f\n", it.iteration, it.overshoot, it.settling,
                      it.tau, it.cost);
        out << buf;
    }
    out << "held-out 2-sigma coverage:";
    for (int i = 0; i < kStateDim; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s=%.2f", std::string(kStateNames[static_cast<std::size_t>(i)]).c_str(),
                      s.calibration[static_cast<std::size_t>(i)]);
        out << buf;
    }
    out << "\ndelta_theta relevance order:";
    for (const auto& n : s.theta_ranking) out << ' ' << n;
    out << '\n';
    return out.str();
}

} // namespace coplank::report
