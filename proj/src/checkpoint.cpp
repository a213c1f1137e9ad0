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

#include "coplank/checkpoint.hpp"

#include "coplank/errors.hpp"
#include "coplank/gp_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace coplank {

namespace {

template <class Vec>
void write_row(std::ostream& out, const char* tag, const Vec& v)
{
    out << tag;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
    out << '\n';
}

std::string expect_tag(std::istream& in, const std::string& tag)
{
    std::string word;
    if (!(in >> word)) throw LoadError("checkpoint: unexpected end of file, expected '" + tag + "'");
    if (word != tag) throw LoadError("checkpoint: expected '" + tag + "', found '" + word + "'");
    return word;
}

template <class Vec>
void read_row(std::istream& in, const std::string& tag, Vec& v)
{
    expect_tag(in, tag);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(in >> v[i])) throw LoadError("checkpoint: malformed values after '" + tag + "'");
    }
}

} // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c)
{
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "coplank_checkpoint " << kCheckpointVersion << '\n';
    out << "gamma " << c.q.gamma << '\n';
    out << "q_prior_mean " << c.q.prior_mean << '\n';
    write_row(out, "cost_weights", c.q.cost.weights);
    write_row(out, "cost_target", c.q.cost.target);
    write_row(out, "bounds", c.bounds.xi);
    out << "forward_model " << c.forward.models().size() << '\n';
    for (const gp::GpModel& m : c.forward.models()) gp::write_text(out, m);
    out << "q_model\n";
    gp::write_text(out, c.q.gp);
    out << "end_checkpoint\n";
    out.precision(old_precision);
}

Checkpoint read_checkpoint(std::istream& in)
{
    std::string word;
    int version = 0;
    if (!(in >> word) || word != "coplank_checkpoint")
        throw LoadError("checkpoint: missing 'coplank_checkpoint' header (not a checkpoint file?)");
    if (!(in >> version)) throw LoadError("checkpoint: missing format version");
    if (version != kCheckpointVersion)
        throw LoadError("checkpoint: format version " + std::to_string(version) +
                        " is not supported (this build reads version " +
                        std::to_string(kCheckpointVersion) + ")");

    Checkpoint c;
    expect_tag(in, "gamma");
    if (!(in >> c.q.gamma)) throw LoadError("checkpoint: malformed gamma");
    expect_tag(in, "q_prior_mean");
    if (!(in >> c.q.prior_mean)) throw LoadError("checkpoint: malformed q_prior_mean");
    read_row(in, "cost_weights", c.q.cost.weights);
    read_row(in, "cost_target", c.q.cost.target);
    read_row(in, "bounds", c.bounds.xi);

    expect_tag(in, "forward_model");
    int count = 0;
    if (!(in >> count) || count != kStateDim)
        throw LoadError("checkpoint: forward_model must hold " + std::to_string(kStateDim) + " GPs");
    std::vector<gp::GpModel> dims;
    for (int i = 0; i < count; ++i) dims.push_back(gp::read_text(in));
    expect_tag(in, "q_model");
    c.q.gp = gp::read_text(in);
    expect_tag(in, "end_checkpoint");

    try {
        c.forward = fm::ForwardModel(std::move(dims));
        c.bounds.validate();
        c.q.cost.validate();
        c.q.validate();
    } catch (const ContractViolation& e) {
        throw LoadError(std::string("checkpoint: inconsistent contents: ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    write_checkpoint(out, c);
    if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open checkpoint " + path.string());
    try {
        return read_checkpoint(in);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

} // namespace coplank
