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

#include "coplank/gp_io.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace coplank::gp {

namespace {

void expect_tag(std::istream& in, const std::string& tag)
{
    std::string got;
    if (!(in >> got) || got != tag)
        throw LoadError("gp_model: expected '" + tag + "' but found '" + got + "'");
}

template <typename T>
T read_value(std::istream& in, const std::string& what)
{
    T v{};
    if (!(in >> v)) throw LoadError("gp_model: could not read " + what);
    return v;
}

} // namespace

void write_text(std::ostream& out, const GpModel& model)
{
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    const Hyperparams& h = model.hyper();
    const JitterPolicy& j = model.options().jitter;

    out << "gp_model " << kGpFormatVersion << '\n';
    out << "dim " << model.dim() << '\n';
    out << "points " << model.size() << '\n';
    out << "max_points " << model.options().max_points << '\n';
    out << "jitter " << j.initial << ' ' << j.max << ' ' << j.factor << '\n';
    out << "signal_std " << h.signal_std << '\n';
    out << "noise_std " << h.noise_std << '\n';
    out << "lengthscales";
    for (Eigen::Index d = 0; d < h.dim(); ++d) out << ' ' << h.lengthscales[d];
    out << "\ninputs\n";
    for (Eigen::Index i = 0; i < model.size(); ++i) {
        for (Eigen::Index d = 0; d < model.dim(); ++d) out << (d ? " " : "") << model.inputs()(i, d);
        out << '\n';
    }
    out << "targets\n";
    for (Eigen::Index i = 0; i < model.size(); ++i) out << model.targets()[i] << '\n';
    out << "end_gp_model\n";
    out.precision(old_precision);
}

GpModel read_text(std::istream& in)
{
    expect_tag(in, "gp_model");
    const int version = read_value<int>(in, "version");
    if (version != kGpFormatVersion) {
        throw LoadError("gp_model: unsupported format version " + std::to_string(version) +
                        " (this build reads version " + std::to_string(kGpFormatVersion) + ")");
    }
    expect_tag(in, "dim");
    const auto dim = read_value<Eigen::Index>(in, "dim");
    expect_tag(in, "points");
    const auto points = read_value<Eigen::Index>(in, "points");
    if (dim < 1 || points < 0) throw LoadError("gp_model: invalid dim/points");

    ModelOptions options;
    expect_tag(in, "max_points");
    options.max_points = read_value<Eigen::Index>(in, "max_points");
    expect_tag(in, "jitter");
    options.jitter.initial = read_value<double>(in, "jitter initial");
    options.jitter.max = read_value<double>(in, "jitter max");
    options.jitter.factor = read_value<double>(in, "jitter factor");

    Hyperparams h;
    expect_tag(in, "signal_std");
    h.signal_std = read_value<double>(in, "signal_std");
    expect_tag(in, "noise_std");
    h.noise_std = read_value<double>(in, "noise_std");
    expect_tag(in, "lengthscales");
    h.lengthscales.resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) h.lengthscales[d] = read_value<double>(in, "lengthscale");

    expect_tag(in, "inputs");
    MatrixXd x(points, dim);
    for (Eigen::Index i = 0; i < points; ++i)
        for (Eigen::Index d = 0; d < dim; ++d) x(i, d) = read_value<double>(in, "input value");
    expect_tag(in, "targets");
    VectorXd y(points);
    for (Eigen::Index i = 0; i < points; ++i) y[i] = read_value<double>(in, "target value");
    expect_tag(in, "end_gp_model");

    try {
        return GpModel::build(std::move(x), std::move(y), std::move(h), options);
    } catch (const ContractViolation& e) {
        throw LoadError(std::string("gp_model: invalid contents: ") + e.what());
    }
}

} // namespace coplank::gp
