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

#include "coplank/gp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace coplank::gp {

namespace {

constexpr double kLogZeroNoise = -14.0;

MatrixXd tail_rows(const MatrixXd& m, Eigen::Index count)
{
    return m.bottomRows(std::min(count, m.rows()));
}

VectorXd tail(const VectorXd& v, Eigen::Index count)
{
    return v.tail(std::min(count, v.size()));
}

VectorXd inverse_squared(const VectorXd& lengthscales)
{
    return lengthscales.array().square().inverse().matrix();
}

// Noise-free Gram matrix. Computed pairwise so the diagonal is exactly sf^2
// and the result is exactly symmetric.
MatrixXd gram(const MatrixXd& x, const VectorXd& inv_ls2, double sf2)
{
    const Eigen::Index n = x.rows();
    MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = sf2;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double r2 =
                ((x.row(i) - x.row(j)).array().square() * inv_ls2.transpose().array()).sum();
            const double v = sf2 * std::exp(-0.5 * r2);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

struct Factorization {
    MatrixXd lower;
    double jitter = 0.0;
};

// Cholesky of K + (sn^2 + jitter) I with multiplicative jitter escalation.
Factorization factorize_with_jitter(const MatrixXd& k, double sf2, double sn2,
                                    const JitterPolicy& policy)
{
    double rel = policy.initial;
    while (rel <= policy.max * (1.0 + 1e-12)) {
        MatrixXd a = k;
        a.diagonal().array() += sn2 + rel * sf2;
        Eigen::LLT<MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) {
            MatrixXd l = llt.matrixL();
            if (all_finite(l)) return {std::move(l), rel * sf2};
        }
        rel *= policy.factor;
    }
    std::ostringstream msg;
    msg << "Gram matrix not positive definite up to jitter " << policy.max << " * sf^2 (n = "
        << k.rows() << ", sf^2 = " << sf2 << ", sn^2 = " << sn2 << ")";
    throw IllConditionedKernel(msg.str());
}

// In-place rank-one update: on return L L^T = L0 L0^T + x x^T.
void chol_rank1_update(Eigen::Ref<MatrixXd> l, VectorXd x)
{
    const Eigen::Index n = l.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double lkk = l(k, k);
        const double r = std::hypot(lkk, x[k]);
        const double c = r / lkk;
        const double s = x[k] / lkk;
        l(k, k) = r;
        const Eigen::Index m = n - k - 1;
        if (m > 0) {
            l.col(k).tail(m) = (l.col(k).tail(m) + s * x.tail(m)) / c;
            x.tail(m) = c * x.tail(m) - s * l.col(k).tail(m);
        }
    }
}

} // namespace

// ---------------------------------------------------------------- Hyperparams

void Hyperparams::validate() const
{
    if (lengthscales.size() == 0) throw ContractViolation("hyperparameters need at least one lengthscale");
    for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
        if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d]))
            throw ContractViolation("lengthscales must be strictly positive and finite");
    }
    if (!(signal_std > 0.0) || !std::isfinite(signal_std))
        throw ContractViolation("signal_std must be strictly positive");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
        throw ContractViolation("noise_std must be non-negative");
}

VectorXd Hyperparams::to_log() const
{
    const Eigen::Index d = dim();
    VectorXd v(d + 2);
    v.head(d) = lengthscales.array().log().matrix();
    v[d] = std::log(signal_std);
    v[d + 1] = noise_std > 0.0 ? std::max(std::log(noise_std), kLogZeroNoise) : kLogZeroNoise;
    return v;
}

Hyperparams Hyperparams::from_log(const VectorXd& log_params)
{
    if (log_params.size() < 3) throw ContractViolation("log parameter vector too short");
    const Eigen::Index d = log_params.size() - 2;
    Hyperparams h;
    h.lengthscales = log_params.head(d).array().exp().matrix();
    h.signal_std = std::exp(log_params[d]);
    h.noise_std = std::exp(log_params[d + 1]);
    return h;
}

Hyperparams Hyperparams::isotropic(Eigen::Index dim, double lengthscale, double signal_std,
                                   double noise_std)
{
    Hyperparams h;
    h.lengthscales = VectorXd::Constant(dim, lengthscale);
    h.signal_std = signal_std;
    h.noise_std = noise_std;
    return h;
}

double kernel_eval(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& x2,
                   const Hyperparams& hyper)
{
    if (x.size() != hyper.dim() || x2.size() != hyper.dim())
        throw ContractViolation("kernel_eval: input dimension does not match lengthscales");
    const double r2 = ((x - x2).array() / hyper.lengthscales.array()).square().sum();
    return hyper.signal_std * hyper.signal_std * std::exp(-0.5 * r2);
}

// -------------------------------------------------------------------- GpModel

GpModel GpModel::prior(Hyperparams hyper, ModelOptions options)
{
    const Eigen::Index dim = hyper.dim(); // read before the move below
    return build(MatrixXd(0, dim), VectorXd(0), std::move(hyper), options);
}

GpModel GpModel::build(MatrixXd inputs, VectorXd targets, Hyperparams hyper, ModelOptions options)
{
    hyper.validate();
    if (inputs.cols() != hyper.dim())
        throw ContractViolation("GpModel::build: input columns do not match lengthscales");
    if (inputs.rows() != targets.size())
        throw ContractViolation("GpModel::build: inputs and targets differ in length");
    if (options.max_points < 1) throw ContractViolation("GpModel::build: max_points must be positive");
    if (!inputs.allFinite() || !targets.allFinite())
        throw ContractViolation("GpModel::build: non-finite training data");

    GpModel m;
    if (inputs.rows() > options.max_points) {
        m.inputs_ = tail_rows(inputs, options.max_points);
        m.targets_ = tail(targets, options.max_points);
    } else {
        m.inputs_ = std::move(inputs);
        m.targets_ = std::move(targets);
    }
    m.hyper_ = std::move(hyper);
    m.options_ = options;
    m.inv_ls2_ = inverse_squared(m.hyper_.lengthscales);
    m.factorize();
    m.solve_alpha();
    return m;
}

void GpModel::factorize()
{
    const double sf2 = signal_variance();
    if (empty()) {
        chol_.resize(0, 0);
        jitter_ = options_.jitter.initial * sf2;
        return;
    }
    auto f = factorize_with_jitter(gram(inputs_, inv_ls2_, sf2), sf2,
                                   hyper_.noise_std * hyper_.noise_std, options_.jitter);
    chol_ = std::move(f.lower);
    jitter_ = f.jitter;
}

void GpModel::solve_alpha()
{
    if (empty()) {
        alpha_.resize(0);
        return;
    }
    alpha_ = chol_.triangularView<Eigen::Lower>().solve(targets_);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

void GpModel::check_dim(Eigen::Index n) const
{
    if (n != dim()) throw ContractViolation("GpModel: query dimension does not match the model");
}

VectorXd GpModel::kernel_vector(const Eigen::Ref<const VectorXd>& x) const
{
    check_dim(x.size());
    const VectorXd r2 = (inputs_.rowwise() - x.transpose()).array().square().matrix() * inv_ls2_;
    return (signal_variance() * (-0.5 * r2.array()).exp()).matrix();
}

double GpModel::mean(const Eigen::Ref<const VectorXd>& x) const
{
    check_dim(x.size());
    if (empty()) return 0.0;
    return kernel_vector(x).dot(alpha_);
}

Prediction GpModel::predict(const Eigen::Ref<const VectorXd>& x) const
{
    check_dim(x.size());
    const double sf2 = signal_variance();
    if (empty()) return {0.0, sf2};
    VectorXd k = kernel_vector(x);
    const double m = k.dot(alpha_);
    chol_.triangularView<Eigen::Lower>().solveInPlace(k);
    const double v = std::clamp(sf2 - k.squaredNorm(), 0.0, sf2);
    return {m, v};
}

GpModel GpModel::with_target(Eigen::Index i, double value) const
{
    if (i < 0 || i >= size()) throw ContractViolation("GpModel::with_target: index out of range");
    GpModel m = *this;
    m.targets_[i] = value;
    m.solve_alpha();
    return m;
}

// ----------------------------------------------------------- incremental ops

GpModel add_observations(const GpModel& model, const MatrixXd& new_inputs,
                         const VectorXd& new_targets)
{
    if (new_inputs.rows() != new_targets.size())
        throw ContractViolation("add_observations: inputs and targets differ in length");
    if (new_inputs.rows() == 0) return model;
    if (new_inputs.cols() != model.dim())
        throw ContractViolation("add_observations: input dimension does not match the model");

    const double sf2 = model.signal_variance();
    const auto rebuild = [&] {
        MatrixXd x(model.size() + new_inputs.rows(), model.dim());
        x << model.inputs(), new_inputs;
        VectorXd y(model.size() + new_targets.size());
        y << model.targets(), new_targets;
        return GpModel::build(std::move(x), std::move(y), model.hyper(), model.options());
    };

    // A factor built at escalated jitter would not match a fresh build.
    const double base_jitter = model.options().jitter.initial * sf2;
    if (model.empty() || model.jitter() > base_jitter * (1.0 + 1e-12)) return rebuild();

    GpModel m = model;
    const double diag = sf2 + model.hyper().noise_std * model.hyper().noise_std + m.jitter_;
    for (Eigen::Index r = 0; r < new_inputs.rows(); ++r) {
        const VectorXd x = new_inputs.row(r).transpose();
        VectorXd l = m.kernel_vector(x);
        m.chol_.triangularView<Eigen::Lower>().solveInPlace(l);
        const double d2 = diag - l.squaredNorm();
        if (!(d2 > 0.0) || !std::isfinite(d2)) return rebuild();

        const Eigen::Index n = m.size();
        MatrixXd grown = MatrixXd::Zero(n + 1, n + 1);
        grown.topLeftCorner(n, n) = m.chol_;
        grown.row(n).head(n) = l.transpose();
        grown(n, n) = std::sqrt(d2);
        m.chol_ = std::move(grown);

        m.inputs_.conservativeResize(n + 1, Eigen::NoChange);
        m.inputs_.row(n) = new_inputs.row(r);
        m.targets_.conservativeResize(n + 1);
        m.targets_[n] = new_targets[r];

        if (m.size() > m.options_.max_points) {
            const Eigen::Index k = m.size() - 1;
            const VectorXd spill = m.chol_.col(0).tail(k);
            MatrixXd rest = m.chol_.bottomRightCorner(k, k);
            chol_rank1_update(rest, spill);
            m.chol_ = std::move(rest);
            m.inputs_ = m.inputs_.bottomRows(k).eval();
            m.targets_ = m.targets_.tail(k).eval();
        }
    }
    m.solve_alpha();
    return m;
}

// ------------------------------------------------------------- marginal lik.

NllResult negative_log_marginal_likelihood(const MatrixXd& inputs, const VectorXd& targets,
                                           const Hyperparams& hyper, const JitterPolicy& jitter)
{
    hyper.validate();
    const Eigen::Index n = inputs.rows();
    const Eigen::Index dims = hyper.dim();
    if (n < 1) throw ContractViolation("negative_log_marginal_likelihood: need at least one point");
    if (inputs.cols() != dims || targets.size() != n)
        throw ContractViolation("negative_log_marginal_likelihood: dimension mismatch");

    const double sf2 = hyper.signal_std * hyper.signal_std;
    const double sn2 = hyper.noise_std * hyper.noise_std;
    const VectorXd inv_ls2 = inverse_squared(hyper.lengthscales);
    const MatrixXd k = gram(inputs, inv_ls2, sf2);
    const Factorization f = factorize_with_jitter(k, sf2, sn2, jitter);
    const auto lower = f.lower.triangularView<Eigen::Lower>();

    VectorXd alpha = lower.solve(targets);
    const double quad = alpha.squaredNorm();
    lower.transpose().solveInPlace(alpha);

    NllResult out;
    out.value = 0.5 * quad + f.lower.diagonal().array().log().sum() +
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    MatrixXd a_inv = MatrixXd::Identity(n, n);
    lower.solveInPlace(a_inv);
    lower.transpose().solveInPlace(a_inv);
    const MatrixXd q = a_inv - alpha * alpha.transpose();

    out.gradient = VectorXd::Zero(dims + 2);
    double qk_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        qk_sum += q(j, j) * k(j, j);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double qk = q(i, j) * k(i, j);
            qk_sum += 2.0 * qk;
            // dA/dlog l_d = K .* r_d^2; factor 2 for (i,j)+(j,i), times 1/2.
            out.gradient.head(dims).array() +=
                qk * (inputs.row(i) - inputs.row(j)).array().square().transpose() * inv_ls2.array();
        }
    }
    const double trace_q = q.trace();
    // The jitter scales with sf^2, so it contributes to the signal gradient.
    out.gradient[dims] = qk_sum + f.jitter * trace_q;
    out.gradient[dims + 1] = sn2 * trace_q;
    return out;
}

// ------------------------------------------------------------------------ fit

namespace {

struct Box {
    VectorXd lo;
    VectorXd hi;
};

Box make_box(Eigen::Index dims, const FitOptions& o)
{
    Box b{VectorXd(dims + 2), VectorXd(dims + 2)};
    b.lo.head(dims).setConstant(o.log_lengthscale_min);
    b.hi.head(dims).setConstant(o.log_lengthscale_max);
    b.lo[dims] = o.log_signal_min;
    b.hi[dims] = o.log_signal_max;
    b.lo[dims + 1] = o.log_noise_min;
    b.hi[dims + 1] = o.log_noise_max;
    return b;
}

struct RpropOutcome {
    VectorXd best;
    double best_value = 0.0;
    double initial_value = 0.0;
};

// iRprop- over the log parameters, clamped to the box, keeping the best iterate.
RpropOutcome rprop_nll(const MatrixXd& x, const VectorXd& y, VectorXd theta, const Box& box,
                       const FitOptions& o)
{
    constexpr double kEtaPlus = 1.2;
    constexpr double kEtaMinus = 0.5;
    constexpr double kStepInit = 0.1;
    constexpr double kStepMax = 1.0;
    constexpr double kStepMin = 1e-8;
    constexpr double kConverged = 1e-5;

    const JitterPolicy& jitter = o.model.jitter;
    NllResult cur = negative_log_marginal_likelihood(x, y, Hyperparams::from_log(theta), jitter);
    RpropOutcome out{theta, cur.value, cur.value};

    const Eigen::Index p = theta.size();
    VectorXd step = VectorXd::Constant(p, kStepInit);
    VectorXd g_prev = VectorXd::Zero(p);
    VectorXd g = cur.gradient;
    int failures = 0;

    for (int it = 0; it < o.max_iters; ++it) {
        const VectorXd theta_prev = theta;
        bool moving = false;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double s = g[j] * g_prev[j];
            if (s > 0.0) {
                step[j] = std::min(step[j] * kEtaPlus, kStepMax);
            } else if (s < 0.0) {
                step[j] = std::max(step[j] * kEtaMinus, kStepMin);
                g[j] = 0.0;
            }
            const double dir = (g[j] > 0.0) - (g[j] < 0.0);
            theta[j] = std::clamp(theta[j] - dir * step[j], box.lo[j], box.hi[j]);
            const bool pinned = theta[j] == theta_prev[j] && dir != 0.0;
            if (step[j] > kConverged && !pinned) moving = true;
        }
        if (!moving) break;
        g_prev = g;
        try {
            cur = negative_log_marginal_likelihood(x, y, Hyperparams::from_log(theta), jitter);
        } catch (const IllConditionedKernel&) {
            if (++failures > 5) break;
            theta = theta_prev;
            step *= kEtaMinus;
            g_prev.setZero();
            continue;
        }
        g = cur.gradient;
        if (!std::isfinite(cur.value)) break;
        if (cur.value < out.best_value) {
            out.best_value = cur.value;
            out.best = theta;
        }
    }
    return out;
}

} // namespace

FitResult fit_detailed(const MatrixXd& inputs, const VectorXd& targets, const Hyperparams& init,
                       const FitOptions& options)
{
    init.validate();
    if (inputs.rows() < 2) throw ContractViolation("fit: need at least two training points");
    if (inputs.rows() != targets.size() || inputs.cols() != init.dim())
        throw ContractViolation("fit: dimension mismatch");
    if (options.restarts < 1) throw ContractViolation("fit: restarts must be at least 1");

    MatrixXd fx = inputs;
    VectorXd fy = targets;
    if (options.max_fit_points > 0 && inputs.rows() > options.max_fit_points) {
        fx = tail_rows(inputs, options.max_fit_points);
        fy = tail(targets, options.max_fit_points);
    }
    // The training window also bounds the optimization set.
    if (fx.rows() > options.model.max_points) {
        fx = tail_rows(fx, options.model.max_points);
        fy = tail(fy, options.model.max_points);
    }

    const Box box = make_box(init.dim(), options);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> jiggle(-options.perturbation, options.perturbation);

    FitResult result;
    VectorXd best_theta;
    double best_value = std::numeric_limits<double>::infinity();
    std::ostringstream diagnostics;

    for (int r = 0; r < options.restarts; ++r) {
        VectorXd theta = init.to_log();
        if (r > 0) {
            for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += jiggle(rng);
        }
        theta = theta.cwiseMax(box.lo).cwiseMin(box.hi);

        RestartTrace trace;
        try {
            const RpropOutcome o = rprop_nll(fx, fy, theta, box, options);
            trace.initial_nll = o.initial_value;
            trace.final_nll = o.best_value;
            if (o.best_value < best_value) {
                best_value = o.best_value;
                best_theta = o.best;
            }
        } catch (const IllConditionedKernel& e) {
            trace.failed = true;
            trace.initial_nll = std::numeric_limits<double>::quiet_NaN();
            trace.final_nll = std::numeric_limits<double>::quiet_NaN();
            diagnostics << " restart " << r << ": " << e.what() << ';';
        }
        result.restarts.push_back(trace);
    }

    if (best_theta.size() == 0)
        throw FittingFailed("fit: every restart failed to factorize;" + diagnostics.str());

    result.nll = best_value;
    result.model = GpModel::build(inputs, targets, Hyperparams::from_log(best_theta), options.model);
    return result;
}

GpModel fit(const MatrixXd& inputs, const VectorXd& targets, const Hyperparams& init,
            const FitOptions& options)
{
    return fit_detailed(inputs, targets, init, options).model;
}

// --------------------------------------------------------------- standardizer

Standardizer Standardizer::from_data(const MatrixXd& data)
{
    Standardizer s;
    const double n = static_cast<double>(std::max<Eigen::Index>(data.rows(), 1));
    s.offset = data.colwise().mean().transpose();
    s.scale = ((data.rowwise() - s.offset.transpose()).array().square().colwise().sum() / n)
                  .sqrt()
                  .transpose()
                  .matrix();
    for (Eigen::Index d = 0; d < s.scale.size(); ++d) {
        if (!(s.scale[d] > 0.0)) s.scale[d] = 1.0;
    }
    return s;
}

MatrixXd Standardizer::apply(const MatrixXd& data) const
{
    return ((data.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array())
        .matrix();
}

VectorXd Standardizer::apply(const Eigen::Ref<const VectorXd>& row) const
{
    return ((row - offset).array() / scale.array()).matrix();
}

} // namespace coplank::gp
