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
#include "coplank/gp.hpp"
#include "coplank/gp_io.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <sstream>

using namespace coplank;
using namespace coplank::gp;
using coplank::testing::random_hyper;
using coplank::testing::random_inputs;
using coplank::testing::smooth_targets;

namespace {

MatrixXd gram(const MatrixXd& x, const Hyperparams& h) {
    MatrixXd k(x.rows(), x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j) k(i, j) = kernel_eval(x.row(i).transpose(), x.row(j).transpose(), h);
    return k;
}

double rel_err(const VectorXd& a, const VectorXd& b) {
    return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

} // namespace

TEST_CASE("kernel is symmetric and its Gram matrix is positive semidefinite") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d = 1 + trial % 5;
        const Hyperparams h = random_hyper(rng, d);
        const MatrixXd x = random_inputs(rng, 25, d);
        const MatrixXd k = gram(x, h);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
        CHECK(es.eigenvalues().minCoeff() > -1e-10 * h.signal_std * h.signal_std);
        CHECK(k.diagonal().isApproxToConstant(h.signal_std * h.signal_std, 1e-14));
    }
}

TEST_CASE("kernel hand value") {
    Hyperparams h;
    h.lengthscales = VectorXd::Constant(2, 2.0);
    h.signal_std = 1.5;
    VectorXd a(2), b(2);
    a << 0.0, 0.0;
    b << 2.0, 0.0;
    CHECK(kernel_eval(a, b, h) == doctest::Approx(2.25 * std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("posterior reverts to the prior far from the data") {
    std::mt19937_64 rng(3);
    const MatrixXd x = random_inputs(rng, 30, 2);
    const VectorXd y = smooth_targets(x, rng, 0.01);
    const Hyperparams h = Hyperparams::isotropic(2, 0.5, 1.3, 0.05);
    const GpModel m = GpModel::build(x, y, h);
    VectorXd far(2);
    far << 40.0, -40.0;
    const Prediction p = m.predict(far);
    CHECK(std::abs(p.mean) < 1e-12);
    CHECK(p.variance == doctest::Approx(1.3 * 1.3).epsilon(1e-12));

    const GpModel empty = GpModel::prior(h);
    const Prediction q = empty.predict(x.row(0).transpose());
    CHECK(q.mean == 0.0);
    CHECK(q.variance == doctest::Approx(1.69));
}

TEST_CASE("noise-free posterior interpolates the training targets") {
    std::mt19937_64 rng(5);
    const MatrixXd x = random_inputs(rng, 15, 3);
    const VectorXd y = smooth_targets(x, rng, 0.0);
    const Hyperparams h = Hyperparams::isotropic(3, 0.7, 1.0, 0.0);
    const GpModel m = GpModel::build(x, y, h);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Prediction p = m.predict(x.row(i).transpose());
        CHECK(p.mean == doctest::Approx(y[i]).epsilon(1e-6));
        CHECK(p.variance < 1e-6);
    }
}

TEST_CASE("posterior variance lies in [0, sf^2]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d = 1 + trial % 4;
        const Hyperparams h = random_hyper(rng, d);
        const MatrixXd x = random_inputs(rng, 40, d);
        const GpModel m = GpModel::build(x, smooth_targets(x, rng, 0.05), h);
        const MatrixXd probe = random_inputs(rng, 50, d, -2.0, 2.0);
        for (Eigen::Index i = 0; i < probe.rows(); ++i) {
            const double v = m.predict(probe.row(i).transpose()).variance;
            CHECK(v >= 0.0);
            CHECK(v <= m.signal_variance() * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("NLL analytic gradient matches central differences") {
    std::mt19937_64 rng(13);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d = 1 + trial % 4;
        const MatrixXd x = random_inputs(rng, 20 + trial, d);
        const VectorXd y = smooth_targets(x, rng, 0.1);
        const Hyperparams hp = random_hyper(rng, d);
        const VectorXd theta = hp.to_log();
        const NllResult r = negative_log_marginal_likelihood(x, y, hp);
        VectorXd fd(theta.size());
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            VectorXd tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            fd[k] = (negative_log_marginal_likelihood(x, y, Hyperparams::from_log(tp)).value -
                     negative_log_marginal_likelihood(x, y, Hyperparams::from_log(tm)).value) /
                    (2.0 * h);
        }
        const double e = rel_err(r.gradient, fd);
        worst = std::max(worst, e);
        CHECK_MESSAGE(e < 1e-5, "trial " << trial);
    }
    MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("NLL hand value for a single point") {
    MatrixXd x(1, 1);
    x << 0.3;
    VectorXd y(1);
    y << 0.5;
    const Hyperparams h = Hyperparams::isotropic(1, 1.0, 1.0, 0.5);
    // A = 1 + 0.25 (+ 1e-8 jitter)
    const double a = 1.25 + 1e-8;
    const double expect = 0.5 * 0.25 / a + 0.5 * std::log(a) + 0.5 * std::log(2.0 * M_PI);
    CHECK(negative_log_marginal_likelihood(x, y, h).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("incremental updates agree with a batch rebuild") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index d = 2 + trial % 3;
        const Hyperparams h = random_hyper(rng, d);
        const MatrixXd x = random_inputs(rng, 60, d);
        const VectorXd y = smooth_targets(x, rng, 0.05);
        GpModel inc = GpModel::build(x.topRows(20), y.head(20), h);
        inc = add_observations(inc, x.middleRows(20, 1), y.segment(20, 1));
        inc = add_observations(inc, x.bottomRows(39), y.tail(39));
        const GpModel batch = GpModel::build(x, y, h);
        const MatrixXd probe = random_inputs(rng, 30, d);
        for (Eigen::Index i = 0; i < probe.rows(); ++i) {
            const Prediction a = inc.predict(probe.row(i).transpose());
            const Prediction b = batch.predict(probe.row(i).transpose());
            CHECK(std::abs(a.mean - b.mean) < 1e-8);
            CHECK(std::abs(a.variance - b.variance) < 1e-8);
        }
    }
}

TEST_CASE("add_observations respects the sliding window") {
    std::mt19937_64 rng(19);
    const Hyperparams h = Hyperparams::isotropic(2, 0.5, 1.0, 0.1);
    ModelOptions o;
    o.max_points = 50;
    const MatrixXd x = random_inputs(rng, 80, 2);
    const VectorXd y = smooth_targets(x, rng, 0.05);
    GpModel m = GpModel::build(x.topRows(45), y.head(45), h, o);
    m = add_observations(m, x.bottomRows(35), y.tail(35));
    REQUIRE(m.size() == 50);
    CHECK(m.inputs() == x.bottomRows(50));
    const GpModel batch = GpModel::build(x, y, h, o);
    CHECK(batch.size() == 50);
    VectorXd p(2);
    p << 0.1, -0.2;
    CHECK(std::abs(batch.mean(p) - m.mean(p)) < 1e-8);
}

TEST_CASE("with_target matches a rebuild with the changed target") {
    std::mt19937_64 rng(23);
    const Hyperparams h = random_hyper(rng, 3);
    const MatrixXd x = random_inputs(rng, 30, 3);
    VectorXd y = smooth_targets(x, rng, 0.05);
    const GpModel m = GpModel::build(x, y, h).with_target(4, 2.5);
    y[4] = 2.5;
    const GpModel b = GpModel::build(x, y, h);
    CHECK((m.alpha() - b.alpha()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("jitter escalates on a singular Gram matrix and gives up past the cap") {
    // Fifty points under a huge lengthscale: K is numerically rank one.
    MatrixXd x(50, 1);
    for (int i = 0; i < 50; ++i) x(i, 0) = i / 49.0;
    const VectorXd y = VectorXd::Ones(50);
    const Hyperparams h = Hyperparams::isotropic(1, 1e3, 2.0, 0.0);

    ModelOptions tight;
    tight.jitter = {1e-20, 1e-19, 10.0};
    CHECK_THROWS_AS(GpModel::build(x, y, h, tight), IllConditionedKernel);

    ModelOptions escalate;
    escalate.jitter = {1e-20, 1e-2, 10.0};
    const GpModel m = GpModel::build(x, y, h, escalate);
    CHECK(m.jitter() > 1e-20 * 4.0);
    CHECK(m.jitter() <= 1e-2 * 4.0 * (1.0 + 1e-12));

    const GpModel d = GpModel::build(x, y, h);
    CHECK(d.jitter() >= 1e-8 * 4.0 * (1.0 - 1e-12));
    CHECK(d.jitter() <= 1e-2 * 4.0 * (1.0 + 1e-12));
}

TEST_CASE("contract violations") {
    Hyperparams bad = Hyperparams::isotropic(2, 1.0, 1.0, 0.1);
    bad.lengthscales[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    const Hyperparams h = Hyperparams::isotropic(2, 1.0, 1.0, 0.1);
    CHECK_THROWS_AS(GpModel::build(MatrixXd::Zero(3, 3), VectorXd::Zero(3), h), ContractViolation);
    CHECK_THROWS_AS(GpModel::build(MatrixXd::Zero(3, 2), VectorXd::Zero(4), h), ContractViolation);
    MatrixXd nan = MatrixXd::Zero(2, 2);
    nan(0, 0) = std::nan("");
    CHECK_THROWS_AS(GpModel::build(nan, VectorXd::Zero(2), h), ContractViolation);
}

TEST_CASE("hyperparameter fit lowers the NLL and finds the relevant input") {
    std::mt19937_64 rng(29);
    // y depends on the first input only.
    const MatrixXd x = random_inputs(rng, 80, 2);
    std::normal_distribution<double> n(0.0, 0.02);
    VectorXd y(80);
    for (int i = 0; i < 80; ++i) y[i] = std::sin(3.0 * x(i, 0)) + n(rng);
    const Hyperparams init = Hyperparams::isotropic(2, 1.0, 1.0, 0.3);
    FitOptions o;
    o.restarts = 3;
    o.seed = 4;
    const FitResult r = fit_detailed(x, y, init, o);
    CHECK(r.nll < negative_log_marginal_likelihood(x, y, init).value);
    CHECK(r.model.hyper().lengthscales[1] > 3.0 * r.model.hyper().lengthscales[0]);
    CHECK(r.model.hyper().noise_std == doctest::Approx(0.02).epsilon(0.5));
    CHECK(r.restarts.size() == 3);

    // Same seed, same answer.
    const FitResult again = fit_detailed(x, y, init, o);
    CHECK(again.nll == r.nll);
}

TEST_CASE("text round trip rebuilds the same model") {
    std::mt19937_64 rng(31);
    const Hyperparams h = random_hyper(rng, 3);
    const MatrixXd x = random_inputs(rng, 25, 3);
    const GpModel m = GpModel::build(x, smooth_targets(x, rng, 0.1), h);
    std::stringstream ss;
    write_text(ss, m);
    const GpModel r = read_text(ss);
    CHECK(r.inputs() == m.inputs());
    CHECK(r.targets() == m.targets());
    CHECK(r.hyper().lengthscales == m.hyper().lengthscales);
    const VectorXd p = random_inputs(rng, 1, 3).row(0).transpose();
    CHECK(r.predict(p).mean == m.predict(p).mean);
    CHECK(r.predict(p).variance == m.predict(p).variance);

    std::stringstream bad("gp_model 9\n");
    CHECK_THROWS_AS(read_text(bad), LoadError);
    std::string text = ss.str();
    std::stringstream trunc(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_text(trunc), LoadError);
}
