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

#pragma once

// Gaussian-process regression with a squared-exponential ARD kernel.
//
// Conventions used throughout:
//   k(x, x') = sf^2 exp(-1/2 sum_d ((x_d - x'_d) / l_d)^2)
//   A        = K + (sn^2 + jitter) I
// The noise hyperparameter enters the diagonal squared. The jitter is a
// multiple of sf^2 that starts at JitterPolicy::initial and grows by
// JitterPolicy::factor whenever a Cholesky factorization fails.
//
// Hyperparameters are optimized in log space, ordered as
//   [log l_1, ..., log l_D, log sf, log sn].

#include "coplank/errors.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace coplank::gp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Hyperparams {
    VectorXd lengthscales;
    double signal_std = 1.0;
    double noise_std = 0.1;

    Eigen::Index dim() const { return lengthscales.size(); }

    /// Throws ContractViolation unless lengthscales > 0, signal_std > 0 and noise_std >= 0.
    void validate() const;

    /// Packed log-parameter vector. A zero noise_std maps to the lower log bound.
    VectorXd to_log() const;
    static Hyperparams from_log(const VectorXd& log_params);

    static Hyperparams isotropic(Eigen::Index dim, double lengthscale, double signal_std,
                                 double noise_std);
};

struct JitterPolicy {
    double initial = 1e-8; ///< relative to sf^2
    double max = 1e-2;
    double factor = 10.0;
};

struct ModelOptions {
    /// Sliding-window cap on the training set; older rows are dropped first.
    Eigen::Index max_points = 600;
    JitterPolicy jitter;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

double kernel_eval(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& x2,
                   const Hyperparams& hyper);

/// Immutable trained GP. Copies are cheap relative to refactorization and
/// every mutating operation returns a new model.
class GpModel {
public:
    /// Empty model of dimension 0; only useful as a placeholder.
    GpModel() = default;

    /// Zero-data model: the prior.
    static GpModel prior(Hyperparams hyper, ModelOptions options = {});

    /// Factorizes the Gram matrix (with jitter escalation) and precomputes alpha.
    /// When inputs exceed options.max_points only the most recent rows are kept.
    static GpModel build(MatrixXd inputs, VectorXd targets, Hyperparams hyper,
                         ModelOptions options = {});

    Eigen::Index size() const { return inputs_.rows(); }
    Eigen::Index dim() const { return hyper_.dim(); }
    bool empty() const { return size() == 0; }

    const MatrixXd& inputs() const { return inputs_; }
    const VectorXd& targets() const { return targets_; }
    const Hyperparams& hyper() const { return hyper_; }
    const ModelOptions& options() const { return options_; }
    const VectorXd& alpha() const { return alpha_; }
    /// Lower Cholesky factor of K + (sn^2 + jitter) I.
    const MatrixXd& chol() const { return chol_; }
    /// Absolute jitter variance added to the diagonal.
    double jitter() const { return jitter_; }
    double signal_variance() const { return hyper_.signal_std * hyper_.signal_std; }

    /// k(x, X) for every training row.
    VectorXd kernel_vector(const Eigen::Ref<const VectorXd>& x) const;

    double mean(const Eigen::Ref<const VectorXd>& x) const;
    Prediction predict(const Eigen::Ref<const VectorXd>& x) const;

    /// Copy with target i replaced; inputs and factorization are reused.
    GpModel with_target(Eigen::Index i, double value) const;

private:
    friend GpModel add_observations(const GpModel&, const MatrixXd&, const VectorXd&);

    void factorize();
    void solve_alpha();
    void check_dim(Eigen::Index n) const;

    MatrixXd inputs_;
    VectorXd targets_;
    Hyperparams hyper_;
    ModelOptions options_;
    VectorXd inv_ls2_;
    VectorXd alpha_;
    MatrixXd chol_;
    double jitter_ = 0.0;
};

struct NllResult {
    double value = 0.0;
    VectorXd gradient; ///< w.r.t. the packed log parameters
};

/// 1/2 y^T A^-1 y + 1/2 log|A| + N/2 log 2pi and its analytic gradient.
NllResult negative_log_marginal_likelihood(const MatrixXd& inputs, const VectorXd& targets,
                                           const Hyperparams& hyper, const JitterPolicy& jitter = {});

struct FitOptions {
    int restarts = 4;
    int max_iters = 150;
    std::uint64_t seed = 0;
    /// Half-width of the uniform perturbation applied to log parameters for restarts > 0.
    double perturbation = 1.0;
    /// When > 0, hyperparameters are optimized on the most recent rows only;
    /// the returned model still uses every row.
    Eigen::Index max_fit_points = 0;
    /// Box on log lengthscales, log signal_std and log noise_std.
    double log_lengthscale_min = -7.0;
    double log_lengthscale_max = 7.0;
    double log_signal_min = -14.0;
    double log_signal_max = 9.0;
    double log_noise_min = -14.0;
    double log_noise_max = 9.0;
    ModelOptions model;
};

struct RestartTrace {
    double initial_nll = 0.0;
    double final_nll = 0.0;
    bool failed = false;
};

struct FitResult {
    GpModel model;
    double nll = 0.0;
    std::vector<RestartTrace> restarts;
};

/// Multi-restart gradient-based (Rprop) minimization of the NLL.
FitResult fit_detailed(const MatrixXd& inputs, const VectorXd& targets, const Hyperparams& init,
                       const FitOptions& options = {});

GpModel fit(const MatrixXd& inputs, const VectorXd& targets, const Hyperparams& init,
            const FitOptions& options = {});

/// Same result as build() on the concatenated data with unchanged
/// hyperparameters, computed with O(N^2) factor updates where possible.
GpModel add_observations(const GpModel& model, const MatrixXd& new_inputs,
                         const VectorXd& new_targets);

/// Optional per-dimension affine standardizer. Not applied anywhere by default.
struct Standardizer {
    VectorXd offset;
    VectorXd scale;

    static Standardizer from_data(const MatrixXd& data);
    MatrixXd apply(const MatrixXd& data) const;
    VectorXd apply(const Eigen::Ref<const VectorXd>& row) const;
};

} // namespace coplank::gp
