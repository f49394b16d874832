#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "teadnn/search_space.hpp"

namespace teadnn {

/// One-hot expansion of the encoded genome: each input field over its legal
/// set, each op field over the 8 operations. 120 entries for a 5-block cell.
Eigen::VectorXd featurize(const CellGenome& g);
int feature_dimension(int num_blocks);

struct KernelParams {
    double lengthscale = 1.0;
    double signal_variance = 1.0;
    double noise_variance = 1e-6;
};

/// Squared-exponential kernel on feature vectors.
double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& p);

class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factor of K + noise*I. Retries with jitter 1e-10 .. 1e-6 on
/// failure and throws NotPositiveDefinite past that.
struct CovarianceFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};
CovarianceFactor factorize(const Eigen::MatrixXd& cov);

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X, const KernelParams& p);

/// Log evidence of targets y (rows of X are feature vectors).
double log_marginal_likelihood(const KernelParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct FitOptions {
    int starts = 8;
    int max_evals_per_start = 80;
    std::uint64_t seed = 0;
    double lengthscale_min = 0.1, lengthscale_max = 100.0;
    double signal_min = 0.01, signal_max = 10.0;
    double noise_min = 1e-6, noise_max = 1.0;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

class GPModel {
public:
    /// Standardizes y and picks kernel parameters by multi-start bounded
    /// Nelder-Mead on the log marginal likelihood. Requires n >= 2.
    static GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw, const FitOptions& opts = {});

    /// Conditions on the data with fixed parameters. When `standardize` is
    /// false targets are used as given (zero prior mean).
    static GPModel condition(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw, const KernelParams& p,
                             bool standardize = true);

    Prediction predict(const Eigen::VectorXd& x) const;
    Prediction predict(const CellGenome& g) const { return predict(featurize(g)); }

    const KernelParams& params() const { return params_; }
    const Eigen::MatrixXd& features() const { return X_; }
    const Eigen::VectorXd& targets() const { return y_; }
    double target_mean() const { return y_mean_; }
    double target_std() const { return y_std_; }
    double jitter() const { return factor_.jitter; }
    double log_likelihood() const { return lml_; }
    /// Lower-triangular factor L with L L^T = K + (noise + jitter) I.
    Eigen::MatrixXd factor() const { return factor_.llt.matrixL(); }

private:
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    KernelParams params_;
    CovarianceFactor factor_;
    Eigen::VectorXd alpha_;
    double lml_ = 0.0;
};

}  // namespace teadnn
