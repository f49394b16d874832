#include "teadnn/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace teadnn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
    const Eigen::VectorXd norms = X.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * X * X.transpose();
    d.colwise() += norms;
    d.rowwise() += norms.transpose();
    return d.cwiseMax(0.0);
}

Eigen::MatrixXd covariance_from_distances(const Eigen::MatrixXd& d2, const KernelParams& p) {
    const double inv = -0.5 / (p.lengthscale * p.lengthscale);
    Eigen::MatrixXd k = p.signal_variance * (d2 * inv).array().exp().matrix();
    k.diagonal().array() += p.noise_variance;
    return k;
}

double lml_from_factor(const CovarianceFactor& f, const Eigen::VectorXd& y, Eigen::VectorXd* alpha_out = nullptr) {
    Eigen::VectorXd alpha = f.llt.solve(y);
    const Eigen::MatrixXd& lower = f.llt.matrixLLT();
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    const double n = static_cast<double>(y.size());
    const double lml = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * n * kLog2Pi;
    if (alpha_out) *alpha_out = std::move(alpha);
    return lml;
}

// Bounded Nelder-Mead over log parameters; points are clamped into the box.
struct Box {
    std::array<double, 3> lo, hi;
    void clamp(std::array<double, 3>& x) const {
        for (int i = 0; i < 3; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    }
};

template <class F>
std::pair<std::array<double, 3>, double> nelder_mead(F&& f, std::array<double, 3> x0, const Box& box, int max_evals) {
    using P = std::array<double, 3>;
    std::array<P, 4> simplex;
    std::array<double, 4> val;
    simplex[0] = x0;
    for (int i = 0; i < 3; ++i) {
        P p = x0;
        const double step = 0.25 * (box.hi[i] - box.lo[i]);
        p[i] = (p[i] + step <= box.hi[i]) ? p[i] + step : p[i] - step;
        simplex[static_cast<std::size_t>(i + 1)] = p;
    }
    int evals = 0;
    auto eval = [&](P& p) {
        box.clamp(p);
        ++evals;
        return f(p);
    };
    for (std::size_t i = 0; i < 4; ++i) val[i] = eval(simplex[i]);

    std::array<std::size_t, 4> order{0, 1, 2, 3};
    while (evals < max_evals) {
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return val[a] < val[b]; });
        const auto best = order[0], worst = order[3], second = order[2];
        if (std::abs(val[worst] - val[best]) < 1e-9 * (1.0 + std::abs(val[best]))) break;

        P centroid{0, 0, 0};
        for (std::size_t k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i) centroid[i] += simplex[order[k]][i] / 3.0;
        auto along = [&](double t) {
            P p;
            for (int i = 0; i < 3; ++i) p[i] = centroid[i] + t * (simplex[worst][i] - centroid[i]);
            return p;
        };

        P xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < val[best]) {
            P xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                val[worst] = fe;
            } else {
                simplex[worst] = xr;
                val[worst] = fr;
            }
        } else if (fr < val[second]) {
            simplex[worst] = xr;
            val[worst] = fr;
        } else {
            P xc = fr < val[worst] ? along(-0.5) : along(0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, val[worst])) {
                simplex[worst] = xc;
                val[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                for (std::size_t k = 1; k < 4; ++k) {
                    auto& p = simplex[order[k]];
                    for (int i = 0; i < 3; ++i) p[i] = simplex[best][i] + 0.5 * (p[i] - simplex[best][i]);
                    val[order[k]] = eval(p);
                }
            }
        }
    }
    const auto it = std::min_element(val.begin(), val.end());
    return {simplex[static_cast<std::size_t>(it - val.begin())], *it};
}

}  // namespace

int feature_dimension(int num_blocks) {
    int dim = 0;
    for (int b = 0; b < num_blocks; ++b) dim += 2 * num_inputs_at(b) + 2 * kNumOperations;
    return dim;
}

Eigen::VectorXd featurize(const CellGenome& g) {
    require_valid(g, g.num_blocks());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(feature_dimension(g.num_blocks()));
    int offset = 0;
    for (int b = 0; b < g.num_blocks(); ++b) {
        const auto& blk = g.blocks[static_cast<std::size_t>(b)];
        const int n_in = num_inputs_at(b);
        x[offset + blk.input1] = 1.0;
        offset += n_in;
        x[offset + blk.input2] = 1.0;
        offset += n_in;
        x[offset + code(blk.op1)] = 1.0;
        offset += kNumOperations;
        x[offset + code(blk.op2)] = 1.0;
        offset += kNumOperations;
    }
    return x;
}

double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& p) {
    if (a.size() != b.size()) throw std::invalid_argument("kernel: feature dimension mismatch");
    const double d2 = (a - b).squaredNorm();
    return p.signal_variance * std::exp(-d2 / (2.0 * p.lengthscale * p.lengthscale));
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X, const KernelParams& p) {
    return covariance_from_distances(squared_distances(X), p);
}

CovarianceFactor factorize(const Eigen::MatrixXd& cov) {
    CovarianceFactor f;
    f.llt.compute(cov);
    if (f.llt.info() == Eigen::Success) return f;
    for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
        Eigen::MatrixXd c = cov;
        c.diagonal().array() += jitter;
        f.llt.compute(c);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = jitter;
            return f;
        }
    }
    throw NotPositiveDefinite("covariance is not positive definite after jitter 1e-6");
}

double log_marginal_likelihood(const KernelParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() < 1 || X.rows() != y.size()) throw std::invalid_argument("log_marginal_likelihood: bad shapes");
    return lml_from_factor(factorize(covariance(X, p)), y);
}

GPModel GPModel::condition(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw, const KernelParams& p,
                           bool standardize) {
    if (X.rows() < 1 || X.rows() != y_raw.size()) throw std::invalid_argument("GPModel: bad training shapes");
    GPModel m;
    m.X_ = X;
    m.params_ = p;
    if (standardize) {
        m.y_mean_ = y_raw.mean();
        const double var = (y_raw.array() - m.y_mean_).square().mean();
        m.y_std_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    m.y_ = (y_raw.array() - m.y_mean_) / m.y_std_;
    m.factor_ = factorize(covariance(X, p));
    m.lml_ = lml_from_factor(m.factor_, m.y_, &m.alpha_);
    return m;
}

GPModel GPModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw, const FitOptions& opts) {
    if (X.rows() < 2) throw std::invalid_argument("GPModel::fit: need at least 2 observations");
    if (X.rows() != y_raw.size()) throw std::invalid_argument("GPModel::fit: bad training shapes");

    // Standardization only; parameters are chosen below.
    GPModel probe = condition(X, y_raw, KernelParams{}, true);
    const Eigen::VectorXd& y = probe.y_;
    const Eigen::MatrixXd d2 = squared_distances(X);

    const Box box{{std::log(opts.lengthscale_min), std::log(opts.signal_min), std::log(opts.noise_min)},
                  {std::log(opts.lengthscale_max), std::log(opts.signal_max), std::log(opts.noise_max)}};
    auto to_params = [](const std::array<double, 3>& x) {
        return KernelParams{std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
    };
    auto neg_lml = [&](const std::array<double, 3>& x) {
        try {
            return -lml_from_factor(factorize(covariance_from_distances(d2, to_params(x))), y);
        } catch (const NotPositiveDefinite&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Rng rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::array<double, 3> best_x{};
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < std::max(1, opts.starts); ++s) {
        std::array<double, 3> x0;
        for (int i = 0; i < 3; ++i) x0[i] = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
        auto [x, v] = nelder_mead(neg_lml, x0, box, opts.max_evals_per_start);
        if (v < best) {
            best = v;
            best_x = x;
        }
    }
    if (!std::isfinite(best)) throw NotPositiveDefinite("GPModel::fit: no admissible kernel parameters");
    return condition(X, y_raw, to_params(best_x), true);
}

Prediction GPModel::predict(const Eigen::VectorXd& x) const {
    if (x.size() != X_.cols()) throw std::invalid_argument("GPModel::predict: feature dimension mismatch");
    const double inv = -0.5 / (params_.lengthscale * params_.lengthscale);
    const Eigen::VectorXd d2 = (X_.rowwise() - x.transpose()).rowwise().squaredNorm();
    const Eigen::VectorXd ks = params_.signal_variance * (d2 * inv).array().exp().matrix();
    const double mean = ks.dot(alpha_);
    const Eigen::VectorXd v = factor_.llt.matrixL().solve(ks);
    const double var = std::max(0.0, params_.signal_variance - v.squaredNorm());
    return {mean * y_std_ + y_mean_, var * y_std_ * y_std_};
}

}  // namespace teadnn
