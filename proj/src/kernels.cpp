#include "teadnn/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "teadnn/gp.hpp"

namespace teadnn::kernels {

namespace {

bool weakly_dominates(const ObjPoint& a, const ObjPoint& b, int dims) {
    for (int i = 0; i < dims; ++i) {
        if (a[static_cast<std::size_t>(i)] > b[static_cast<std::size_t>(i)]) return false;
    }
    return true;
}

bool is_dominated(std::span<const ObjPoint> points, std::size_t i) {
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (j != i && dominates(points[j], points[i])) return true;
    }
    return false;
}

double candidate_ehvi(const HviProblem& problem, const Eigen::VectorXd& x) {
    const int dims = problem.dims();
    ObjPoint mean{}, sd{};
    for (int k = 0; k < dims; ++k) {
        const auto pred = problem.models[static_cast<std::size_t>(k)]->predict(x);
        mean[static_cast<std::size_t>(k)] = pred.mean;
        sd[static_cast<std::size_t>(k)] = std::sqrt(pred.variance);
    }
    const auto samples = problem.normals.rows();
    double total = 0.0;
    for (Eigen::Index m = 0; m < samples; ++m) {
        ObjPoint s{};
        for (int k = 0; k < dims; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            s[kk] = mean[kk] + sd[kk] * problem.normals(m, k);
        }
        total += hypervolume_improvement(problem.front, s, problem.ref, dims);
    }
    return samples > 0 ? total / static_cast<double>(samples) : 0.0;
}

}  // namespace

double hypervolume_improvement(std::span<const ObjPoint> front, const ObjPoint& sample, const ObjPoint& ref,
                               int dims) {
    double box = 1.0;
    for (int i = 0; i < dims; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        if (!(sample[ii] < ref[ii])) return 0.0;
        box *= ref[ii] - sample[ii];
    }
    std::vector<ObjPoint> clipped;
    clipped.reserve(front.size());
    for (const auto& f : front) {
        if (weakly_dominates(f, sample, dims)) return 0.0;
        ObjPoint c{};
        for (int i = 0; i < dims; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            c[ii] = std::max(f[ii], sample[ii]);
        }
        clipped.push_back(c);
    }
    return std::max(0.0, box - hypervolume(clipped, ref, dims));
}

namespace serial {

std::vector<bool> pareto_mask(std::span<const ObjPoint> points) {
    std::vector<bool> mask(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) mask[i] = !is_dominated(points, i);
    return mask;
}

std::vector<double> expected_hvi(const HviProblem& problem, std::span<const Eigen::VectorXd> candidates) {
    std::vector<double> out(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) out[c] = candidate_ehvi(problem, candidates[c]);
    return out;
}

std::vector<ObjectiveVector> synthetic_objectives(std::span<const CellGenome> genomes, const MacroConfig& macro,
                                                  const DeviceProfile& profile, std::uint64_t seed) {
    std::vector<ObjectiveVector> out;
    out.reserve(genomes.size());
    for (const auto& g : genomes) out.push_back(synthetic_evaluate(g, macro, profile, seed));
    return out;
}

}  // namespace serial

namespace parallel {

std::vector<bool> pareto_mask(std::span<const ObjPoint> points) {
    const auto n = static_cast<std::ptrdiff_t>(points.size());
    std::vector<char> keep(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        keep[static_cast<std::size_t>(i)] = is_dominated(points, static_cast<std::size_t>(i)) ? 0 : 1;
    }
    return {keep.begin(), keep.end()};
}

std::vector<double> expected_hvi(const HviProblem& problem, std::span<const Eigen::VectorXd> candidates) {
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
    std::vector<double> out(candidates.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        out[static_cast<std::size_t>(c)] = candidate_ehvi(problem, candidates[static_cast<std::size_t>(c)]);
    }
    return out;
}

std::vector<ObjectiveVector> synthetic_objectives(std::span<const CellGenome> genomes, const MacroConfig& macro,
                                                  const DeviceProfile& profile, std::uint64_t seed) {
    const auto n = static_cast<std::ptrdiff_t>(genomes.size());
    std::vector<ObjectiveVector> out(genomes.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = synthetic_evaluate(genomes[static_cast<std::size_t>(i)], macro, profile, seed);
    }
    return out;
}

}  // namespace parallel

}  // namespace teadnn::kernels
