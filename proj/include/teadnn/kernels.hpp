#pragma once

// Data-parallel hot loops. Each kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel` with
// identical results; tests hold them equal and bench/ compares speed.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "teadnn/evaluator.hpp"
#include "teadnn/pareto.hpp"

namespace teadnn {

class GPModel;

namespace kernels {

/// Inputs shared by every candidate when scoring an acquisition pool.
/// Objective values live in the surrogate's (transformed) space.
struct HviProblem {
    std::vector<const GPModel*> models;  // one per packed coordinate
    std::vector<ObjPoint> front;         // packed to models.size() coordinates
    ObjPoint ref{};
    Eigen::MatrixXd normals;             // mc_samples x models.size() standard normal draws

    int dims() const { return static_cast<int>(models.size()); }
};

/// Exclusive hypervolume that `sample` adds to `front` (all packed).
double hypervolume_improvement(std::span<const ObjPoint> front, const ObjPoint& sample, const ObjPoint& ref,
                               int dims);

namespace serial {
std::vector<bool> pareto_mask(std::span<const ObjPoint> points);
std::vector<double> expected_hvi(const HviProblem& problem, std::span<const Eigen::VectorXd> candidates);
std::vector<ObjectiveVector> synthetic_objectives(std::span<const CellGenome> genomes, const MacroConfig& macro,
                                                  const DeviceProfile& profile, std::uint64_t seed);
}  // namespace serial

namespace parallel {
std::vector<bool> pareto_mask(std::span<const ObjPoint> points);
std::vector<double> expected_hvi(const HviProblem& problem, std::span<const Eigen::VectorXd> candidates);
std::vector<ObjectiveVector> synthetic_objectives(std::span<const CellGenome> genomes, const MacroConfig& macro,
                                                  const DeviceProfile& profile, std::uint64_t seed);
}  // namespace parallel

}  // namespace kernels
}  // namespace teadnn
