#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace teadnn {

enum class Objective { error = 0, energy = 1, time = 2 };
inline constexpr int kNumObjectives = 3;

std::string_view to_string(Objective o);
/// Accepts "error", "energy"/"energy_j", "time"/"time_s".
std::optional<Objective> objective_from_string(std::string_view s);

struct ObjectiveVector {
    double error = 0.0;     // fraction in [0, 1]
    double energy_j = 0.0;  // joules
    double time_s = 0.0;    // seconds

    double operator[](Objective o) const;
    double& operator[](Objective o);
    void validate() const;
    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

/// Non-empty subset of the three objectives.
class ObjectiveSubset {
public:
    ObjectiveSubset() = default;  // all three
    ObjectiveSubset(std::initializer_list<Objective> objs);

    static ObjectiveSubset all() { return {}; }
    /// Comma-separated names, e.g. "error,energy".
    static ObjectiveSubset parse(std::string_view s);

    bool contains(Objective o) const { return mask_[static_cast<std::size_t>(o)]; }
    int size() const;
    std::vector<Objective> members() const;
    std::string str() const;
    friend bool operator==(const ObjectiveSubset&, const ObjectiveSubset&) = default;

private:
    std::array<bool, kNumObjectives> mask_{true, true, true};
};

/// Objective values projected onto a subset. Excluded coordinates are 0 so
/// dominance over all three coordinates equals dominance over the subset.
using ObjPoint = std::array<double, kNumObjectives>;

ObjPoint project(const ObjectiveVector& v, const ObjectiveSubset& subset);

/// a <= b on every coordinate and a != b (minimization).
bool dominates(const ObjPoint& a, const ObjPoint& b);
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b, const ObjectiveSubset& subset);

/// mask[i] is true iff no other point dominates point i.
std::vector<bool> pareto_mask(std::span<const ObjPoint> points);

/// Indices of non-dominated entries, in input order.
std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> values, const ObjectiveSubset& subset);

/// Lebesgue measure of the union of boxes [p, ref] over the first `dims`
/// coordinates (1, 2 or 3). Points not strictly better than ref on every
/// used coordinate are ignored.
double hypervolume(std::span<const ObjPoint> points, const ObjPoint& ref, int dims);

/// Convenience form over a subset; coordinates are packed into the subset's
/// member order before computing the measure.
double hypervolume(std::span<const ObjectiveVector> points, const ObjectiveVector& ref,
                   const ObjectiveSubset& subset);

/// Packs the subset's coordinates to the front of the array.
ObjPoint pack(const ObjectiveVector& v, const ObjectiveSubset& subset);

}  // namespace teadnn
