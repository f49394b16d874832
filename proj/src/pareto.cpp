#include "teadnn/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "teadnn/kernels.hpp"

namespace teadnn {

std::string_view to_string(Objective o) {
    switch (o) {
        case Objective::error: return "error";
        case Objective::energy: return "energy";
        case Objective::time: return "time";
    }
    return "?";
}

std::optional<Objective> objective_from_string(std::string_view s) {
    if (s == "error") return Objective::error;
    if (s == "energy" || s == "energy_j") return Objective::energy;
    if (s == "time" || s == "time_s") return Objective::time;
    return std::nullopt;
}

double ObjectiveVector::operator[](Objective o) const {
    switch (o) {
        case Objective::error: return error;
        case Objective::energy: return energy_j;
        case Objective::time: return time_s;
    }
    return 0.0;
}

double& ObjectiveVector::operator[](Objective o) {
    switch (o) {
        case Objective::error: return error;
        case Objective::energy: return energy_j;
        case Objective::time: break;
    }
    return time_s;
}

void ObjectiveVector::validate() const {
    if (!std::isfinite(error) || !std::isfinite(energy_j) || !std::isfinite(time_s)) {
        throw std::invalid_argument("objective values must be finite");
    }
    if (error < 0.0 || error > 1.0) throw std::invalid_argument("error must lie in [0, 1]");
    if (energy_j < 0.0) throw std::invalid_argument("energy must be non-negative");
    if (time_s < 0.0) throw std::invalid_argument("time must be non-negative");
}

ObjectiveSubset::ObjectiveSubset(std::initializer_list<Objective> objs) {
    mask_.fill(false);
    for (auto o : objs) mask_[static_cast<std::size_t>(o)] = true;
    if (size() == 0) throw std::invalid_argument("objective subset must be non-empty");
}

ObjectiveSubset ObjectiveSubset::parse(std::string_view s) {
    ObjectiveSubset out;
    out.mask_.fill(false);
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto token = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (!token.empty()) {
            const auto o = objective_from_string(token);
            if (!o) throw std::invalid_argument("unknown objective: " + std::string(token));
            out.mask_[static_cast<std::size_t>(*o)] = true;
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.size() == 0) throw std::invalid_argument("objective subset must be non-empty");
    return out;
}

int ObjectiveSubset::size() const { return static_cast<int>(std::count(mask_.begin(), mask_.end(), true)); }

std::vector<Objective> ObjectiveSubset::members() const {
    std::vector<Objective> out;
    for (int i = 0; i < kNumObjectives; ++i) {
        if (mask_[static_cast<std::size_t>(i)]) out.push_back(static_cast<Objective>(i));
    }
    return out;
}

std::string ObjectiveSubset::str() const {
    std::string out;
    for (auto o : members()) {
        if (!out.empty()) out += ',';
        out += to_string(o);
    }
    return out;
}

ObjPoint project(const ObjectiveVector& v, const ObjectiveSubset& subset) {
    ObjPoint p{};
    for (auto o : subset.members()) p[static_cast<std::size_t>(o)] = v[o];
    return p;
}

ObjPoint pack(const ObjectiveVector& v, const ObjectiveSubset& subset) {
    ObjPoint p{};
    std::size_t k = 0;
    for (auto o : subset.members()) p[k++] = v[o];
    return p;
}

bool dominates(const ObjPoint& a, const ObjPoint& b) {
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b, const ObjectiveSubset& subset) {
    return dominates(project(a, subset), project(b, subset));
}

std::vector<bool> pareto_mask(std::span<const ObjPoint> points) {
    // The all-pairs scan only pays for threads on larger inputs.
    return points.size() >= 256 ? kernels::parallel::pareto_mask(points) : kernels::serial::pareto_mask(points);
}

std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> values, const ObjectiveSubset& subset) {
    std::vector<ObjPoint> pts;
    pts.reserve(values.size());
    for (const auto& v : values) pts.push_back(project(v, subset));
    const auto mask = pareto_mask(pts);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.push_back(i);
    }
    return out;
}

namespace {

bool inside(const ObjPoint& p, const ObjPoint& ref, int dims) {
    for (int i = 0; i < dims; ++i) {
        if (!(p[static_cast<std::size_t>(i)] < ref[static_cast<std::size_t>(i)])) return false;
    }
    return true;
}

// Sweep over points sorted by the first coordinate.
double area_2d(std::vector<std::pair<double, double>> pts, double ref_x, double ref_y) {
    std::sort(pts.begin(), pts.end());
    double area = 0.0;
    double best_y = ref_y;
    for (const auto& [x, y] : pts) {
        if (y < best_y) {
            area += (ref_x - x) * (best_y - y);
            best_y = y;
        }
    }
    return area;
}

}  // namespace

double hypervolume(std::span<const ObjPoint> points, const ObjPoint& ref, int dims) {
    if (dims < 1 || dims > 3) throw std::invalid_argument("hypervolume: dims must be 1, 2 or 3");
    std::vector<ObjPoint> pts;
    for (const auto& p : points) {
        if (inside(p, ref, dims)) pts.push_back(p);
    }
    if (pts.empty()) return 0.0;

    if (dims == 1) {
        double lo = ref[0];
        for (const auto& p : pts) lo = std::min(lo, p[0]);
        return ref[0] - lo;
    }
    if (dims == 2) {
        std::vector<std::pair<double, double>> xy;
        xy.reserve(pts.size());
        for (const auto& p : pts) xy.emplace_back(p[0], p[1]);
        return area_2d(std::move(xy), ref[0], ref[1]);
    }

    // Slice along the third coordinate; each slab is a 2-D problem.
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[2] < b[2]; });
    double volume = 0.0;
    std::vector<std::pair<double, double>> active;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        active.emplace_back(pts[i][0], pts[i][1]);
        const double next_z = i + 1 < pts.size() ? pts[i + 1][2] : ref[2];
        const double depth = next_z - pts[i][2];
        if (depth > 0.0) volume += depth * area_2d(active, ref[0], ref[1]);
    }
    return volume;
}

double hypervolume(std::span<const ObjectiveVector> points, const ObjectiveVector& ref, const ObjectiveSubset& subset) {
    std::vector<ObjPoint> packed;
    packed.reserve(points.size());
    for (const auto& p : points) packed.push_back(pack(p, subset));
    return hypervolume(packed, pack(ref, subset), subset.size());
}

}  // namespace teadnn
