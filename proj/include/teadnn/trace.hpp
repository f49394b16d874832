#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace teadnn {

struct PowerSample {
    double t_ms = 0.0;
    double power_w = 0.0;
};

/// Sampled power curve. Timestamps strictly increase, powers are
/// non-negative, and there are at least two samples.
class PowerTrace {
public:
    explicit PowerTrace(std::vector<PowerSample> samples);

    const std::vector<PowerSample>& samples() const { return samples_; }
    double start_ms() const { return samples_.front().t_ms; }
    double end_ms() const { return samples_.back().t_ms; }
    /// Linear interpolation between neighbouring samples.
    double power_at(double t_ms) const;

private:
    std::vector<PowerSample> samples_;
};

/// CSV with header `t_ms,power_w`.
PowerTrace read_trace_csv(std::istream& in);
PowerTrace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(std::ostream& out, const PowerTrace& trace);

struct WorkingWindow {
    double t1_ms = 0.0;
    double t2_ms = 0.0;
};

/// First and last sample at or above the threshold. No interpolation
/// between samples.
WorkingWindow segment_trace(const PowerTrace& trace, double threshold_w);

/// Trapezoidal integral of power over [t1, t2] in joules.
double integrate_energy(const PowerTrace& trace, double t1_ms, double t2_ms);

struct Measurement {
    double time_s = 0.0;
    double energy_j = 0.0;
    double t1_ms = 0.0;
    double t2_ms = 0.0;
};

Measurement measure_from_trace(const PowerTrace& trace, double threshold_w);

}  // namespace teadnn
