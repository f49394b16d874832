#include "teadnn/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace teadnn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size()) {
        throw std::invalid_argument("trace line " + std::to_string(line) + ": bad number '" + field + "'");
    }
    return v;
}

}  // namespace

PowerTrace::PowerTrace(std::vector<PowerSample> samples) : samples_(std::move(samples)) {
    if (samples_.size() < 2) throw std::invalid_argument("power trace needs at least 2 samples");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (!std::isfinite(s.t_ms) || !std::isfinite(s.power_w)) {
            throw std::invalid_argument("power trace sample " + std::to_string(i) + " is not finite");
        }
        if (s.power_w < 0.0) throw std::invalid_argument("power trace sample " + std::to_string(i) + " is negative");
        if (i > 0 && !(s.t_ms > samples_[i - 1].t_ms)) {
            throw std::invalid_argument("power trace timestamps must strictly increase (sample " +
                                        std::to_string(i) + ")");
        }
    }
}

double PowerTrace::power_at(double t_ms) const {
    if (t_ms < start_ms() || t_ms > end_ms()) throw std::out_of_range("power_at: time outside trace");
    const auto it = std::lower_bound(samples_.begin(), samples_.end(), t_ms,
                                     [](const PowerSample& s, double t) { return s.t_ms < t; });
    if (it->t_ms == t_ms) return it->power_w;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t_ms - lo.t_ms) / (hi.t_ms - lo.t_ms);
    return lo.power_w + w * (hi.power_w - lo.power_w);
}

PowerTrace read_trace_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    std::vector<PowerSample> samples;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (!header) {
            if (line != "t_ms,power_w") throw std::invalid_argument("trace CSV header must be 't_ms,power_w'");
            header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw std::invalid_argument("trace line " + std::to_string(lineno) + ": expected two columns");
        }
        samples.push_back({parse_number(trim(line.substr(0, comma)), lineno),
                           parse_number(trim(line.substr(comma + 1)), lineno)});
    }
    if (!header) throw std::invalid_argument("trace CSV is empty");
    return PowerTrace(std::move(samples));
}

PowerTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file " + path.string());
    return read_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const PowerTrace& trace) {
    out << "t_ms,power_w\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : trace.samples()) out << s.t_ms << ',' << s.power_w << '\n';
}

WorkingWindow segment_trace(const PowerTrace& trace, double threshold_w) {
    const auto& s = trace.samples();
    auto above = [&](const PowerSample& p) { return p.power_w >= threshold_w; };
    const auto first = std::find_if(s.begin(), s.end(), above);
    if (first == s.end()) throw std::runtime_error("no trace sample reaches the threshold");
    const auto last = std::find_if(s.rbegin(), s.rend(), above);
    return {first->t_ms, last->t_ms};
}

double integrate_energy(const PowerTrace& trace, double t1_ms, double t2_ms) {
    if (!(t1_ms < t2_ms)) throw std::invalid_argument("integration window must have t1 < t2");
    if (t1_ms < trace.start_ms() || t2_ms > trace.end_ms()) {
        throw std::out_of_range("integration window lies outside the trace");
    }
    const auto& s = trace.samples();
    double t_prev = t1_ms;
    double p_prev = trace.power_at(t1_ms);
    double area = 0.0;  // W * ms
    for (const auto& sample : s) {
        if (sample.t_ms <= t1_ms) continue;
        if (sample.t_ms >= t2_ms) break;
        area += 0.5 * (p_prev + sample.power_w) * (sample.t_ms - t_prev);
        t_prev = sample.t_ms;
        p_prev = sample.power_w;
    }
    area += 0.5 * (p_prev + trace.power_at(t2_ms)) * (t2_ms - t_prev);
    return area / 1000.0;
}

Measurement measure_from_trace(const PowerTrace& trace, double threshold_w) {
    if (!(threshold_w > 0.0)) throw std::invalid_argument("threshold must be positive");
    const auto w = segment_trace(trace, threshold_w);
    Measurement m;
    m.t1_ms = w.t1_ms;
    m.t2_ms = w.t2_ms;
    m.energy_j = integrate_energy(trace, w.t1_ms, w.t2_ms);
    m.time_s = (w.t2_ms - w.t1_ms) / 1000.0;
    return m;
}

}  // namespace teadnn
