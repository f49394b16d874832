#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "teadnn/network.hpp"
#include "teadnn/pareto.hpp"
#include "teadnn/search_space.hpp"

namespace teadnn {

/// Coefficients of the synthetic cost model for one device.
///   time   = flops / throughput
///   energy = time * power + params * energy_per_param
///   error  = e_min + (e_max - e_min) * exp(-params / kappa) (+ noise)
struct SyntheticCoefficients {
    double throughput_flops = 1e12;
    double power_w = 1.0;
    double energy_per_param_j = 0.0;
    double error_min = 0.05;
    double error_max = 0.60;
    double kappa_params = 4.0e5;
    double noise_amplitude = 0.0;
};

struct DeviceProfile {
    std::string name;
    double threshold_w = 1.0;  // working/idle separation on power traces
    std::string notes;
    SyntheticCoefficients synthetic;
};

/// titanx (80 W), jetson-tx2 (1 W), movidius-ncs (0.45 W).
const std::vector<DeviceProfile>& builtin_profiles();
const DeviceProfile& find_profile(std::string_view name);

class EvaluationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps a genome to measured objectives on one device.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual ObjectiveVector evaluate(const CellGenome& genome) = 0;
    virtual std::string device() const = 0;
    /// Identity of the evaluator used to detect config/log mismatches.
    virtual nlohmann::ordered_json describe() const = 0;
};

ObjectiveVector synthetic_evaluate(const CellGenome& genome, const MacroConfig& macro, const DeviceProfile& profile,
                                   std::uint64_t seed = 0);

class SyntheticEvaluator final : public Evaluator {
public:
    SyntheticEvaluator(DeviceProfile profile, MacroConfig macro, std::uint64_t seed = 0)
        : profile_(std::move(profile)), macro_(macro), seed_(seed) {}

    ObjectiveVector evaluate(const CellGenome& genome) override {
        return synthetic_evaluate(genome, macro_, profile_, seed_);
    }
    std::string device() const override { return profile_.name; }
    nlohmann::ordered_json describe() const override;

    const DeviceProfile& profile() const { return profile_; }
    const MacroConfig& macro() const { return macro_; }

private:
    DeviceProfile profile_;
    MacroConfig macro_;
    std::uint64_t seed_;
};

struct TrainingConfig {
    int epochs = 10;
    int batch_size = 32;
    std::string optimizer = "rmsprop";
    double momentum = 0.9;
    double decay = 0.9;
    double lr = 0.01;
    double lr_decay = 0.94;
    int lr_decay_every_epochs = 2;
    double weight_decay = 0.00004;
};

nlohmann::ordered_json training_to_json(const TrainingConfig& t);
TrainingConfig training_from_json(const nlohmann::ordered_json& j);

struct EvaluationRequest {
    CellGenome genome;
    int N = 2;
    int F = 24;
    int num_classes = 10;
    TrainingConfig training;
    std::string device;
};

nlohmann::ordered_json request_to_json(const EvaluationRequest& r);

/// Either direct measurements or a trace to post-process.
struct EvaluationResponse {
    double error = 0.0;
    std::optional<double> energy_j;
    std::optional<double> time_s;
    std::optional<std::string> trace_path;
    std::optional<double> threshold_w;
};

EvaluationResponse response_from_json(const nlohmann::ordered_json& j);

struct AdapterSpec {
    std::string command;               // run through /bin/sh -c
    std::filesystem::path workdir;
    double timeout_s = 3600.0;
};

/// Writes request.json, runs the adapter, reads response.json. Trace
/// responses are measured with the response threshold, or `default_threshold_w`.
ObjectiveVector external_evaluate(const EvaluationRequest& request, const AdapterSpec& adapter,
                                  std::optional<double> default_threshold_w = std::nullopt);

class ExternalEvaluator final : public Evaluator {
public:
    ExternalEvaluator(AdapterSpec adapter, std::string device, MacroConfig macro, TrainingConfig training = {},
                      std::optional<double> default_threshold_w = std::nullopt);

    ObjectiveVector evaluate(const CellGenome& genome) override;
    std::string device() const override { return device_; }
    nlohmann::ordered_json describe() const override;

private:
    AdapterSpec adapter_;
    std::string device_;
    MacroConfig macro_;
    TrainingConfig training_;
    std::optional<double> default_threshold_w_;
};

/// Builds an evaluator from its JSON spec:
///   {"type": "synthetic", "profile": "movidius-ncs", "seed": 0, "noise": 0.0}
///   {"type": "external", "command": "...", "workdir": "...", "timeout_s": 3600,
///    "device": "jetson-tx2", "threshold_w": 1.0}
std::unique_ptr<Evaluator> make_evaluator(const nlohmann::ordered_json& spec, const MacroConfig& macro,
                                          const TrainingConfig& training = {});

}  // namespace teadnn
