#include "teadnn/evaluator.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "teadnn/trace.hpp"

namespace teadnn {

namespace {

// Peak throughput and board power follow the devices' data sheets; the
// per-parameter energy models weight traffic. Values are tuned so the
// two energy terms are of similar size for N=2, F=24 networks.
std::vector<DeviceProfile> make_builtin_profiles() {
    std::vector<DeviceProfile> out;
    out.push_back({"titanx", 80.0,
                   "GTX TITAN X: 3072 CUDA cores, 6.7 TFLOPS FP32, 12 GB GDDR5, 336.6 GB/s, 250 W",
                   {6.7e12, 250.0, 2.0e-8}});
    out.push_back({"jetson-tx2", 1.0,
                   "Jetson TX2: 256 CUDA cores, 1.5 TFLOPS FP32, 8 GB LPDDR4, 59.7 GB/s, 15 W",
                   {1.5e12, 15.0, 4.0e-9}});
    out.push_back({"movidius-ncs", 0.45,
                   "Movidius NCS: Myriad 2 VPU, 2 TFLOPS FP16, 4 Gbit LPDDR3, 4 Gbit/s, 1 W",
                   {2.0e12, 1.0, 6.0e-10}});
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct ProcessResult {
    int exit_code = 0;
    bool timed_out = false;
};

ProcessResult run_command(const std::string& command, const std::filesystem::path& workdir,
                          const std::filesystem::path& stdout_path, const std::filesystem::path& stderr_path,
                          double timeout_s) {
    const pid_t pid = fork();
    if (pid < 0) throw EvaluationFailed(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(workdir.c_str()) != 0) _exit(126);
        const int out = open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        const int err = open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out >= 0) dup2(out, STDOUT_FILENO);
        if (err >= 0) dup2(err, STDERR_FILENO);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    int status = 0;
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) throw EvaluationFailed("waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            return {-1, true};
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) return {WEXITSTATUS(status), false};
    return {128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0), false};
}

}  // namespace

const std::vector<DeviceProfile>& builtin_profiles() {
    static const std::vector<DeviceProfile> profiles = make_builtin_profiles();
    return profiles;
}

const DeviceProfile& find_profile(std::string_view name) {
    for (const auto& p : builtin_profiles()) {
        if (p.name == name) return p;
    }
    throw std::invalid_argument("unknown device profile: " + std::string(name));
}

ObjectiveVector synthetic_evaluate(const CellGenome& genome, const MacroConfig& macro, const DeviceProfile& profile,
                                   std::uint64_t seed) {
    const auto graph = build_network(genome, macro);
    const auto& c = profile.synthetic;
    const double params = static_cast<double>(graph.total_params);
    const double flops = static_cast<double>(graph.total_flops);

    ObjectiveVector v;
    v.time_s = flops / c.throughput_flops;
    v.energy_j = v.time_s * c.power_w + params * c.energy_per_param_j;
    v.error = c.error_min + (c.error_max - c.error_min) * std::exp(-params / c.kappa_params);
    if (c.noise_amplitude > 0.0) {
        std::uint64_t h = splitmix64(seed);
        for (int x : CellGenome::encode_unchecked(genome)) h = splitmix64(h ^ static_cast<std::uint64_t>(x));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
        v.error = std::clamp(v.error + c.noise_amplitude * (2.0 * u - 1.0), 0.0, 1.0);
    }
    return v;
}

nlohmann::ordered_json SyntheticEvaluator::describe() const {
    nlohmann::ordered_json j;
    j["type"] = "synthetic";
    j["profile"] = profile_.name;
    j["seed"] = seed_;
    j["noise"] = profile_.synthetic.noise_amplitude;
    j["macro"] = macro_to_json(macro_);
    return j;
}

nlohmann::ordered_json training_to_json(const TrainingConfig& t) {
    nlohmann::ordered_json j;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["optimizer"] = t.optimizer;
    j["momentum"] = t.momentum;
    j["decay"] = t.decay;
    j["lr"] = t.lr;
    j["lr_decay"] = t.lr_decay;
    j["lr_decay_every_epochs"] = t.lr_decay_every_epochs;
    j["weight_decay"] = t.weight_decay;
    return j;
}

TrainingConfig training_from_json(const nlohmann::ordered_json& j) {
    TrainingConfig t;
    if (j.is_null()) return t;
    if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.optimizer = j.value("optimizer", t.optimizer);
    t.momentum = j.value("momentum", t.momentum);
    t.decay = j.value("decay", t.decay);
    t.lr = j.value("lr", t.lr);
    t.lr_decay = j.value("lr_decay", t.lr_decay);
    t.lr_decay_every_epochs = j.value("lr_decay_every_epochs", t.lr_decay_every_epochs);
    t.weight_decay = j.value("weight_decay", t.weight_decay);
    return t;
}

nlohmann::ordered_json request_to_json(const EvaluationRequest& r) {
    nlohmann::ordered_json j;
    j["genome"] = genome_to_json(r.genome);
    j["N"] = r.N;
    j["F"] = r.F;
    j["num_classes"] = r.num_classes;
    j["training"] = training_to_json(r.training);
    j["device"] = r.device;
    return j;
}

EvaluationResponse response_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object() || !j.contains("error") || !j.at("error").is_number()) {
        throw EvaluationFailed("malformed response: missing numeric \"error\"");
    }
    EvaluationResponse r;
    r.error = j.at("error").get<double>();
    const bool direct = j.contains("energy_j") || j.contains("time_s");
    const bool traced = j.contains("trace_path") || j.contains("threshold_w");
    if (direct == traced) {
        throw EvaluationFailed("malformed response: exactly one of {energy_j, time_s} or {trace_path, threshold_w}");
    }
    try {
        if (direct) {
            r.energy_j = j.at("energy_j").get<double>();
            r.time_s = j.at("time_s").get<double>();
        } else {
            r.trace_path = j.at("trace_path").get<std::string>();
            if (j.contains("threshold_w")) r.threshold_w = j.at("threshold_w").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw EvaluationFailed(std::string("malformed response: ") + e.what());
    }
    return r;
}

ObjectiveVector external_evaluate(const EvaluationRequest& request, const AdapterSpec& adapter,
                                  std::optional<double> default_threshold_w) {
    if (adapter.command.empty()) throw std::invalid_argument("external evaluator: empty adapter command");
    namespace fs = std::filesystem;
    fs::create_directories(adapter.workdir);
    const auto req_path = adapter.workdir / "request.json";
    const auto resp_path = adapter.workdir / "response.json";
    fs::remove(resp_path);
    {
        std::ofstream out(req_path);
        out << request_to_json(request).dump(2) << '\n';
        if (!out) throw EvaluationFailed("cannot write " + req_path.string());
    }

    const auto stderr_path = adapter.workdir / "adapter.stderr";
    const auto res = run_command(adapter.command, fs::absolute(adapter.workdir), adapter.workdir / "adapter.stdout",
                                 stderr_path, adapter.timeout_s);
    if (res.timed_out) throw EvaluationFailed("adapter timed out after " + std::to_string(adapter.timeout_s) + " s");
    if (res.exit_code != 0) {
        throw EvaluationFailed("adapter exited with status " + std::to_string(res.exit_code) +
                               "; stderr: " + read_file(stderr_path));
    }

    nlohmann::ordered_json j;
    try {
        std::ifstream in(resp_path);
        if (!in) throw EvaluationFailed("adapter produced no " + resp_path.string());
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw EvaluationFailed(std::string("malformed response: ") + e.what());
    }
    const auto resp = response_from_json(j);

    ObjectiveVector v;
    v.error = resp.error;
    if (resp.trace_path) {
        fs::path trace_path = *resp.trace_path;
        if (trace_path.is_relative()) trace_path = adapter.workdir / trace_path;
        if (!fs::exists(trace_path)) throw EvaluationFailed("trace file not found: " + trace_path.string());
        const auto threshold = resp.threshold_w ? resp.threshold_w : default_threshold_w;
        if (!threshold) throw EvaluationFailed("trace response without threshold_w");
        const auto m = measure_from_trace(read_trace_csv(trace_path), *threshold);
        v.energy_j = m.energy_j;
        v.time_s = m.time_s;
    } else {
        v.energy_j = *resp.energy_j;
        v.time_s = *resp.time_s;
    }
    try {
        v.validate();
    } catch (const std::invalid_argument& e) {
        throw EvaluationFailed(std::string("response out of range: ") + e.what());
    }
    return v;
}

ExternalEvaluator::ExternalEvaluator(AdapterSpec adapter, std::string device, MacroConfig macro,
                                     TrainingConfig training, std::optional<double> default_threshold_w)
    : adapter_(std::move(adapter)),
      device_(std::move(device)),
      macro_(macro),
      training_(std::move(training)),
      default_threshold_w_(default_threshold_w) {}

ObjectiveVector ExternalEvaluator::evaluate(const CellGenome& genome) {
    EvaluationRequest req{genome, macro_.cell_repeats, macro_.initial_filters, macro_.num_classes, training_, device_};
    return external_evaluate(req, adapter_, default_threshold_w_);
}

nlohmann::ordered_json ExternalEvaluator::describe() const {
    nlohmann::ordered_json j;
    j["type"] = "external";
    j["command"] = adapter_.command;
    j["device"] = device_;
    j["macro"] = macro_to_json(macro_);
    return j;
}

std::unique_ptr<Evaluator> make_evaluator(const nlohmann::ordered_json& spec, const MacroConfig& macro,
                                          const TrainingConfig& training) {
    if (!spec.is_object()) throw std::invalid_argument("evaluator spec must be a JSON object");
    const auto type = spec.value("type", std::string("synthetic"));
    if (type == "synthetic") {
        auto profile = find_profile(spec.value("profile", std::string("movidius-ncs")));
        profile.synthetic.noise_amplitude = spec.value("noise", 0.0);
        return std::make_unique<SyntheticEvaluator>(std::move(profile), macro, spec.value("seed", std::uint64_t{0}));
    }
    if (type == "external") {
        AdapterSpec a;
        a.command = spec.value("command", std::string());
        a.workdir = spec.value("workdir", std::string("."));
        a.timeout_s = spec.value("timeout_s", a.timeout_s);
        const auto device = spec.value("device", std::string("external"));
        std::optional<double> threshold;
        if (spec.contains("threshold_w")) {
            threshold = spec.at("threshold_w").get<double>();
        } else {
            for (const auto& p : builtin_profiles()) {
                if (p.name == device) threshold = p.threshold_w;
            }
        }
        return std::make_unique<ExternalEvaluator>(std::move(a), device, macro, training, threshold);
    }
    throw std::invalid_argument("unknown evaluator type: " + type);
}

}  // namespace teadnn
