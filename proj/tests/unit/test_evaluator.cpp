#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <unistd.h>

#include "teadnn/evaluator.hpp"
#include "teadnn/trace.hpp"

using namespace teadnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("teadnn_unit_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

EvaluationRequest sample_request() {
    EvaluationRequest r;
    Rng rng(1);
    r.genome = random_genome(rng);
    r.device = "jetson-tx2";
    return r;
}

void write_constant_trace(const fs::path& p) {
    std::ofstream out(p);
    out << "t_ms,power_w\n";
    out << "0,0.1\n";
    for (int t = 20; t <= 5020; t += 20) out << t << ",2\n";
    out << "5040,0.1\n";
}

}  // namespace

TEST_CASE("built-in device profiles") {
    CHECK(find_profile("titanx").threshold_w == 80.0);
    CHECK(find_profile("jetson-tx2").threshold_w == 1.0);
    CHECK(find_profile("movidius-ncs").threshold_w == 0.45);
    CHECK(find_profile("titanx").synthetic.power_w == 250.0);
    CHECK(find_profile("jetson-tx2").synthetic.power_w == 15.0);
    CHECK(find_profile("movidius-ncs").synthetic.power_w == 1.0);
    CHECK(find_profile("titanx").synthetic.throughput_flops == 6.7e12);
    CHECK_THROWS(find_profile("tpu"));
    for (const auto& p : builtin_profiles()) CHECK(p.threshold_w > 0);
}

TEST_CASE("synthetic evaluator formulas") {
    const auto& profile = find_profile("jetson-tx2");
    const auto& c = profile.synthetic;
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto g = random_genome(rng);
        const auto net = build_network(g, MacroConfig{});
        const auto v = synthetic_evaluate(g, MacroConfig{}, profile);
        const double time = double(net.total_flops) / c.throughput_flops;
        CHECK(v.time_s == doctest::Approx(time).epsilon(1e-12));
        CHECK(v.energy_j == doctest::Approx(time * c.power_w + double(net.total_params) * c.energy_per_param_j).epsilon(1e-12));
        CHECK(v.error == doctest::Approx(c.error_min + (c.error_max - c.error_min) *
                                                           std::exp(-double(net.total_params) / c.kappa_params))
                             .epsilon(1e-12));
        CHECK(v == synthetic_evaluate(g, MacroConfig{}, profile));
        CHECK_NOTHROW(v.validate());
    }
}

TEST_CASE("synthetic evaluator noise is seeded") {
    auto profile = find_profile("movidius-ncs");
    profile.synthetic.noise_amplitude = 0.02;
    Rng rng(3);
    const auto g = random_genome(rng);
    const auto clean = synthetic_evaluate(g, MacroConfig{}, find_profile("movidius-ncs"), 5);
    const auto a = synthetic_evaluate(g, MacroConfig{}, profile, 5);
    CHECK(a == synthetic_evaluate(g, MacroConfig{}, profile, 5));
    CHECK(std::abs(a.error - clean.error) <= 0.02);
    CHECK(a.energy_j == clean.energy_j);
    bool differs = false;
    for (std::uint64_t s = 0; s < 10; ++s) differs = differs || synthetic_evaluate(g, MacroConfig{}, profile, s).error != a.error;
    CHECK(differs);
}

TEST_CASE("all-identity is the fastest one-block genome") {
    const auto& profile = find_profile("movidius-ncs");
    const auto all = enumerate_genomes(1);
    double fastest = 1e300;
    for (const auto& g : all) fastest = std::min(fastest, synthetic_evaluate(g, MacroConfig{}, profile).time_s);
    const auto ident = decode({0, 0, 1, 1}, 1);
    CHECK(synthetic_evaluate(ident, MacroConfig{}, profile).time_s == fastest);
    // Reading prev_prev as well only adds a projection.
    CHECK(synthetic_evaluate(decode({0, 1, 1, 1}, 1), MacroConfig{}, profile).time_s >= fastest);
}

TEST_CASE("conv7x7 in place of identity never decreases time") {
    const auto& profile = find_profile("titanx");
    Rng rng(4);
    for (int t = 0; t < 300; ++t) {
        auto g = random_genome(rng);
        for (std::size_t b = 0; b < g.blocks.size(); ++b) {
            for (int k = 0; k < 2; ++k) {
                auto& op = k == 0 ? g.blocks[b].op1 : g.blocks[b].op2;
                if (op != Operation::identity) continue;
                auto h = g;
                (k == 0 ? h.blocks[b].op1 : h.blocks[b].op2) = Operation::conv7x7;
                CHECK(synthetic_evaluate(h, MacroConfig{}, profile).time_s >= synthetic_evaluate(g, MacroConfig{}, profile).time_s);
            }
        }
    }
}

TEST_CASE("one-block synthetic space has a non-trivial front") {
    const auto& profile = find_profile("movidius-ncs");
    const auto all = enumerate_genomes(1);
    std::vector<ObjectiveVector> v;
    for (const auto& g : all) v.push_back(synthetic_evaluate(g, MacroConfig{}, profile));
    const auto front = pareto_indices(v, ObjectiveSubset::all());
    CHECK(front.size() > 1);
    CHECK(front.size() < all.size());
}

TEST_CASE("training defaults and request JSON") {
    const TrainingConfig t;
    const auto j = training_to_json(t);
    CHECK(j.at("epochs") == 10);
    CHECK(j.at("batch_size") == 32);
    CHECK(j.at("optimizer") == "rmsprop");
    CHECK(j.at("momentum") == 0.9);
    CHECK(j.at("decay") == 0.9);
    CHECK(j.at("lr") == 0.01);
    CHECK(j.at("lr_decay") == 0.94);
    CHECK(j.at("lr_decay_every_epochs") == 2);
    CHECK(j.at("weight_decay") == 0.00004);
    const auto back = training_from_json(j);
    CHECK(back.lr == t.lr);
    CHECK(back.optimizer == t.optimizer);

    const auto req = request_to_json(sample_request());
    for (const char* k : {"genome", "N", "F", "num_classes", "training", "device"}) CHECK(req.contains(k));
    CHECK(req.at("N") == 2);
    CHECK(req.at("F") == 24);
    CHECK(req.at("genome").at("blocks").size() == 5);
}

TEST_CASE("response parsing") {
    using nlohmann::ordered_json;
    auto r = response_from_json(ordered_json::parse(R"({"error":0.25,"energy_j":2.0,"time_s":0.05})"));
    CHECK(r.error == 0.25);
    CHECK(*r.energy_j == 2.0);
    r = response_from_json(ordered_json::parse(R"({"error":0.25,"trace_path":"t.csv","threshold_w":1})"));
    CHECK(*r.trace_path == "t.csv");
    CHECK_THROWS_AS(response_from_json(ordered_json::parse(R"({"error":0.25})")), EvaluationFailed);
    CHECK_THROWS_AS(response_from_json(ordered_json::parse(R"({"energy_j":2.0,"time_s":0.05})")), EvaluationFailed);
    CHECK_THROWS_AS(
        response_from_json(ordered_json::parse(R"({"error":0.2,"energy_j":2.0,"time_s":0.05,"trace_path":"t"})")),
        EvaluationFailed);
    CHECK_THROWS_AS(response_from_json(ordered_json::parse(R"({"error":0.2,"energy_j":"x","time_s":0.05})")),
                    EvaluationFailed);
}

TEST_CASE("external adapter: direct response") {
    const auto dir = fresh_dir("direct");
    AdapterSpec a{R"(test -f request.json && printf '{"error":0.25,"energy_j":2.0,"time_s":0.05}' > response.json)", dir, 30};
    const auto v = external_evaluate(sample_request(), a);
    CHECK(v == ObjectiveVector{0.25, 2.0, 0.05});
    const auto req = nlohmann::ordered_json::parse(std::ifstream(dir / "request.json"));
    CHECK(req.at("device") == "jetson-tx2");
}

TEST_CASE("external adapter: trace response") {
    const auto dir = fresh_dir("trace");
    write_constant_trace(dir / "power.csv");
    AdapterSpec a{R"(printf '{"error":0.3,"trace_path":"power.csv","threshold_w":1}' > response.json)", dir, 30};
    const auto v = external_evaluate(sample_request(), a);
    CHECK(v.error == 0.3);
    CHECK(v.energy_j == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(v.time_s == doctest::Approx(5.0).epsilon(1e-12));

    // Threshold from the device default when the response omits it.
    AdapterSpec b{R"(printf '{"error":0.3,"trace_path":"power.csv"}' > response.json)", dir, 30};
    CHECK(external_evaluate(sample_request(), b, 1.0).energy_j == doctest::Approx(10.0).epsilon(1e-12));
    CHECK_THROWS_AS(external_evaluate(sample_request(), b), EvaluationFailed);

    AdapterSpec missing{R"(printf '{"error":0.3,"trace_path":"nope.csv","threshold_w":1}' > response.json)", dir, 30};
    CHECK_THROWS_WITH_AS(external_evaluate(sample_request(), missing), doctest::Contains("not found"), EvaluationFailed);
}

TEST_CASE("external adapter: failures") {
    const auto dir = fresh_dir("fail");
    AdapterSpec crash{"echo 'cuda out of memory' >&2; exit 3", dir, 30};
    CHECK_THROWS_WITH_AS(external_evaluate(sample_request(), crash), doctest::Contains("cuda out of memory"),
                         EvaluationFailed);
    CHECK_THROWS_WITH_AS(external_evaluate(sample_request(), crash), doctest::Contains("status 3"), EvaluationFailed);

    AdapterSpec silent{"true", dir, 30};
    CHECK_THROWS_AS(external_evaluate(sample_request(), silent), EvaluationFailed);

    AdapterSpec garbage{"printf 'not json' > response.json", dir, 30};
    CHECK_THROWS_WITH_AS(external_evaluate(sample_request(), garbage), doctest::Contains("malformed"), EvaluationFailed);

    AdapterSpec range{R"(printf '{"error":1.5,"energy_j":2.0,"time_s":0.05}' > response.json)", dir, 30};
    CHECK_THROWS_AS(external_evaluate(sample_request(), range), EvaluationFailed);

    const auto t0 = std::chrono::steady_clock::now();
    AdapterSpec slow{"sleep 5", dir, 0.3};
    CHECK_THROWS_WITH_AS(external_evaluate(sample_request(), slow), doctest::Contains("timed out"), EvaluationFailed);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(4));
}

TEST_CASE("make_evaluator") {
    auto syn = make_evaluator({{"type", "synthetic"}, {"profile", "titanx"}}, MacroConfig{}, {});
    CHECK(syn->device() == "titanx");
    CHECK(syn->describe().at("type") == "synthetic");

    const auto dir = fresh_dir("make");
    write_constant_trace(dir / "power.csv");
    nlohmann::ordered_json spec{{"type", "external"},
                                {"command", R"(printf '{"error":0.3,"trace_path":"power.csv"}' > response.json)"},
                                {"workdir", dir.string()},
                                {"device", "jetson-tx2"}};
    auto ext = make_evaluator(spec, MacroConfig{}, {});
    CHECK(ext->device() == "jetson-tx2");
    Rng rng(5);
    CHECK(ext->evaluate(random_genome(rng)).energy_j == doctest::Approx(10.0).epsilon(1e-12));

    CHECK_THROWS(make_evaluator({{"type", "quantum"}}, MacroConfig{}, {}));
    CHECK_THROWS(make_evaluator({{"type", "synthetic"}, {"profile", "nope"}}, MacroConfig{}, {}));
}
