#include <random>

#include <benchmark/benchmark.h>

#include "teadnn/gp.hpp"
#include "teadnn/kernels.hpp"

using namespace teadnn;

namespace {

std::vector<ObjPoint> random_points(std::size_t n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObjPoint> pts(n);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    return pts;
}

// Three GPs on 100 random genomes, a front of 20 points and 64 MC draws.
struct HviFixture {
    std::vector<GPModel> models;
    kernels::HviProblem problem;
    std::vector<Eigen::VectorXd> candidates;

    explicit HviFixture(int pool) {
        Rng rng(2);
        std::normal_distribution<double> z;
        Eigen::MatrixXd X(100, feature_dimension(kCellBlocks));
        for (int i = 0; i < 100; ++i) X.row(i) = featurize(random_genome(rng));
        for (int k = 0; k < 3; ++k) {
            Eigen::VectorXd y(100);
            for (auto& v : y) v = z(rng);
            models.push_back(GPModel::condition(X, y, {2.0, 1.0, 1e-3}));
        }
        for (const auto& m : models) problem.models.push_back(&m);
        const auto pts = random_points(200);
        const auto mask = kernels::serial::pareto_mask(pts);
        for (std::size_t i = 0; i < pts.size() && problem.front.size() < 20; ++i)
            if (mask[i]) problem.front.push_back(pts[i]);
        problem.ref = {2.0, 2.0, 2.0};
        problem.normals = Eigen::MatrixXd(64, 3);
        for (int i = 0; i < 64; ++i)
            for (int k = 0; k < 3; ++k) problem.normals(i, k) = z(rng);
        for (int i = 0; i < pool; ++i) candidates.push_back(featurize(random_genome(rng)));
    }
};

template <auto Fn>
void BM_pareto_mask(benchmark::State& state) {
    const auto pts = random_points(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(pts));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_expected_hvi(benchmark::State& state) {
    const HviFixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.problem, f.candidates));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_synthetic(benchmark::State& state) {
    Rng rng(3);
    std::vector<CellGenome> gs;
    for (int i = 0; i < state.range(0); ++i) gs.push_back(random_genome(rng));
    const auto& profile = find_profile("jetson-tx2");
    for (auto _ : state) benchmark::DoNotOptimize(Fn(gs, MacroConfig{}, profile, 0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_pareto_mask<kernels::serial::pareto_mask>)->Name("pareto_mask/serial")->Arg(400)->Arg(4000);
BENCHMARK(BM_pareto_mask<kernels::parallel::pareto_mask>)->Name("pareto_mask/parallel")->Arg(400)->Arg(4000);
BENCHMARK(BM_expected_hvi<kernels::serial::expected_hvi>)->Name("expected_hvi/serial")->Arg(600);
BENCHMARK(BM_expected_hvi<kernels::parallel::expected_hvi>)->Name("expected_hvi/parallel")->Arg(600);
BENCHMARK(BM_synthetic<kernels::serial::synthetic_objectives>)->Name("synthetic/serial")->Arg(256);
BENCHMARK(BM_synthetic<kernels::parallel::synthetic_objectives>)->Name("synthetic/parallel")->Arg(256);

BENCHMARK_MAIN();
