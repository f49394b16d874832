// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "teadnn/cli.hpp"
#include "teadnn/gp.hpp"
#include "teadnn/pareto.hpp"
#include "teadnn/search.hpp"
#include "teadnn/search_space.hpp"
#include "teadnn/trace.hpp"

namespace fs = std::filesystem;
using namespace teadnn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("teadnn_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

// ---------------------------------------------------------------------------

Outcome space_size() {
    const auto t0 = Clock::now();
    const auto n = search_space_size(5);
    const double dt = seconds_since(t0);
    const boost::multiprecision::cpp_int expected("556627761561600");
    // Independent product: per block (2+b)^2 input pairs times 8^2 op pairs.
    boost::multiprecision::cpp_int product = 1;
    for (int b = 0; b < 5; ++b) product *= (2 + b) * (2 + b) * 64;
    const bool ok = n == expected && product == expected && dt < 1e-3;
    return {ok, "size=" + n.str() + " runtime=" + fmt(dt * 1e3, 3) + "ms"};
}

bool brute_dominates(const ObjectiveVector& a, const ObjectiveVector& b, const std::vector<Objective>& objs) {
    bool strict = false;
    for (auto o : objs) {
        if (a[o] > b[o]) return false;
        if (a[o] < b[o]) strict = true;
    }
    return strict;
}

Outcome pareto_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(12345);
    int mismatches = 0;
    for (int set = 0; set < 1000; ++set) {
        const bool three = set % 2 == 1;
        const ObjectiveSubset subset = three ? ObjectiveSubset::all() : ObjectiveSubset{Objective::error, Objective::energy};
        const auto objs = subset.members();
        const int n = std::uniform_int_distribution<int>(1, 500)(rng);
        // Coarse grids for some sets so ties and duplicates occur.
        const int levels = set % 4 < 2 ? 20 : 1000000;
        std::uniform_int_distribution<int> coord(0, levels);
        std::vector<EvaluationRecord> records(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto& r = records[static_cast<std::size_t>(i)];
            r.iteration = i;
            r.objectives = {coord(rng) / double(levels), 1.0 + coord(rng), 1.0 + coord(rng)};
        }
        std::set<int> expected;
        for (int i = 0; i < n; ++i) {
            bool dominated = false;
            for (int j = 0; j < n && !dominated; ++j) {
                dominated = brute_dominates(records[std::size_t(j)].objectives, records[std::size_t(i)].objectives, objs);
            }
            if (!dominated) expected.insert(i);
        }
        std::set<int> got;
        for (const auto& r : pareto_filter(records, subset)) got.insert(r.iteration);
        if (got != expected) ++mismatches;
    }
    const double dt = seconds_since(t0);
    return {mismatches == 0 && dt < 10.0, "mismatches=" + std::to_string(mismatches) + " time=" + fmt(dt, 3) + "s"};
}

Outcome reported_dominance() {
    const ObjectiveSubset ee{Objective::error, Objective::energy};
    const bool a = dominates(ObjectiveVector{0.2342, 1.16, 1.0}, ObjectiveVector{0.2390, 1.32, 1.0}, ee);
    const bool b1 = dominates(ObjectiveVector{0.2216, 2.02, 1.0}, ObjectiveVector{0.2588, 1.99, 1.0}, ee);
    const bool b2 = dominates(ObjectiveVector{0.2588, 1.99, 1.0}, ObjectiveVector{0.2216, 2.02, 1.0}, ee);
    const bool c = dominates(ObjectiveVector{0.2286, 815, 6.08}, ObjectiveVector{0.2318, 1160, 8.18}, ObjectiveSubset::all());
    const bool c_rev = dominates(ObjectiveVector{0.2318, 1160, 8.18}, ObjectiveVector{0.2286, 815, 6.08}, ObjectiveSubset::all());
    const bool ok = a && !b1 && !b2 && c && !c_rev;
    return {ok, std::string("pair1=") + (a ? "dominates" : "no") + " pair2=" + (!b1 && !b2 ? "non-dominated" : "dominated") +
                    " triple=" + (c && !c_rev ? "dominates" : "no")};
}

Outcome gp_correctness() {
    std::string detail;
    bool ok = true;

    // One training point, k(x*, x) = 0.5 via one differing field (squared distance 2).
    CellGenome g0 = decode({0, 1, 3, 3}, 1);
    CellGenome g1 = decode({0, 1, 3, 4}, 1);
    Eigen::MatrixXd X(1, feature_dimension(1));
    X.row(0) = featurize(g0);
    Eigen::VectorXd y(1);
    y << 1.0;
    KernelParams p{1.0 / std::sqrt(std::log(2.0)), 1.0, 0.0};
    const auto m = GPModel::condition(X, y, p, false);
    const auto pred = m.predict(featurize(g1));
    const double e1 = std::max(std::abs(pred.mean - 0.5), std::abs(pred.variance - 0.75));
    ok = ok && e1 <= 1e-9;
    detail += "closed-form err=" + fmt(e1, 3);

    // Log marginal likelihood against a dense inverse/determinant oracle.
    std::mt19937_64 rng(7);
    double worst_lml = 0.0, worst_interp = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 10;
        std::vector<CellGenome> gs;
        std::set<std::vector<int>> seen;
        while (static_cast<int>(gs.size()) < n) {
            auto g = random_genome(rng, 5);
            if (seen.insert(encode(g)).second) gs.push_back(g);
        }
        Eigen::MatrixXd Xn(n, feature_dimension(5));
        Eigen::VectorXd yn(n);
        std::normal_distribution<double> z;
        for (int i = 0; i < n; ++i) {
            Xn.row(i) = featurize(gs[std::size_t(i)]);
            yn[i] = z(rng);
        }
        KernelParams q{0.5 + trial * 0.1, 0.3 + 0.05 * trial, 1e-3 + 0.01 * (trial % 5)};
        Eigen::MatrixXd K(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double d2 = (Xn.row(i) - Xn.row(j)).squaredNorm();
                K(i, j) = q.signal_variance * std::exp(-d2 / (2 * q.lengthscale * q.lengthscale)) +
                          (i == j ? q.noise_variance : 0.0);
            }
        const Eigen::MatrixXd Kinv = K.inverse();
        const double oracle = -0.5 * yn.dot(Kinv * yn) - 0.5 * std::log(K.determinant()) -
                              0.5 * n * std::log(2 * M_PI);
        worst_lml = std::max(worst_lml, std::abs(log_marginal_likelihood(q, Xn, yn) - oracle));

        KernelParams tight{1.0, 1.0, 1e-6};
        const auto model = GPModel::condition(Xn, yn, tight, false);
        for (int i = 0; i < n; ++i) {
            worst_interp = std::max(worst_interp, std::abs(model.predict(Xn.row(i).transpose().eval()).mean - yn[i]));
        }
    }
    ok = ok && worst_lml <= 1e-6 && worst_interp <= 1e-3;
    detail += " lml err=" + fmt(worst_lml, 3) + " interp err=" + fmt(worst_interp, 3);
    return {ok, detail};
}

double mc_hypervolume(const std::vector<ObjPoint>& front, const ObjPoint& ref, const ObjPoint& lo, int samples,
                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long hits = 0;
    for (int s = 0; s < samples; ++s) {
        ObjPoint x{};
        for (int k = 0; k < 3; ++k) x[std::size_t(k)] = lo[std::size_t(k)] + u(rng) * (ref[std::size_t(k)] - lo[std::size_t(k)]);
        for (const auto& f : front) {
            if (f[0] <= x[0] && f[1] <= x[1] && f[2] <= x[2]) {
                ++hits;
                break;
            }
        }
    }
    double box = 1.0;
    for (int k = 0; k < 3; ++k) box *= ref[std::size_t(k)] - lo[std::size_t(k)];
    return box * static_cast<double>(hits) / samples;
}

Outcome hypervolume_checks() {
    const auto t0 = Clock::now();
    bool ok = true;
    // 2-D by inclusion-exclusion: boxes [1,4]x[3,4] + [2,4]x[2,4] + [3,4]x[1,4]
    // minus pairwise overlaps plus the triple overlap = 3 + 4 + 3 - 2 - 1 - 2 + 1 = 6.
    const std::vector<ObjPoint> f2{{1, 3, 0}, {2, 2, 0}, {3, 1, 0}};
    const double h2 = hypervolume(f2, ObjPoint{4, 4, 0}, 2);
    ok = ok && h2 == 6.0;
    // Single point and a dominated duplicate.
    const std::vector<ObjPoint> f2b{{1, 1, 0}, {2, 2, 0}, {1, 1, 0}};
    const double h2b = hypervolume(f2b, ObjPoint{3, 5, 0}, 2);
    ok = ok && h2b == 8.0;
    // [0,2]x[1,3] and [1,2]x[0,3] overlap in [1,2]x[1,3]: 4 + 3 - 2 = 5.
    const std::vector<ObjPoint> f2c{{0, 1, 0}, {1, 0, 0}};
    const double h2c = hypervolume(f2c, ObjPoint{2, 3, 0}, 2);
    ok = ok && h2c == 5.0;

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_rel = 0.0;
    for (int t = 0; t < 20; ++t) {
        const int n = 5 + t * 3;
        std::vector<ObjPoint> pts;
        for (int i = 0; i < n; ++i) {
            // Points near the simplex so many are mutually non-dominated.
            double a = u(rng), b = u(rng), c = u(rng);
            const double s = a + b + c;
            pts.push_back({a / s + 0.05 * u(rng), b / s + 0.05 * u(rng), c / s + 0.05 * u(rng)});
        }
        std::vector<ObjPoint> front;
        const auto mask = pareto_mask(pts);
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (mask[i]) front.push_back(pts[i]);
        const ObjPoint ref{1.2, 1.2, 1.2};
        const double exact = hypervolume(front, ref, 3);
        const double mc = mc_hypervolume(front, ref, ObjPoint{0, 0, 0}, 1000000, rng);
        worst_rel = std::max(worst_rel, std::abs(exact - mc) / mc);
    }
    const double dt = seconds_since(t0);
    ok = ok && worst_rel <= 0.02 && dt < 30.0;
    return {ok, "2d=" + fmt(h2) + "," + fmt(h2b) + "," + fmt(h2c) + " (expect 6,8,5) 3d max rel err=" + fmt(worst_rel, 3) +
                    " time=" + fmt(dt, 3) + "s"};
}

Outcome energy_integration() {
    bool ok = true;
    // Idle at 0.1 W, 10 W from 100 ms to 1100 ms.
    std::vector<PowerSample> samples{{0, 0.1}, {99.999, 0.1}};
    for (int t = 100; t <= 1100; t += 10) samples.push_back({double(t), 10.0});
    samples.push_back({1100.001, 0.1});
    samples.push_back({1500, 0.1});
    const auto m = measure_from_trace(PowerTrace(samples), 1.0);
    ok = ok && std::abs(m.energy_j - 10.0) <= 1e-9 && std::abs(m.time_s - 1.0) <= 1e-12;

    // Triangle 0 -> 20 W -> 0 over 1 s: 10 J exactly; interior window by hand.
    PowerTrace tri({{0, 0}, {500, 20}, {1000, 0}});
    const double e_tri = integrate_energy(tri, 0, 1000);
    // Window [250, 750]: trapezoids (10+20)/2*0.25 twice = 7.5 J.
    const double e_win = integrate_energy(tri, 250, 750);
    ok = ok && std::abs(e_tri - 10.0) <= 1e-9 && std::abs(e_win - 7.5) <= 1e-9;

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        std::vector<PowerSample> s;
        double time = 0.0;
        for (int i = 0; i < 50; ++i) {
            s.push_back({time, 5.0 * u(rng)});
            time += 0.5 + 10.0 * u(rng);
        }
        PowerTrace tr(s);
        const double a = tr.start_ms() + u(rng) * (tr.end_ms() - tr.start_ms()) / 3;
        const double b = a + (tr.end_ms() - a) * (0.2 + 0.6 * u(rng));
        const double c = b + (tr.end_ms() - b) * u(rng);
        if (!(c > b)) continue;
        const double whole = integrate_energy(tr, a, c);
        const double split = integrate_energy(tr, a, b) + integrate_energy(tr, b, c);
        worst = std::max(worst, std::abs(whole - split) / std::abs(whole));
    }
    ok = ok && worst <= 1e-9;
    return {ok, "constant=" + fmt(m.energy_j, 10) + "J triangle=" + fmt(e_tri, 10) + "J window=" + fmt(e_win, 10) +
                    "J additivity rel err=" + fmt(worst, 3)};
}

// Hypervolume in surrogate coordinates against a fixed reference computed
// from the whole enumerated space.
struct SpaceOracle {
    std::vector<CellGenome> genomes;
    std::vector<ObjectiveVector> values;
    ObjPoint ref{};
};

SpaceOracle one_block_oracle(const DeviceProfile& profile) {
    SpaceOracle o;
    o.genomes = enumerate_genomes(1);
    for (const auto& g : o.genomes) o.values.push_back(synthetic_evaluate(g, MacroConfig{}, profile, 0));
    std::vector<ObjPoint> pts;
    for (const auto& v : o.values) pts.push_back(surrogate_point(v, ObjectiveSubset::all()));
    o.ref = reference_point(pts, 3);
    return o;
}

double front_hypervolume(std::span<const EvaluationRecord> history, const ObjPoint& ref) {
    std::vector<ObjPoint> pts;
    for (const auto& r : history) pts.push_back(surrogate_point(r.objectives, ObjectiveSubset::all()));
    return hypervolume(pts, ref, 3);
}

Outcome bo_beats_random() {
    const auto t0 = Clock::now();
    const auto& profile = find_profile("movidius-ncs");
    const auto oracle = one_block_oracle(profile);
    SyntheticEvaluator ev(profile, MacroConfig{});
    std::vector<double> bo, rnd;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SearchConfig c;
        c.seed = seed;
        c.budget = 100;
        c.num_blocks = 1;
        const double hb = front_hypervolume(run_search(c, ev), oracle.ref);
        const double hr = front_hypervolume(run_random(c, ev), oracle.ref);
        bo.push_back(hb);
        rnd.push_back(hr);
        if (hb >= hr) ++wins;
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const double mb = median(bo), mr = median(rnd);
    const double dt = seconds_since(t0);
    const double optimum = front_hypervolume(
        [&] {
            std::vector<EvaluationRecord> all;
            for (const auto& v : oracle.values) all.push_back({0, Source::random, "", {}, v, 0.0, {}});
            return all;
        }(),
        oracle.ref);
    const bool ok = mb >= mr && wins >= 12 && dt < 300.0;
    return {ok, "median hv search=" + fmt(mb, 8) + " random=" + fmt(mr, 8) + " (space optimum " + fmt(optimum, 8) +
                    ") wins=" + std::to_string(wins) + "/20 time=" + fmt(dt, 3) + "s"};
}

Outcome exhaustive_recovery() {
    const auto& profile = find_profile("movidius-ncs");
    auto rows = cli::cmd_enumerate(1, profile, MacroConfig{}, ObjectiveSubset::all());
    std::set<std::vector<int>> oracle;
    for (const auto& r : rows)
        if (r.is_pareto) oracle.insert(encode(r.genome));
    SyntheticEvaluator ev(profile, MacroConfig{});
    SearchConfig c;
    c.seed = 5;
    c.budget = 256;
    c.num_blocks = 1;
    const auto history = run_search(c, ev);
    std::set<std::vector<int>> got;
    for (const auto& r : pareto_filter(history, ObjectiveSubset::all())) got.insert(encode(r.genome));
    return {got == oracle, "history=" + std::to_string(history.size()) + " front=" + std::to_string(got.size()) +
                               " oracle front=" + std::to_string(oracle.size()) + " of " + std::to_string(rows.size())};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome resume_determinism() {
    int checked = 0, mismatched = 0;
    for (int budget : {5, 20, 50}) {
        cli::RunConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(budget);
        cfg.budget = budget;
        cfg.n_init = std::min(10, budget);
        cfg.num_blocks = budget == 20 ? 2 : 5;
        cfg.log_path = scratch("full_" + std::to_string(budget) + ".jsonl");
        fs::remove(cfg.log_path);
        cli::cmd_search(cfg, Source::bo);
        const auto full = slurp(cfg.log_path);

        for (int cut : {0, 1, budget / 2, budget - 1}) {
            // Interruption: the log holds only the first `cut` lines.
            auto part = cfg;
            part.log_path = scratch("part_" + std::to_string(budget) + "_" + std::to_string(cut) + ".jsonl");
            std::size_t pos = 0;
            for (int i = 0; i < cut; ++i) pos = full.find('\n', pos) + 1;
            {
                std::ofstream o(part.log_path, std::ios::binary | std::ios::trunc);
                o << full.substr(0, pos);
            }
            cli::cmd_search(part, Source::bo);
            ++checked;
            if (slurp(part.log_path) != full) ++mismatched;
        }
    }
    return {mismatched == 0, std::to_string(checked - mismatched) + "/" + std::to_string(checked) +
                                 " interrupted runs byte-identical"};
}

Outcome cross_device_flip() {
    const auto dir = scratch("reeval");
    fs::create_directories(dir);
    const CellGenome c = decode({0, 1, 3, 5}, 1);
    const CellGenome d = decode({1, 0, 7, 2}, 1);

    // Source log: equal error; c is faster, d uses less energy.
    const auto src_log = dir / "source.jsonl";
    fs::remove(src_log);
    {
        RunLogWriter w(src_log);
        LogEntry e;
        e.record = {0, Source::bo, "titanx", c, {0.25, 508.0, 3.0}, 0.0, {}};
        w.append(e);
        e.record = {1, Source::bo, "titanx", d, {0.25, 489.0, 3.5}, 1.0, {}};
        w.append(e);
    }

    // Target device adapter: fixed measurements keyed by the genome's first op.
    const auto script = dir / "adapter.py";
    {
        std::ofstream s(script);
        s << "import json\n"
             "req = json.load(open('request.json'))\n"
             "op = req['genome']['blocks'][0][2]\n"
             "table = {3: (1.05, 0.030), 7: (1.26, 0.040)}\n"
             "e, t = table[op]\n"
             "json.dump({'error': 0.99, 'energy_j': e, 'time_s': t}, open('response.json', 'w'))\n";
    }
    nlohmann::ordered_json target{{"type", "external"},
                                  {"command", "python3 " + script.string()},
                                  {"workdir", (dir / "work").string()},
                                  {"device", "movidius-ncs"}};
    std::ostringstream out, err;
    const int rc = cli::run({"--log", src_log.string(), "reeval", "--subset", "error,energy,time", "--target",
                             target.dump()},
                            out, err);
    if (rc != 0) return {false, "reeval exit " + std::to_string(rc) + ": " + err.str()};
    const auto j = nlohmann::ordered_json::parse(out.str());

    bool energy_flip = false;
    for (const auto& f : j.at("axis_flips"))
        if (f.at("objective") == "energy") energy_flip = true;
    bool dominance_flip = false;
    for (const auto& f : j.at("dominance_flips"))
        if (f.at("source_relation") == "incomparable" && f.at("target_relation") != "incomparable")
            dominance_flip = true;
    // c must be the sole survivor on the target front, with the source error carried over.
    const auto& front = j.at("merged_front");
    const bool c_front = front.size() == 1 && genome_from_json(front[0].at("genome")) == c &&
                         front[0].at("objectives").at("error").get<double>() == 0.25;
    bool d_dominated = false;
    for (const auto& m : j.at("models"))
        if (genome_from_json(m.at("genome")) == d) d_dominated = m.at("dominated_on_target").get<bool>();
    const bool ok = energy_flip && dominance_flip && c_front && d_dominated;
    return {ok, std::string("energy axis flip=") + (energy_flip ? "yes" : "no") +
                    " dominance flip=" + (dominance_flip ? "yes" : "no") + " c on target front=" + (c_front ? "yes" : "no") +
                    " d dominated on target=" + (d_dominated ? "yes" : "no")};
}

}  // namespace

int main() {
    report(1, "search-space size", space_size);
    report(2, "pareto oracle equivalence", pareto_oracle);
    report(3, "reported-value dominance", reported_dominance);
    report(4, "gp correctness", gp_correctness);
    report(5, "hypervolume", hypervolume_checks);
    report(6, "energy integration", energy_integration);
    report(7, "search beats random", bo_beats_random);
    report(8, "exhaustive recovery", exhaustive_recovery);
    report(9, "deterministic resume", resume_determinism);
    report(10, "cross-device flip", cross_device_flip);
    std::error_code ec;
    fs::remove_all(fs::temp_directory_path() / ("teadnn_acceptance_" + std::to_string(::getpid())), ec);
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
