#include "teadnn/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace teadnn {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Eigen::MatrixXd draw_normals(Rng& rng, int samples, int dims) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(samples, dims);
    for (int m = 0; m < samples; ++m)
        for (int k = 0; k < dims; ++k) z(m, k) = normal(rng);
    return z;
}

std::vector<ObjPoint> surrogate_points(std::span<const EvaluationRecord> records, const ObjectiveSubset& subset) {
    std::vector<ObjPoint> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(surrogate_point(r.objectives, subset));
    return out;
}

enum class Mode { bo, random };

LogEntry evaluate_with_retries(Evaluator& evaluator, const CellGenome& genome, int max_retries) {
    LogEntry entry;
    for (int attempt = 1; attempt <= max_retries + 1; ++attempt) {
        entry.attempts = attempt;
        try {
            entry.record.objectives = evaluator.evaluate(genome);
            entry.record.objectives.validate();
            entry.failed = false;
            return entry;
        } catch (const std::exception& e) {
            entry.failed = true;
            entry.message = e.what();
        }
    }
    return entry;
}

std::vector<EvaluationRecord> run_loop(Mode mode, const SearchConfig& config, Evaluator& evaluator, RunHooks hooks) {
    config.validate();
    if (search_space_size(config.num_blocks) < config.budget) {
        throw std::invalid_argument("budget exceeds the number of distinct genomes");
    }
    SearchState state{{}, {}, Rng(config.seed)};
    const MonteCarloEhvi acquisition(config.mc_samples, config.parallel);
    const Source source = mode == Mode::bo ? Source::bo : Source::random;
    std::size_t replayed = 0;
    int consecutive_failures = 0;
    std::optional<SurrogateSet> last_fit;
    std::size_t last_fit_size = 0;

    while (static_cast<int>(state.history.size()) < config.budget) {
        const int iteration = static_cast<int>(state.history.size());

        Proposal proposal;
        if (mode == Mode::bo) {
            std::optional<SurrogateSet> models;
            if (iteration >= std::max(config.n_init, 2)) {
                const auto n = state.history.size();
                if (!last_fit || static_cast<double>(n) >= config.refit_growth * static_cast<double>(last_fit_size)) {
                    auto opts = config.gp;
                    opts.seed = mix_seed(config.seed, static_cast<std::uint64_t>(iteration));
                    last_fit = SurrogateSet::fit(state.history, config.subset, opts);
                    last_fit_size = n;
                    models = last_fit;
                } else {
                    models = SurrogateSet::condition(state.history, *last_fit);
                }
            }
            proposal = propose_next(config, state, models ? &*models : nullptr, acquisition);
        } else {
            proposal.genome = random_unevaluated(state.excluded, config.num_blocks, state.rng);
        }

        LogEntry entry;
        if (replayed < hooks.replay.size()) {
            entry = hooks.replay[replayed++];
            if (entry.record.genome != proposal.genome || entry.record.source != source) {
                throw ReplayMismatch("run log line " + std::to_string(replayed) +
                                     " does not match this configuration (expected genome " +
                                     to_string(proposal.genome) + ")");
            }
        } else {
            entry = evaluate_with_retries(evaluator, proposal.genome, config.max_retries);
            auto& r = entry.record;
            r.iteration = iteration;
            r.source = source;
            r.device = evaluator.device();
            r.genome = proposal.genome;
            r.timestamp = config.wall_clock
                              ? std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
                                    .count()
                              : static_cast<double>(iteration);
            r.meta = config.run_meta;
            for (const auto& [k, v] : proposal.meta.items()) r.meta[k] = v;
            if (hooks.writer) hooks.writer->append(entry);
        }

        state.excluded.insert(CellGenome::encode_unchecked(proposal.genome));
        if (entry.failed) {
            if (++consecutive_failures > config.max_consecutive_failures) {
                throw EvaluationFailed("evaluator failed on " + std::to_string(consecutive_failures) +
                                       " consecutive genomes; last error: " + entry.message);
            }
            continue;
        }
        consecutive_failures = 0;
        state.history.push_back(entry.record);
    }
    return state.history;
}

}  // namespace

double to_surrogate_space(Objective o, double value) {
    if (o == Objective::error) return value;
    return std::log(std::max(value, 1e-300));
}

ObjPoint surrogate_point(const ObjectiveVector& v, const ObjectiveSubset& subset) {
    ObjPoint p{};
    std::size_t k = 0;
    for (auto o : subset.members()) p[k++] = to_surrogate_space(o, v[o]);
    return p;
}

ObjPoint reference_point(std::span<const ObjPoint> observed, int dims) {
    if (observed.empty()) throw std::invalid_argument("reference_point: no observations");
    ObjPoint ref{};
    for (int i = 0; i < dims; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        double worst = observed.front()[ii];
        double best = worst;
        for (const auto& p : observed) {
            worst = std::max(worst, p[ii]);
            best = std::min(best, p[ii]);
        }
        double margin = 0.1 * std::abs(worst);
        if (margin == 0.0) margin = 0.1 * (worst - best);
        if (margin == 0.0) margin = 0.1;
        ref[ii] = worst + margin;
    }
    return ref;
}

SurrogateSet SurrogateSet::fit(std::span<const EvaluationRecord> history, const ObjectiveSubset& subset,
                               const FitOptions& options) {
    if (history.size() < 2) throw std::invalid_argument("SurrogateSet::fit: need at least 2 records");
    const auto members = subset.members();
    const auto n = static_cast<Eigen::Index>(history.size());
    Eigen::MatrixXd X(n, feature_dimension(history.front().genome.num_blocks()));
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = featurize(history[static_cast<std::size_t>(i)].genome);

    std::vector<std::optional<GPModel>> fitted(members.size());
    const auto count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(static, 1)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
        const auto o = members[static_cast<std::size_t>(k)];
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] = to_surrogate_space(o, history[static_cast<std::size_t>(i)].objectives[o]);
        }
        auto opts = options;
        opts.seed = options.seed + static_cast<std::uint64_t>(o);
        fitted[static_cast<std::size_t>(k)] = GPModel::fit(X, y, opts);
    }

    SurrogateSet set;
    set.subset = subset;
    for (auto& m : fitted) set.models.push_back(std::move(*m));
    return set;
}

SurrogateSet SurrogateSet::condition(std::span<const EvaluationRecord> history, const SurrogateSet& previous) {
    if (history.empty()) throw std::invalid_argument("SurrogateSet::condition: empty history");
    const auto members = previous.subset.members();
    const auto n = static_cast<Eigen::Index>(history.size());
    Eigen::MatrixXd X(n, feature_dimension(history.front().genome.num_blocks()));
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = featurize(history[static_cast<std::size_t>(i)].genome);

    SurrogateSet set;
    set.subset = previous.subset;
    for (std::size_t k = 0; k < members.size(); ++k) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y[i] = to_surrogate_space(members[k], history[static_cast<std::size_t>(i)].objectives[members[k]]);
        }
        set.models.push_back(GPModel::condition(X, y, previous.models.at(k).params()));
    }
    return set;
}

nlohmann::ordered_json SurrogateSet::params_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    const auto members = subset.members();
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& p = models[k].params();
        j[std::string(to_string(members[k]))] = {{"lengthscale", p.lengthscale},
                                                 {"signal_variance", p.signal_variance},
                                                 {"noise_variance", p.noise_variance}};
    }
    return j;
}

double acquisition_score(const SurrogateSet& models, std::span<const ObjPoint> front, const ObjPoint& ref,
                         const CellGenome& candidate, Rng& rng, int mc_samples) {
    if (models.models.empty()) throw std::invalid_argument("acquisition_score: no fitted models");
    if (mc_samples < 1) throw std::invalid_argument("acquisition_score: mc_samples must be >= 1");
    kernels::HviProblem problem;
    for (const auto& m : models.models) problem.models.push_back(&m);
    problem.front.assign(front.begin(), front.end());
    problem.ref = ref;
    problem.normals = draw_normals(rng, mc_samples, problem.dims());
    const Eigen::VectorXd x = featurize(candidate);
    return kernels::serial::expected_hvi(problem, std::span(&x, 1)).front();
}

std::vector<double> MonteCarloEhvi::score(const SurrogateSet& models, std::span<const EvaluationRecord> history,
                                          std::span<const CellGenome> pool, Rng& rng) const {
    kernels::HviProblem problem;
    for (const auto& m : models.models) problem.models.push_back(&m);
    const auto observed = surrogate_points(history, models.subset);
    problem.ref = reference_point(observed, problem.dims());
    for (const auto& r : pareto_filter(history, models.subset)) {
        problem.front.push_back(surrogate_point(r.objectives, models.subset));
    }
    problem.normals = draw_normals(rng, mc_samples_, problem.dims());

    std::vector<Eigen::VectorXd> features;
    features.reserve(pool.size());
    for (const auto& g : pool) features.push_back(featurize(g));
    return parallel_ ? kernels::parallel::expected_hvi(problem, features)
                     : kernels::serial::expected_hvi(problem, features);
}

void SearchConfig::validate() const {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (n_init < 1 || n_init > budget) throw std::invalid_argument("need budget >= n_init >= 1");
    if (num_blocks < 1) throw std::invalid_argument("num_blocks must be >= 1");
    if (pool_random < 0 || mutations_per_front_member < 0) throw std::invalid_argument("pool sizes must be >= 0");
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
    if (!(refit_growth >= 1.0)) throw std::invalid_argument("refit_growth must be >= 1");
    if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
}

CellGenome random_unevaluated(const std::set<std::vector<int>>& excluded, int num_blocks, Rng& rng) {
    constexpr int kRandomTries = 1000;
    for (int i = 0; i < kRandomTries; ++i) {
        auto g = random_genome(rng, num_blocks);
        if (!excluded.contains(CellGenome::encode_unchecked(g))) return g;
    }
    // Dense exclusion: walk the space in order (only possible for small spaces).
    GenomeEnumerator it(num_blocks);
    while (auto g = it.next()) {
        if (!excluded.contains(CellGenome::encode_unchecked(*g))) return *g;
    }
    throw std::runtime_error("search space exhausted");
}

Proposal propose_next(const SearchConfig& config, SearchState& state, const SurrogateSet* models,
                      const Acquisition& acquisition) {
    Proposal p;
    if (!models || static_cast<int>(state.history.size()) < config.n_init) {
        p.genome = random_unevaluated(state.excluded, config.num_blocks, state.rng);
        p.meta["phase"] = "warmup";
        return p;
    }

    std::vector<CellGenome> pool;
    std::set<std::vector<int>> seen;
    auto offer = [&](CellGenome g) {
        auto enc = CellGenome::encode_unchecked(g);
        if (state.excluded.contains(enc) || !seen.insert(std::move(enc)).second) return;
        pool.push_back(std::move(g));
    };
    for (int i = 0; i < config.pool_random; ++i) offer(random_genome(state.rng, config.num_blocks));
    for (const auto& r : pareto_filter(state.history, config.subset)) {
        for (int k = 0; k < config.mutations_per_front_member; ++k) offer(mutate(r.genome, state.rng, 1));
    }
    if (pool.empty()) {
        p.genome = random_unevaluated(state.excluded, config.num_blocks, state.rng);
        p.meta["phase"] = "fallback";
        return p;
    }

    const auto scores = acquisition.score(*models, state.history, pool, state.rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
        if (scores[i] > scores[best] || (scores[i] == scores[best] && pool[i] < pool[best])) best = i;
    }
    p.genome = pool[best];
    p.meta["phase"] = "acquisition";
    p.meta["acquisition"] = acquisition.name();
    p.meta["score"] = scores[best];
    p.meta["pool"] = pool.size();
    p.meta["gp"] = models->params_json();
    return p;
}

std::vector<EvaluationRecord> run_search(const SearchConfig& config, Evaluator& evaluator, RunHooks hooks) {
    return run_loop(Mode::bo, config, evaluator, hooks);
}

std::vector<EvaluationRecord> run_random(const SearchConfig& config, Evaluator& evaluator, RunHooks hooks) {
    return run_loop(Mode::random, config, evaluator, hooks);
}

std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::first_dominates: return "first_dominates";
        case Relation::second_dominates: return "second_dominates";
        case Relation::incomparable: return "incomparable";
        case Relation::equal: return "equal";
    }
    return "?";
}

Relation relation(const ObjectiveVector& a, const ObjectiveVector& b, const ObjectiveSubset& subset) {
    const auto pa = project(a, subset);
    const auto pb = project(b, subset);
    if (pa == pb) return Relation::equal;
    if (dominates(pa, pb)) return Relation::first_dominates;
    if (dominates(pb, pa)) return Relation::second_dominates;
    return Relation::incomparable;
}

ReevalReport reevaluate_cross_device(std::span<const EvaluationRecord> source_log, const ObjectiveSubset& subset,
                                     Evaluator& target, std::span<const EvaluationRecord> target_log,
                                     bool reuse_source_error) {
    if (source_log.empty()) throw std::invalid_argument("reevaluate_cross_device: empty source log");
    ReevalReport report;
    report.subset = subset;
    report.target_device = target.device();

    int next_iteration = 0;
    for (const auto& r : target_log) next_iteration = std::max(next_iteration, r.iteration + 1);

    for (const auto& src : pareto_filter(source_log, subset)) {
        ReevalModel m;
        m.source = src;
        try {
            auto obj = target.evaluate(src.genome);
            if (reuse_source_error) obj.error = src.objectives.error;
            obj.validate();
            EvaluationRecord t;
            t.iteration = next_iteration++;
            t.source = Source::reeval;
            t.device = target.device();
            t.genome = src.genome;
            t.objectives = obj;
            t.timestamp = static_cast<double>(t.iteration);
            t.meta["source_device"] = src.device;
            t.meta["source_iteration"] = src.iteration;
            m.target = std::move(t);
        } catch (const std::exception& e) {
            m.failure = e.what();
        }
        report.models.push_back(std::move(m));
    }

    std::vector<EvaluationRecord> merged(target_log.begin(), target_log.end());
    for (const auto& m : report.models) {
        if (m.target) merged.push_back(*m.target);
    }
    for (auto& m : report.models) {
        if (!m.target) continue;
        m.dominated_on_target = std::any_of(merged.begin(), merged.end(), [&](const EvaluationRecord& r) {
            return dominates(r.objectives, m.target->objectives, subset);
        });
    }
    report.merged_front = pareto_filter(merged, subset);

    const auto members = subset.members();
    for (std::size_t i = 0; i < report.models.size(); ++i) {
        for (std::size_t j = i + 1; j < report.models.size(); ++j) {
            const auto& a = report.models[i];
            const auto& b = report.models[j];
            if (!a.target || !b.target) continue;
            for (auto o : members) {
                const double ds = a.source.objectives[o] - b.source.objectives[o];
                const double dt = a.target->objectives[o] - b.target->objectives[o];
                if ((ds < 0.0 && dt > 0.0) || (ds > 0.0 && dt < 0.0)) report.axis_flips.push_back({i, j, o});
            }
            const auto rs = relation(a.source.objectives, b.source.objectives, subset);
            const auto rt = relation(a.target->objectives, b.target->objectives, subset);
            if (rs != rt) report.dominance_flips.push_back({i, j, rs, rt});
        }
    }
    return report;
}

nlohmann::ordered_json report_to_json(const ReevalReport& report) {
    using json = nlohmann::ordered_json;
    auto objectives = [](const ObjectiveVector& v) {
        return json{{"error", v.error}, {"energy_j", v.energy_j}, {"time_s", v.time_s}};
    };
    json out;
    out["subset"] = report.subset.str();
    out["target_device"] = report.target_device;
    json models = json::array();
    for (const auto& m : report.models) {
        json j;
        j["source_iteration"] = m.source.iteration;
        j["source_device"] = m.source.device;
        j["genome"] = genome_to_json(m.source.genome);
        j["source_objectives"] = objectives(m.source.objectives);
        if (m.target) {
            j["target_objectives"] = objectives(m.target->objectives);
            j["dominated_on_target"] = m.dominated_on_target;
        } else {
            j["failed"] = true;
            j["message"] = m.failure;
        }
        models.push_back(std::move(j));
    }
    out["models"] = std::move(models);
    json flips = json::array();
    for (const auto& f : report.axis_flips) {
        flips.push_back({{"first", f.first}, {"second", f.second}, {"objective", to_string(f.objective)}});
    }
    out["axis_flips"] = std::move(flips);
    json dflips = json::array();
    for (const auto& f : report.dominance_flips) {
        dflips.push_back({{"first", f.first},
                          {"second", f.second},
                          {"source_relation", to_string(f.source)},
                          {"target_relation", to_string(f.target)}});
    }
    out["dominance_flips"] = std::move(dflips);
    json front = json::array();
    for (const auto& r : report.merged_front) front.push_back(record_to_json(r));
    out["merged_front"] = std::move(front);
    return out;
}

}  // namespace teadnn
