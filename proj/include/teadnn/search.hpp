#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "teadnn/evaluator.hpp"
#include "teadnn/gp.hpp"
#include "teadnn/kernels.hpp"
#include "teadnn/run_log.hpp"

namespace teadnn {

/// Surrogate coordinates: error as is, energy and time on a log scale.
double to_surrogate_space(Objective o, double value);
ObjPoint surrogate_point(const ObjectiveVector& v, const ObjectiveSubset& subset);  // packed

/// Worst observed value plus 10% of its magnitude, per packed coordinate.
ObjPoint reference_point(std::span<const ObjPoint> observed, int dims);

/// One GP per objective of the subset, in packed order.
struct SurrogateSet {
    ObjectiveSubset subset;
    std::vector<GPModel> models;

    static SurrogateSet fit(std::span<const EvaluationRecord> history, const ObjectiveSubset& subset,
                            const FitOptions& options);
    /// Same objectives, kernel parameters taken from `previous` (no optimization).
    static SurrogateSet condition(std::span<const EvaluationRecord> history, const SurrogateSet& previous);
    nlohmann::ordered_json params_json() const;
};

/// Monte-Carlo expected hypervolume improvement of one candidate over `front`
/// (packed surrogate coordinates).
double acquisition_score(const SurrogateSet& models, std::span<const ObjPoint> front, const ObjPoint& ref,
                         const CellGenome& candidate, Rng& rng, int mc_samples = 64);

/// Pluggable pool scorer.
class Acquisition {
public:
    virtual ~Acquisition() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> score(const SurrogateSet& models, std::span<const EvaluationRecord> history,
                                      std::span<const CellGenome> pool, Rng& rng) const = 0;
};

/// Expected hypervolume improvement with common random numbers across the pool.
class MonteCarloEhvi final : public Acquisition {
public:
    explicit MonteCarloEhvi(int mc_samples = 64, bool parallel = true) : mc_samples_(mc_samples), parallel_(parallel) {}
    std::string name() const override { return "mc-ehvi"; }
    std::vector<double> score(const SurrogateSet& models, std::span<const EvaluationRecord> history,
                              std::span<const CellGenome> pool, Rng& rng) const override;

private:
    int mc_samples_;
    bool parallel_;
};

struct SearchConfig {
    std::uint64_t seed = 0;
    int budget = 400;
    int n_init = 10;
    ObjectiveSubset subset;
    int num_blocks = kCellBlocks;
    int pool_random = 500;
    int mutations_per_front_member = 10;
    int mc_samples = 64;
    FitOptions gp;
    /// Kernel parameters are re-optimized once the history has grown by this
    /// factor since the last optimization; in between they are reused.
    double refit_growth = 1.2;
    int max_retries = 3;
    int max_consecutive_failures = 20;
    bool wall_clock = false;  // false: timestamp = iteration index
    bool parallel = true;
    /// Copied into every record's meta; identifies the run for resume checks.
    nlohmann::ordered_json run_meta = nlohmann::ordered_json::object();

    void validate() const;
};

struct SearchState {
    std::vector<EvaluationRecord> history;
    std::set<std::vector<int>> excluded;  // encodings already evaluated or failed
    Rng rng;
};

struct Proposal {
    CellGenome genome;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// Random genome not in `excluded`. Falls back to enumeration when random
/// draws keep colliding; throws std::runtime_error if the space is exhausted.
CellGenome random_unevaluated(const std::set<std::vector<int>>& excluded, int num_blocks, Rng& rng);

/// Warm-up (fewer than n_init records, or no models): a random unevaluated
/// genome. Otherwise the acquisition argmax over 500 random genomes plus
/// single-field mutations of the current front, ties to the lowest encoding.
Proposal propose_next(const SearchConfig& config, SearchState& state, const SurrogateSet* models,
                      const Acquisition& acquisition);

struct RunHooks {
    RunLogWriter* writer = nullptr;
    /// Entries of an interrupted run with the same config, replayed in order
    /// instead of calling the evaluator.
    std::span<const LogEntry> replay;
};

std::vector<EvaluationRecord> run_search(const SearchConfig& config, Evaluator& evaluator, RunHooks hooks = {});
std::vector<EvaluationRecord> run_random(const SearchConfig& config, Evaluator& evaluator, RunHooks hooks = {});

class ReplayMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Relation { first_dominates, second_dominates, incomparable, equal };
std::string_view to_string(Relation r);
Relation relation(const ObjectiveVector& a, const ObjectiveVector& b, const ObjectiveSubset& subset);

struct ReevalModel {
    EvaluationRecord source;
    std::optional<EvaluationRecord> target;
    std::string failure;
    bool dominated_on_target = false;
};

struct AxisFlip {
    std::size_t first = 0, second = 0;  // indices into ReevalReport::models
    Objective objective = Objective::energy;
};

struct DominanceFlip {
    std::size_t first = 0, second = 0;
    Relation source = Relation::incomparable;
    Relation target = Relation::incomparable;
};

struct ReevalReport {
    ObjectiveSubset subset;
    std::string target_device;
    std::vector<ReevalModel> models;
    std::vector<AxisFlip> axis_flips;
    std::vector<DominanceFlip> dominance_flips;
    std::vector<EvaluationRecord> merged_front;
};

/// Re-measures the source front on another device and merges the results
/// with the target device's own records. With `reuse_source_error` the
/// error objective is carried over from the source record.
ReevalReport reevaluate_cross_device(std::span<const EvaluationRecord> source_log, const ObjectiveSubset& subset,
                                     Evaluator& target, std::span<const EvaluationRecord> target_log = {},
                                     bool reuse_source_error = true);

nlohmann::ordered_json report_to_json(const ReevalReport& report);

}  // namespace teadnn
