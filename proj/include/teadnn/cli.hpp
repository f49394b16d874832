#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "teadnn/evaluator.hpp"
#include "teadnn/network.hpp"
#include "teadnn/run_log.hpp"
#include "teadnn/search.hpp"

namespace teadnn::cli {

/// Search configuration file. Field names match the JSON keys.
struct RunConfig {
    std::uint64_t seed = 0;
    int budget = 400;
    int n_init = 10;
    ObjectiveSubset objective_subset;
    MacroConfig macro;
    nlohmann::ordered_json evaluator = {{"type", "synthetic"}, {"profile", "movidius-ncs"}};
    std::filesystem::path log_path = "run.jsonl";

    // Optional knobs.
    int num_blocks = kCellBlocks;
    TrainingConfig training;
    int mc_samples = 64;
    int pool_random = 500;
    int mutations_per_front_member = 10;
    bool wall_clock = false;

    static RunConfig from_json(const nlohmann::ordered_json& j);
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;
    void validate() const;

    SearchConfig search_config() const;
};

struct SearchOutcome {
    std::size_t records = 0;
    std::size_t appended = 0;
};

/// Runs (or resumes) a search or random-sampling run against the config's
/// log. Refuses logs written with a different seed, mode, or evaluator.
SearchOutcome cmd_search(const RunConfig& config, Source mode);

struct ParetoSnapshot {
    std::size_t prefix = 0;
    std::vector<EvaluationRecord> front;
};

/// One snapshot over the whole log, or one per prefix of stride*i records.
std::vector<ParetoSnapshot> cmd_pareto(std::span<const EvaluationRecord> records, const ObjectiveSubset& subset,
                                       std::optional<std::size_t> stride = std::nullopt);

nlohmann::ordered_json cmd_trace(const std::filesystem::path& csv, double threshold_w);

struct EnumerationRow {
    CellGenome genome;
    ObjectiveVector objectives;
    bool is_pareto = false;
};

/// Exhaustive synthetic evaluation; at most 2 blocks.
std::vector<EnumerationRow> cmd_enumerate(int num_blocks, const DeviceProfile& profile, const MacroConfig& macro,
                                          const ObjectiveSubset& subset, std::uint64_t seed = 0);

/// CSV `iteration,error,energy_j,time_s,is_pareto`.
void write_export_csv(std::ostream& out, std::span<const EvaluationRecord> records, const ObjectiveSubset& subset);

/// Full command line. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace teadnn::cli
