#include "teadnn/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "teadnn/kernels.hpp"
#include "teadnn/trace.hpp"

namespace teadnn::cli {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

json objectives_json(const ObjectiveVector& v) {
    return json{{"error", v.error}, {"energy_j", v.energy_j}, {"time_s", v.time_s}};
}

json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(p.string() + ": " + e.what());
    }
}

// Inline JSON object or path to a JSON file.
json json_arg(const std::string& s) {
    if (!s.empty() && s.front() == '{') return json::parse(s);
    return read_json_file(s);
}

json run_identity(const RunConfig& c, const Evaluator& ev, Source mode) {
    json j;
    j["mode"] = to_string(mode);
    j["seed"] = c.seed;
    j["evaluator"] = ev.describe();
    return j;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.budget = j.value("budget", c.budget);
    c.n_init = j.value("n_init", c.n_init);
    if (j.contains("objective_subset")) {
        const auto& s = j.at("objective_subset");
        if (s.is_string()) {
            c.objective_subset = ObjectiveSubset::parse(s.get<std::string>());
        } else {
            std::string joined;
            for (const auto& x : s) joined += x.get<std::string>() + ",";
            c.objective_subset = ObjectiveSubset::parse(joined);
        }
    }
    if (j.contains("macro")) c.macro = macro_from_json(j.at("macro"));
    if (j.contains("evaluator")) c.evaluator = j.at("evaluator");
    if (j.contains("log_path")) c.log_path = j.at("log_path").get<std::string>();
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    if (j.contains("training")) c.training = training_from_json(j.at("training"));
    c.mc_samples = j.value("mc_samples", c.mc_samples);
    c.pool_random = j.value("pool_random", c.pool_random);
    c.mutations_per_front_member = j.value("mutations_per_front_member", c.mutations_per_front_member);
    c.wall_clock = j.value("wall_clock", c.wall_clock);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["budget"] = budget;
    j["n_init"] = n_init;
    json subset = json::array();
    for (auto o : objective_subset.members()) subset.push_back(to_string(o));
    j["objective_subset"] = std::move(subset);
    j["macro"] = macro_to_json(macro);
    j["evaluator"] = evaluator;
    j["log_path"] = log_path.string();
    j["num_blocks"] = num_blocks;
    j["training"] = training_to_json(training);
    j["mc_samples"] = mc_samples;
    j["pool_random"] = pool_random;
    j["mutations_per_front_member"] = mutations_per_front_member;
    j["wall_clock"] = wall_clock;
    return j;
}

void RunConfig::validate() const {
    if (!(budget >= n_init && n_init >= 1)) throw std::invalid_argument("config: need budget >= n_init >= 1");
    macro.validate();
    search_config().validate();
}

SearchConfig RunConfig::search_config() const {
    SearchConfig s;
    s.seed = seed;
    s.budget = budget;
    s.n_init = n_init;
    s.subset = objective_subset;
    s.num_blocks = num_blocks;
    s.pool_random = pool_random;
    s.mutations_per_front_member = mutations_per_front_member;
    s.mc_samples = mc_samples;
    s.wall_clock = wall_clock;
    return s;
}

SearchOutcome cmd_search(const RunConfig& config, Source mode) {
    config.validate();
    auto evaluator = make_evaluator(config.evaluator, config.macro, config.training);
    const auto identity = run_identity(config, *evaluator, mode);

    LogLock lock(config.log_path);
    const auto entries = read_run_log(config.log_path);
    if (!entries.empty()) {
        const auto& first = entries.front().record;
        const auto logged = first.meta.value("run", json::object());
        if (logged != identity) {
            throw std::runtime_error("run log " + config.log_path.string() +
                                     " was written by a different configuration (logged " + logged.dump() +
                                     ", current " + identity.dump() + ")");
        }
    }
    const auto done = successful_records(entries).size();
    if (done >= static_cast<std::size_t>(config.budget)) return {done, 0};

    auto sc = config.search_config();
    sc.run_meta["run"] = identity;
    RunLogWriter writer(config.log_path);
    RunHooks hooks{&writer, entries};
    const auto history = mode == Source::random ? run_random(sc, *evaluator, hooks) : run_search(sc, *evaluator, hooks);
    return {history.size(), history.size() - done};
}

std::vector<ParetoSnapshot> cmd_pareto(std::span<const EvaluationRecord> records, const ObjectiveSubset& subset,
                                       std::optional<std::size_t> stride) {
    if (records.empty()) throw std::invalid_argument("run log is empty");
    std::vector<ParetoSnapshot> out;
    if (!stride) {
        out.push_back({records.size(), pareto_filter(records, subset)});
        return out;
    }
    if (*stride == 0) throw std::invalid_argument("stride must be positive");
    for (std::size_t prefix = *stride; prefix <= records.size(); prefix += *stride) {
        out.push_back({prefix, pareto_filter(records.first(prefix), subset)});
    }
    return out;
}

json cmd_trace(const std::filesystem::path& csv, double threshold_w) {
    const auto m = measure_from_trace(read_trace_csv(csv), threshold_w);
    json j;
    j["time_s"] = m.time_s;
    j["energy_j"] = m.energy_j;
    j["t1_ms"] = m.t1_ms;
    j["t2_ms"] = m.t2_ms;
    return j;
}

std::vector<EnumerationRow> cmd_enumerate(int num_blocks, const DeviceProfile& profile, const MacroConfig& macro,
                                          const ObjectiveSubset& subset, std::uint64_t seed) {
    if (num_blocks < 1 || num_blocks > 2) throw std::invalid_argument("enumerate supports 1 or 2 blocks");
    const auto genomes = enumerate_genomes(num_blocks);
    const auto values = kernels::parallel::synthetic_objectives(genomes, macro, profile, seed);
    const auto front = pareto_indices(values, subset);
    std::vector<EnumerationRow> rows(genomes.size());
    for (std::size_t i = 0; i < genomes.size(); ++i) rows[i] = {genomes[i], values[i], false};
    for (auto i : front) rows[i].is_pareto = true;
    return rows;
}

void write_export_csv(std::ostream& out, std::span<const EvaluationRecord> records, const ObjectiveSubset& subset) {
    std::vector<ObjectiveVector> values;
    for (const auto& r : records) values.push_back(r.objectives);
    std::vector<bool> on_front(records.size(), false);
    for (auto i : pareto_indices(values, subset)) on_front[i] = true;
    out << "iteration,error,energy_j,time_s,is_pareto\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out << r.iteration << ',' << fmt_double(r.objectives.error) << ',' << fmt_double(r.objectives.energy_j) << ','
            << fmt_double(r.objectives.time_s) << ',' << (on_front[i] ? 1 : 0) << '\n';
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Time-energy-accuracy neural architecture search"};
    app.require_subcommand(1);

    std::string config_path, log_path, out_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> budget;
    app.add_option("--config", config_path, "Run configuration (JSON)");
    app.add_option("--seed", seed, "Random seed (overrides config)");
    app.add_option("--budget", budget, "Evaluation budget (overrides config)");
    app.add_option("--log", log_path, "Run log (JSON lines)");
    app.add_option("--out", out_path, "Write output here instead of stdout");

    std::string subset_str = "error,energy,time";
    std::string format = "json";

    auto* search = app.add_subcommand("search", "Bayesian-optimization search");
    auto* random = app.add_subcommand("random", "Uniform random sampling baseline");

    auto* pareto = app.add_subcommand("pareto", "Pareto front of a run log");
    std::optional<std::size_t> stride;
    pareto->add_option("--subset", subset_str, "Objectives, e.g. error,energy");
    pareto->add_option("--stride", stride, "Emit one front per prefix of stride*i records");
    pareto->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    auto* trace = app.add_subcommand("trace", "Time and energy from a power trace");
    std::string trace_path, profile_name;
    std::optional<double> threshold;
    trace->add_option("csv", trace_path, "Trace CSV (t_ms,power_w)")->required();
    auto* thr_opt = trace->add_option("--threshold", threshold, "Working-state threshold in watts");
    trace->add_option("--profile", profile_name, "Device profile supplying the threshold")->excludes(thr_opt);

    auto* reeval = app.add_subcommand("reeval", "Re-evaluate a Pareto front on another device");
    std::string target_spec, target_log;
    bool fresh_error = false;
    reeval->add_option("--subset", subset_str, "Objectives used for dominance");
    reeval->add_option("--target", target_spec, "Target evaluator spec (JSON file or inline object)")->required();
    reeval->add_option("--target-log", target_log, "Existing run log of the target device");
    reeval->add_flag("--fresh-error", fresh_error, "Use the target evaluator's error instead of the source's");

    auto* enumerate = app.add_subcommand("enumerate", "Exhaustive synthetic evaluation of a small space");
    int blocks = 1;
    std::string enum_profile = "movidius-ncs";
    enumerate->add_option("--blocks", blocks, "Blocks per cell (1 or 2)");
    enumerate->add_option("--profile", enum_profile, "Synthetic device profile");
    enumerate->add_option("--subset", subset_str, "Objectives used for the front");
    enumerate->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    auto* exportc = app.add_subcommand("export", "Plot-ready CSV of a run log");
    exportc->add_option("--subset", subset_str, "Objectives used for is_pareto");

    for (auto* sub : {search, random, pareto, trace, reeval, enumerate, exportc}) sub->fallthrough();

    std::vector<const char*> argv{"teadnn"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    std::ofstream file_out;
    std::ostream* sink = &out;
    auto open_sink = [&] {
        if (!out_path.empty()) {
            file_out.open(out_path);
            if (!file_out) throw std::runtime_error("cannot write " + out_path);
            sink = &file_out;
        }
    };

    try {
        auto load_config = [&] {
            RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
            if (seed) c.seed = *seed;
            if (budget) c.budget = *budget;
            if (!log_path.empty()) c.log_path = log_path;
            return c;
        };
        auto require_log = [&]() -> std::filesystem::path {
            if (!log_path.empty()) return log_path;
            if (!config_path.empty()) return load_config().log_path;
            throw std::invalid_argument("--log is required");
        };

        if (search->parsed() || random->parsed()) {
            const auto config = load_config();
            const auto mode = search->parsed() ? Source::bo : Source::random;
            const auto outcome = cmd_search(config, mode);
            open_sink();
            json j;
            j["log"] = config.log_path.string();
            j["records"] = outcome.records;
            j["appended"] = outcome.appended;
            const auto records = read_records(config.log_path);
            j["front_size"] = pareto_filter(records, config.objective_subset).size();
            *sink << j.dump() << '\n';
        } else if (pareto->parsed()) {
            const auto subset = ObjectiveSubset::parse(subset_str);
            const auto records = read_records(require_log());
            const auto snaps = cmd_pareto(records, subset, stride);
            open_sink();
            if (format == "csv") {
                *sink << "prefix,iteration,error,energy_j,time_s\n";
                for (const auto& s : snaps)
                    for (const auto& r : s.front)
                        *sink << s.prefix << ',' << r.iteration << ',' << fmt_double(r.objectives.error) << ','
                              << fmt_double(r.objectives.energy_j) << ',' << fmt_double(r.objectives.time_s) << '\n';
            } else {
                auto front_json = [](const std::vector<EvaluationRecord>& f) {
                    json a = json::array();
                    for (const auto& r : f) a.push_back(record_to_json(r));
                    return a;
                };
                json j;
                j["subset"] = subset.str();
                if (stride) {
                    json arr = json::array();
                    for (const auto& s : snaps) arr.push_back({{"prefix", s.prefix}, {"front", front_json(s.front)}});
                    j["snapshots"] = std::move(arr);
                } else {
                    j["front"] = front_json(snaps.front().front);
                }
                *sink << j.dump(2) << '\n';
            }
        } else if (trace->parsed()) {
            double thr = 0.0;
            if (threshold) {
                thr = *threshold;
            } else if (!profile_name.empty()) {
                thr = find_profile(profile_name).threshold_w;
            } else {
                throw std::invalid_argument("trace needs --threshold or --profile");
            }
            const auto j = cmd_trace(trace_path, thr);
            open_sink();
            *sink << j.dump() << '\n';
        } else if (reeval->parsed()) {
            const auto subset = ObjectiveSubset::parse(subset_str);
            const auto source = read_records(require_log());
            const MacroConfig macro = config_path.empty() ? MacroConfig{} : load_config().macro;
            const TrainingConfig training = config_path.empty() ? TrainingConfig{} : load_config().training;
            auto target = make_evaluator(json_arg(target_spec), macro, training);
            std::vector<EvaluationRecord> tlog;
            if (!target_log.empty()) tlog = read_records(target_log);
            const auto report = reevaluate_cross_device(source, subset, *target, tlog, !fresh_error);
            open_sink();
            *sink << report_to_json(report).dump(2) << '\n';
        } else if (enumerate->parsed()) {
            const auto subset = ObjectiveSubset::parse(subset_str);
            const MacroConfig macro = config_path.empty() ? MacroConfig{} : load_config().macro;
            const auto rows = cmd_enumerate(blocks, find_profile(enum_profile), macro, subset, seed.value_or(0));
            open_sink();
            if (format == "csv") {
                *sink << "index,genome,error,energy_j,time_s,is_pareto\n";
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    std::string enc;
                    for (int x : encode(rows[i].genome)) enc += (enc.empty() ? "" : " ") + std::to_string(x);
                    *sink << i << ',' << enc << ',' << fmt_double(rows[i].objectives.error) << ','
                          << fmt_double(rows[i].objectives.energy_j) << ',' << fmt_double(rows[i].objectives.time_s)
                          << ',' << (rows[i].is_pareto ? 1 : 0) << '\n';
                }
            } else {
                json j;
                j["num_blocks"] = blocks;
                j["profile"] = enum_profile;
                j["subset"] = subset.str();
                json arr = json::array();
                json front = json::array();
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    arr.push_back({{"index", i},
                                   {"genome", genome_to_json(rows[i].genome)},
                                   {"objectives", objectives_json(rows[i].objectives)},
                                   {"is_pareto", rows[i].is_pareto}});
                    if (rows[i].is_pareto) front.push_back(i);
                }
                j["rows"] = std::move(arr);
                j["front"] = std::move(front);
                *sink << j.dump() << '\n';
            }
        } else if (exportc->parsed()) {
            const auto subset = ObjectiveSubset::parse(subset_str);
            const auto records = read_records(require_log());
            open_sink();
            write_export_csv(*sink, records, subset);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace teadnn::cli
