#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "teadnn/pareto.hpp"
#include "teadnn/search_space.hpp"

namespace teadnn {

enum class Source { bo, random, reeval };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct EvaluationRecord {
    int iteration = 0;
    Source source = Source::bo;
    std::string device;
    CellGenome genome;
    ObjectiveVector objectives;
    double timestamp = 0.0;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

/// One line of a run log: a record, or a genome that failed every attempt.
struct LogEntry {
    bool failed = false;
    EvaluationRecord record;  // objectives unset when failed
    std::string message;
    int attempts = 0;
};

nlohmann::ordered_json record_to_json(const EvaluationRecord& r);
EvaluationRecord record_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json entry_to_json(const LogEntry& e);
LogEntry entry_from_json(const nlohmann::ordered_json& j);

/// JSON-lines; a missing file is an empty log.
std::vector<LogEntry> read_run_log(const std::filesystem::path& path);
std::vector<EvaluationRecord> successful_records(std::span<const LogEntry> entries);
std::vector<EvaluationRecord> read_records(const std::filesystem::path& path);

/// Append-only writer; every line is flushed to disk before append() returns.
class RunLogWriter {
public:
    explicit RunLogWriter(const std::filesystem::path& path);
    ~RunLogWriter();
    RunLogWriter(const RunLogWriter&) = delete;
    RunLogWriter& operator=(const RunLogWriter&) = delete;

    void append(const LogEntry& entry);

private:
    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
};

/// Exclusive advisory lock on `<log>.lock`, held for the object's lifetime.
class LogLock {
public:
    explicit LogLock(const std::filesystem::path& log_path);
    ~LogLock();
    LogLock(const LogLock&) = delete;
    LogLock& operator=(const LogLock&) = delete;

private:
    int fd_ = -1;
};

/// Records kept by the Pareto filter over `subset`, in input order.
std::vector<EvaluationRecord> pareto_filter(std::span<const EvaluationRecord> records, const ObjectiveSubset& subset);

}  // namespace teadnn
