#include "teadnn/run_log.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace teadnn {

std::string_view to_string(Source s) {
    switch (s) {
        case Source::bo: return "bo";
        case Source::random: return "random";
        case Source::reeval: return "reeval";
    }
    return "?";
}

Source source_from_string(std::string_view s) {
    if (s == "bo") return Source::bo;
    if (s == "random") return Source::random;
    if (s == "reeval") return Source::reeval;
    throw std::invalid_argument("unknown record source: " + std::string(s));
}

nlohmann::ordered_json record_to_json(const EvaluationRecord& r) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["source"] = to_string(r.source);
    j["device"] = r.device;
    j["genome"] = genome_to_json(r.genome);
    j["objectives"] = {{"error", r.objectives.error},
                       {"energy_j", r.objectives.energy_j},
                       {"time_s", r.objectives.time_s}};
    j["timestamp"] = r.timestamp;
    j["meta"] = r.meta;
    return j;
}

EvaluationRecord record_from_json(const nlohmann::ordered_json& j) {
    EvaluationRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.source = source_from_string(j.at("source").get<std::string>());
    r.device = j.value("device", std::string());
    r.genome = genome_from_json(j.at("genome"));
    const auto& o = j.at("objectives");
    r.objectives.error = o.at("error").get<double>();
    r.objectives.energy_j = o.at("energy_j").get<double>();
    r.objectives.time_s = o.at("time_s").get<double>();
    r.timestamp = j.value("timestamp", 0.0);
    r.meta = j.value("meta", nlohmann::ordered_json::object());
    return r;
}

nlohmann::ordered_json entry_to_json(const LogEntry& e) {
    if (!e.failed) return record_to_json(e.record);
    nlohmann::ordered_json j;
    j["failed"] = true;
    j["iteration"] = e.record.iteration;
    j["source"] = to_string(e.record.source);
    j["device"] = e.record.device;
    j["genome"] = genome_to_json(e.record.genome);
    j["message"] = e.message;
    j["attempts"] = e.attempts;
    j["timestamp"] = e.record.timestamp;
    return j;
}

LogEntry entry_from_json(const nlohmann::ordered_json& j) {
    LogEntry e;
    if (j.value("failed", false)) {
        e.failed = true;
        e.record.iteration = j.value("iteration", 0);
        e.record.source = source_from_string(j.at("source").get<std::string>());
        e.record.device = j.value("device", std::string());
        e.record.genome = genome_from_json(j.at("genome"));
        e.record.timestamp = j.value("timestamp", 0.0);
        e.message = j.value("message", std::string());
        e.attempts = j.value("attempts", 0);
        return e;
    }
    e.record = record_from_json(j);
    return e;
}

std::vector<LogEntry> read_run_log(const std::filesystem::path& path) {
    std::vector<LogEntry> out;
    std::ifstream in(path);
    if (!in) {
        if (std::filesystem::exists(path)) throw std::runtime_error("cannot read run log " + path.string());
        return out;
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(entry_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<EvaluationRecord> successful_records(std::span<const LogEntry> entries) {
    std::vector<EvaluationRecord> out;
    for (const auto& e : entries) {
        if (!e.failed) out.push_back(e.record);
    }
    return out;
}

std::vector<EvaluationRecord> read_records(const std::filesystem::path& path) {
    return successful_records(read_run_log(path));
}

RunLogWriter::RunLogWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) throw std::runtime_error("cannot open run log " + path.string() + ": " + std::strerror(errno));
}

RunLogWriter::~RunLogWriter() {
    if (file_) std::fclose(file_);
}

void RunLogWriter::append(const LogEntry& entry) {
    const auto line = entry_to_json(entry).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
        throw std::runtime_error("write to run log " + path_.string() + " failed");
    }
    ::fsync(::fileno(file_));
}

LogLock::LogLock(const std::filesystem::path& log_path) {
    const auto lock_path = log_path.string() + ".lock";
    if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open lock file " + lock_path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("run log " + log_path.string() + " is in use by another process");
    }
}

LogLock::~LogLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::vector<EvaluationRecord> pareto_filter(std::span<const EvaluationRecord> records, const ObjectiveSubset& subset) {
    std::vector<ObjectiveVector> values;
    values.reserve(records.size());
    for (const auto& r : records) values.push_back(r.objectives);
    std::vector<EvaluationRecord> out;
    for (auto i : pareto_indices(values, subset)) out.push_back(records[i]);
    return out;
}

}  // namespace teadnn
