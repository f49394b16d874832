#include "teadnn/search_space.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace teadnn {

namespace {

constexpr std::array<std::string_view, kNumOperations> kOpNames = {
    "max3x3", "identity", "sep3x3", "conv3x3", "sep5x5", "conv5x5", "sep7x7", "conv7x7",
};

int block_of(int position) { return position / kFieldsPerBlock; }

bool is_input_field(int position) { return position % kFieldsPerBlock < 2; }

}  // namespace

std::string_view to_string(Operation op) { return kOpNames.at(static_cast<std::size_t>(op)); }

std::optional<Operation> operation_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i) {
        if (kOpNames[i] == name) return static_cast<Operation>(i);
    }
    return std::nullopt;
}

Operation operation_from_code(int c) {
    if (c < 0 || c >= kNumOperations) {
        throw std::invalid_argument("operation code out of range: " + std::to_string(c));
    }
    return static_cast<Operation>(c);
}

int kernel_size(Operation op) {
    switch (op) {
        case Operation::identity: return 0;
        case Operation::max3x3:
        case Operation::sep3x3:
        case Operation::conv3x3: return 3;
        case Operation::sep5x5:
        case Operation::conv5x5: return 5;
        case Operation::sep7x7:
        case Operation::conv7x7: return 7;
    }
    return 0;
}

bool is_separable(Operation op) {
    return op == Operation::sep3x3 || op == Operation::sep5x5 || op == Operation::sep7x7;
}

bool is_convolution(Operation op) {
    return op == Operation::conv3x3 || op == Operation::conv5x5 || op == Operation::conv7x7;
}

std::string_view to_string(GenomeField f) {
    switch (f) {
        case GenomeField::input1: return "input1";
        case GenomeField::input2: return "input2";
        case GenomeField::op1: return "op1";
        case GenomeField::op2: return "op2";
    }
    return "?";
}

std::vector<int> CellGenome::encode_unchecked(const CellGenome& g) {
    std::vector<int> v;
    v.reserve(g.blocks.size() * kFieldsPerBlock);
    for (const auto& b : g.blocks) {
        v.push_back(b.input1);
        v.push_back(b.input2);
        v.push_back(code(b.op1));
        v.push_back(code(b.op2));
    }
    return v;
}

std::vector<Violation> validate_genome(const CellGenome& g, int num_blocks) {
    std::vector<Violation> out;
    if (g.num_blocks() != num_blocks) {
        out.push_back({-1, GenomeField::input1,
                       "expected " + std::to_string(num_blocks) + " blocks, got " +
                           std::to_string(g.num_blocks())});
    }
    for (int b = 0; b < g.num_blocks(); ++b) {
        const auto& blk = g.blocks[static_cast<std::size_t>(b)];
        const int bound = num_inputs_at(b);
        auto check_input = [&](int idx, GenomeField f) {
            if (idx < 0 || idx >= bound) {
                out.push_back({b, f,
                               "block " + std::to_string(b) + ": " + std::string(to_string(f)) +
                                   " index " + std::to_string(idx) + " >= " + std::to_string(bound)});
            }
        };
        auto check_op = [&](Operation op, GenomeField f) {
            const int c = code(op);
            if (c < 0 || c >= kNumOperations) {
                out.push_back({b, f,
                               "block " + std::to_string(b) + ": " + std::string(to_string(f)) +
                                   " code " + std::to_string(c) + " out of range"});
            }
        };
        check_input(blk.input1, GenomeField::input1);
        check_input(blk.input2, GenomeField::input2);
        check_op(blk.op1, GenomeField::op1);
        check_op(blk.op2, GenomeField::op2);
    }
    return out;
}

bool is_valid(const CellGenome& g, int num_blocks) { return validate_genome(g, num_blocks).empty(); }

void require_valid(const CellGenome& g, int num_blocks) {
    const auto violations = validate_genome(g, num_blocks);
    if (violations.empty()) return;
    std::string msg = "invalid genome:";
    for (const auto& v : violations) msg += " [" + v.message + "]";
    throw std::invalid_argument(msg);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    // Rejection sampling on the top of the 64-bit range.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

int field_cardinality(int position) {
    return is_input_field(position) ? num_inputs_at(block_of(position)) : kNumOperations;
}

CellGenome random_genome(Rng& rng, int num_blocks) {
    if (num_blocks < 1) throw std::invalid_argument("random_genome: num_blocks must be >= 1");
    CellGenome g;
    g.blocks.resize(static_cast<std::size_t>(num_blocks));
    for (int b = 0; b < num_blocks; ++b) {
        auto& blk = g.blocks[static_cast<std::size_t>(b)];
        const auto n_in = static_cast<std::uint64_t>(num_inputs_at(b));
        blk.input1 = static_cast<int>(uniform_index(rng, n_in));
        blk.input2 = static_cast<int>(uniform_index(rng, n_in));
        blk.op1 = static_cast<Operation>(uniform_index(rng, kNumOperations));
        blk.op2 = static_cast<Operation>(uniform_index(rng, kNumOperations));
    }
    return g;
}

std::vector<int> encode(const CellGenome& g) {
    require_valid(g, g.num_blocks());
    return CellGenome::encode_unchecked(g);
}

CellGenome decode(const std::vector<int>& v, int num_blocks) {
    const auto expected = static_cast<std::size_t>(num_blocks) * kFieldsPerBlock;
    if (v.size() != expected) {
        throw std::invalid_argument("decode: expected " + std::to_string(expected) +
                                    " values, got " + std::to_string(v.size()));
    }
    CellGenome g;
    g.blocks.resize(static_cast<std::size_t>(num_blocks));
    for (int b = 0; b < num_blocks; ++b) {
        const auto base = static_cast<std::size_t>(b * kFieldsPerBlock);
        auto& blk = g.blocks[static_cast<std::size_t>(b)];
        blk.input1 = v[base];
        blk.input2 = v[base + 1];
        blk.op1 = operation_from_code(v[base + 2]);
        blk.op2 = operation_from_code(v[base + 3]);
    }
    require_valid(g, num_blocks);
    return g;
}

boost::multiprecision::cpp_int search_space_size(int num_blocks) {
    if (num_blocks < 1) throw std::invalid_argument("search_space_size: num_blocks must be >= 1");
    boost::multiprecision::cpp_int size = 1;
    for (int b = 0; b < num_blocks; ++b) {
        const int inputs = num_inputs_at(b);
        size *= inputs * inputs * kNumOperations * kNumOperations;
    }
    return size;
}

GenomeEnumerator::GenomeEnumerator(int num_blocks, std::uint64_t cap) {
    const auto total = search_space_size(num_blocks);
    if (total > cap) {
        throw std::length_error("enumeration of " + total.str() + " genomes exceeds cap " +
                                std::to_string(cap));
    }
    size_ = total.convert_to<std::uint64_t>();
    digits_.assign(static_cast<std::size_t>(num_blocks) * kFieldsPerBlock, 0);
}

std::optional<CellGenome> GenomeEnumerator::next() {
    if (done_) return std::nullopt;
    if (started_) {
        // Odometer increment, last position fastest.
        int pos = static_cast<int>(digits_.size()) - 1;
        for (; pos >= 0; --pos) {
            auto& d = digits_[static_cast<std::size_t>(pos)];
            if (++d < field_cardinality(pos)) break;
            d = 0;
        }
        if (pos < 0) {
            done_ = true;
            return std::nullopt;
        }
    }
    started_ = true;
    return decode(digits_, static_cast<int>(digits_.size()) / kFieldsPerBlock);
}

std::vector<CellGenome> enumerate_genomes(int num_blocks, std::uint64_t cap) {
    GenomeEnumerator it(num_blocks, cap);
    std::vector<CellGenome> out;
    out.reserve(it.size());
    while (auto g = it.next()) out.push_back(std::move(*g));
    return out;
}

std::vector<int> unused_block_outputs(const CellGenome& g) {
    std::vector<bool> used(g.blocks.size(), false);
    for (const auto& b : g.blocks) {
        for (int idx : {b.input1, b.input2}) {
            if (idx >= 2) used.at(static_cast<std::size_t>(idx - 2)) = true;
        }
    }
    std::vector<int> out;
    for (std::size_t j = 0; j < used.size(); ++j) {
        if (!used[j]) out.push_back(static_cast<int>(j));
    }
    return out;
}

CellGenome mutate(const CellGenome& g, Rng& rng, int num_fields) {
    const int n = g.num_blocks() * kFieldsPerBlock;
    if (num_fields < 1 || num_fields > n) {
        throw std::invalid_argument("mutate: num_fields must be in [1, " + std::to_string(n) + "]");
    }
    auto v = encode(g);
    // Partial Fisher-Yates picks distinct positions.
    std::vector<int> positions(static_cast<std::size_t>(n));
    std::iota(positions.begin(), positions.end(), 0);
    for (int i = 0; i < num_fields; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       uniform_index(rng, static_cast<std::uint64_t>(n - i));
        std::swap(positions[static_cast<std::size_t>(i)], positions[j]);
        const int pos = positions[static_cast<std::size_t>(i)];
        v[static_cast<std::size_t>(pos)] = static_cast<int>(
            uniform_index(rng, static_cast<std::uint64_t>(field_cardinality(pos))));
    }
    return decode(v, g.num_blocks());
}

std::string to_string(const CellGenome& g) {
    std::ostringstream os;
    os << '[';
    for (std::size_t b = 0; b < g.blocks.size(); ++b) {
        const auto& blk = g.blocks[b];
        if (b) os << ' ';
        os << '(' << blk.input1 << ',' << blk.input2 << ',' << to_string(blk.op1) << ','
           << to_string(blk.op2) << ')';
    }
    os << ']';
    return os.str();
}

nlohmann::ordered_json genome_to_json(const CellGenome& g) {
    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
    for (const auto& b : g.blocks) {
        blocks.push_back({b.input1, b.input2, code(b.op1), code(b.op2)});
    }
    nlohmann::ordered_json j;
    j["blocks"] = std::move(blocks);
    return j;
}

CellGenome genome_from_json(const nlohmann::ordered_json& j, std::optional<int> num_blocks) {
    if (!j.is_object() || !j.contains("blocks") || !j.at("blocks").is_array()) {
        throw std::invalid_argument("genome JSON must be an object with a \"blocks\" array");
    }
    std::vector<int> v;
    const auto& blocks = j.at("blocks");
    for (const auto& b : blocks) {
        if (!b.is_array() || b.size() != kFieldsPerBlock) {
            throw std::invalid_argument("genome block must be [i1, i2, o1, o2]");
        }
        for (const auto& x : b) v.push_back(x.get<int>());
    }
    return decode(v, num_blocks.value_or(static_cast<int>(blocks.size())));
}

}  // namespace teadnn
