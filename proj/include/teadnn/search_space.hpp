#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

namespace teadnn {

using Rng = std::mt19937_64;

/// Number of building blocks in a searched cell.
inline constexpr int kCellBlocks = 5;
inline constexpr int kNumOperations = 8;
inline constexpr int kFieldsPerBlock = 4;

enum class Operation : std::uint8_t {
    max3x3 = 0,
    identity = 1,
    sep3x3 = 2,
    conv3x3 = 3,
    sep5x5 = 4,
    conv5x5 = 5,
    sep7x7 = 6,
    conv7x7 = 7,
};

std::string_view to_string(Operation op);
std::optional<Operation> operation_from_string(std::string_view name);
Operation operation_from_code(int code);
inline int code(Operation op) { return static_cast<int>(op); }

/// Spatial kernel size; 0 for identity.
int kernel_size(Operation op);
bool is_separable(Operation op);
bool is_convolution(Operation op);

/// Input reference inside a cell: 0 = previous cell, 1 = the cell before it,
/// 2 + j = output of block j of the current cell.
struct BlockSpec {
    int input1 = 0;
    int input2 = 1;
    Operation op1 = Operation::identity;
    Operation op2 = Operation::identity;

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Number of legal input indices for a block at position `block`.
constexpr int num_inputs_at(int block) { return 2 + block; }

/// A cell description. Searched cells carry kCellBlocks blocks; smaller
/// block counts are used for exhaustively enumerable test spaces.
struct CellGenome {
    std::vector<BlockSpec> blocks;

    int num_blocks() const { return static_cast<int>(blocks.size()); }
    friend bool operator==(const CellGenome&, const CellGenome&) = default;
    friend auto operator<=>(const CellGenome& a, const CellGenome& b) {
        return encode_unchecked(a) <=> encode_unchecked(b);
    }

    static std::vector<int> encode_unchecked(const CellGenome& g);
};

enum class GenomeField { input1, input2, op1, op2 };
std::string_view to_string(GenomeField f);

struct Violation {
    int block = 0;
    GenomeField field = GenomeField::input1;
    std::string message;
};

/// Checks every structural constraint. `num_blocks` is the expected block
/// count of the space the genome belongs to.
std::vector<Violation> validate_genome(const CellGenome& g, int num_blocks = kCellBlocks);
bool is_valid(const CellGenome& g, int num_blocks = kCellBlocks);

/// Throws std::invalid_argument listing all violations.
void require_valid(const CellGenome& g, int num_blocks = kCellBlocks);

/// Uniform integer in [0, n) that does not depend on the standard library's
/// distribution implementation.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

CellGenome random_genome(Rng& rng, int num_blocks = kCellBlocks);

/// Block-major layout [I1, I2, O1, O2] per block.
std::vector<int> encode(const CellGenome& g);
CellGenome decode(const std::vector<int>& v, int num_blocks = kCellBlocks);

/// Size of the legal set of the encoded field at `position`.
int field_cardinality(int position);

boost::multiprecision::cpp_int search_space_size(int num_blocks);

/// Lazily emits every legal genome in encoding-lexicographic order.
class GenomeEnumerator {
public:
    static constexpr std::uint64_t kDefaultCap = 1'000'000;

    explicit GenomeEnumerator(int num_blocks, std::uint64_t cap = kDefaultCap);

    std::optional<CellGenome> next();
    std::uint64_t size() const { return size_; }

private:
    std::vector<int> digits_;
    std::uint64_t size_ = 0;
    bool done_ = false;
    bool started_ = false;
};

std::vector<CellGenome> enumerate_genomes(int num_blocks,
                                          std::uint64_t cap = GenomeEnumerator::kDefaultCap);

/// Block indices whose output no other block consumes (sorted ascending).
std::vector<int> unused_block_outputs(const CellGenome& g);

/// Resamples `num_fields` distinct encoded positions uniformly over their
/// legal sets. A resampled field may keep its old value.
CellGenome mutate(const CellGenome& g, Rng& rng, int num_fields);

std::string to_string(const CellGenome& g);

// JSON form: {"blocks": [[i1, i2, o1, o2], ...]}
nlohmann::ordered_json genome_to_json(const CellGenome& g);
CellGenome genome_from_json(const nlohmann::ordered_json& j, std::optional<int> num_blocks = std::nullopt);

}  // namespace teadnn
