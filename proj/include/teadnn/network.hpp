#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teadnn/search_space.hpp"

namespace teadnn {

struct TensorShape {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t channels = 0;

    std::int64_t elements() const { return height * width * channels; }
    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct MacroConfig {
    int cell_repeats = 2;     // N
    int initial_filters = 24; // F
    int num_reduction_cells = 2;
    TensorShape input_shape{32, 32, 3};
    int num_classes = 10;

    void validate() const;
};

enum class LayerKind { input, op, add, concat, projection1x1, global_pool, classifier };

std::string_view to_string(LayerKind k);

struct LayerNode {
    int id = 0;
    LayerKind kind = LayerKind::input;
    std::optional<Operation> op;  // set iff kind == op
    std::vector<int> inputs;
    TensorShape out_shape;
    int stride = 1;
    std::int64_t params = 0;
    std::int64_t flops = 0;
};

struct NetworkGraph {
    std::vector<LayerNode> nodes;  // topological order; nodes[i].id == i
    std::int64_t total_params = 0;
    std::int64_t total_flops = 0;

    const LayerNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    int output() const { return static_cast<int>(nodes.size()) - 1; }
};

/// Weight count of a node. Biases and normalization parameters are excluded.
/// `op` is consulted only for LayerKind::op.
std::int64_t count_params(LayerKind kind, std::optional<Operation> op, std::int64_t in_channels,
                          std::int64_t out_channels);

/// Multiply-accumulates (comparisons for max-pooling, additions for add and
/// global pooling).
std::int64_t count_flops(LayerKind kind, std::optional<Operation> op, const TensorShape& out_shape,
                         std::int64_t in_channels, const TensorShape& in_shape = {});

/// Appends one cell to `graph` reading node ids `prev` and `prev_prev`.
/// Returns the id of the cell's concat output.
int append_cell(NetworkGraph& graph, const CellGenome& genome, int prev, int prev_prev,
                std::int64_t filters, int stride);

/// Standalone cell subgraph with two input nodes (ids 0 = prev, 1 = prev_prev).
NetworkGraph build_cell(const CellGenome& genome, const TensorShape& prev_shape,
                        const TensorShape& prev_prev_shape, std::int64_t filters, int stride);

NetworkGraph build_network(const CellGenome& genome, const MacroConfig& macro);

/// Checks topological order, add/concat shape rules and totals. Throws
/// std::logic_error on the first broken invariant.
void check_graph(const NetworkGraph& graph);

nlohmann::ordered_json graph_to_json(const NetworkGraph& graph);

nlohmann::ordered_json macro_to_json(const MacroConfig& m);
MacroConfig macro_from_json(const nlohmann::ordered_json& j, MacroConfig defaults = {});

}  // namespace teadnn
