#include "teadnn/network.hpp"

#include <map>
#include <stdexcept>
#include <string>

namespace teadnn {

namespace {

std::string shape_str(const TensorShape& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

int push(NetworkGraph& g, LayerNode n) {
    n.id = static_cast<int>(g.nodes.size());
    g.total_params += n.params;
    g.total_flops += n.flops;
    g.nodes.push_back(std::move(n));
    return g.nodes.back().id;
}

int add_input(NetworkGraph& g, const TensorShape& shape) {
    LayerNode n;
    n.kind = LayerKind::input;
    n.out_shape = shape;
    return push(g, std::move(n));
}

int add_projection(NetworkGraph& g, int src, const TensorShape& target) {
    const auto& in = g.node(src).out_shape;
    if (in.height % target.height != 0 || in.width % target.width != 0 ||
        in.height / target.height != in.width / target.width) {
        throw std::invalid_argument("cannot project " + shape_str(in) + " onto " + shape_str(target));
    }
    LayerNode n;
    n.kind = LayerKind::projection1x1;
    n.inputs = {src};
    n.out_shape = target;
    n.stride = static_cast<int>(in.height / target.height);
    n.params = count_params(n.kind, std::nullopt, in.channels, target.channels);
    n.flops = count_flops(n.kind, std::nullopt, target, in.channels, in);
    return push(g, std::move(n));
}

}  // namespace

void MacroConfig::validate() const {
    if (cell_repeats < 1) throw std::invalid_argument("macro: N must be >= 1");
    if (initial_filters < 1) throw std::invalid_argument("macro: F must be >= 1");
    if (num_reduction_cells < 0) throw std::invalid_argument("macro: num_reduction_cells must be >= 0");
    if (num_classes < 1) throw std::invalid_argument("macro: num_classes must be >= 1");
    if (input_shape.height < 1 || input_shape.width < 1 || input_shape.channels < 1) {
        throw std::invalid_argument("macro: input shape must be positive");
    }
    const std::int64_t div = std::int64_t{1} << num_reduction_cells;
    if (input_shape.height % div != 0 || input_shape.width % div != 0) {
        throw std::invalid_argument("macro: input " + shape_str(input_shape) + " not divisible by " +
                                    std::to_string(div));
    }
}

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::input: return "input";
        case LayerKind::op: return "op";
        case LayerKind::add: return "add";
        case LayerKind::concat: return "concat";
        case LayerKind::projection1x1: return "projection1x1";
        case LayerKind::global_pool: return "global_pool";
        case LayerKind::classifier: return "classifier";
    }
    return "?";
}

std::int64_t count_params(LayerKind kind, std::optional<Operation> op, std::int64_t in_channels,
                          std::int64_t out_channels) {
    switch (kind) {
        case LayerKind::op: {
            if (!op) throw std::invalid_argument("count_params: op node without operation");
            const std::int64_t k = kernel_size(*op);
            if (is_convolution(*op)) return k * k * in_channels * out_channels;
            if (is_separable(*op)) return k * k * in_channels + in_channels * out_channels;
            return 0;
        }
        case LayerKind::projection1x1:
        case LayerKind::classifier: return in_channels * out_channels;
        default: return 0;
    }
}

std::int64_t count_flops(LayerKind kind, std::optional<Operation> op, const TensorShape& out_shape,
                         std::int64_t in_channels, const TensorShape& in_shape) {
    const std::int64_t spatial = out_shape.height * out_shape.width;
    switch (kind) {
        case LayerKind::op: {
            if (!op) throw std::invalid_argument("count_flops: op node without operation");
            if (*op == Operation::max3x3) return 9 * out_shape.elements();
            return count_params(kind, op, in_channels, out_shape.channels) * spatial;
        }
        case LayerKind::projection1x1:
        case LayerKind::classifier:
            return count_params(kind, op, in_channels, out_shape.channels) * spatial;
        case LayerKind::add: return out_shape.elements();
        case LayerKind::global_pool: return in_shape.elements();
        default: return 0;
    }
}

int append_cell(NetworkGraph& graph, const CellGenome& genome, int prev, int prev_prev,
                std::int64_t filters, int stride) {
    require_valid(genome, genome.num_blocks());
    if (filters < 1) throw std::invalid_argument("append_cell: filters must be positive");
    if (stride != 1 && stride != 2) throw std::invalid_argument("append_cell: stride must be 1 or 2");

    const auto& prev_shape = graph.node(prev).out_shape;
    if (prev_shape.height % stride != 0 || prev_shape.width % stride != 0) {
        throw std::invalid_argument("append_cell: " + shape_str(prev_shape) + " not divisible by stride");
    }
    const TensorShape op_shape{prev_shape.height / stride, prev_shape.width / stride, filters};

    // Cell inputs are projected lazily, once per source node.
    std::map<int, int> aligned;
    auto align = [&](int src) {
        if (auto it = aligned.find(src); it != aligned.end()) return it->second;
        const int id = graph.node(src).out_shape == op_shape ? src : add_projection(graph, src, op_shape);
        aligned.emplace(src, id);
        return id;
    };

    std::vector<int> block_out;
    auto resolve = [&](int idx) {
        if (idx == 0) return align(prev);
        if (idx == 1) return align(prev_prev);
        return block_out.at(static_cast<std::size_t>(idx - 2));
    };

    for (const auto& blk : genome.blocks) {
        int branch[2];
        const std::pair<int, Operation> ins[2] = {{blk.input1, blk.op1}, {blk.input2, blk.op2}};
        for (int k = 0; k < 2; ++k) {
            LayerNode n;
            n.kind = LayerKind::op;
            n.op = ins[k].second;
            n.inputs = {resolve(ins[k].first)};
            n.out_shape = op_shape;
            n.params = count_params(n.kind, n.op, filters, filters);
            n.flops = count_flops(n.kind, n.op, op_shape, filters);
            branch[k] = push(graph, std::move(n));
        }
        LayerNode sum;
        sum.kind = LayerKind::add;
        sum.inputs = {branch[0], branch[1]};
        sum.out_shape = op_shape;
        sum.flops = count_flops(sum.kind, std::nullopt, op_shape, filters);
        block_out.push_back(push(graph, std::move(sum)));
    }

    const auto unused = unused_block_outputs(genome);
    LayerNode cat;
    cat.kind = LayerKind::concat;
    for (int j : unused) cat.inputs.push_back(block_out[static_cast<std::size_t>(j)]);
    cat.out_shape = {op_shape.height, op_shape.width,
                     static_cast<std::int64_t>(unused.size()) * filters};
    return push(graph, std::move(cat));
}

NetworkGraph build_cell(const CellGenome& genome, const TensorShape& prev_shape,
                        const TensorShape& prev_prev_shape, std::int64_t filters, int stride) {
    NetworkGraph g;
    const int prev = add_input(g, prev_shape);
    const int prev_prev = add_input(g, prev_prev_shape);
    append_cell(g, genome, prev, prev_prev, filters, stride);
    return g;
}

NetworkGraph build_network(const CellGenome& genome, const MacroConfig& macro) {
    macro.validate();
    require_valid(genome, genome.num_blocks());

    NetworkGraph g;
    int prev = add_input(g, macro.input_shape);
    int prev_prev = prev;
    std::int64_t filters = macro.initial_filters;

    auto cell = [&](int stride) {
        const int out = append_cell(g, genome, prev, prev_prev, filters, stride);
        prev_prev = prev;
        prev = out;
    };
    for (int stage = 0; stage <= macro.num_reduction_cells; ++stage) {
        for (int i = 0; i < macro.cell_repeats; ++i) cell(1);
        if (stage < macro.num_reduction_cells) {
            cell(2);
            filters *= 2;
        }
    }

    const auto& last = g.node(prev).out_shape;
    LayerNode pool;
    pool.kind = LayerKind::global_pool;
    pool.inputs = {prev};
    pool.out_shape = {1, 1, last.channels};
    pool.flops = count_flops(pool.kind, std::nullopt, pool.out_shape, last.channels, last);
    const int pool_id = push(g, std::move(pool));

    LayerNode fc;
    fc.kind = LayerKind::classifier;
    fc.inputs = {pool_id};
    fc.out_shape = {1, 1, macro.num_classes};
    fc.params = count_params(fc.kind, std::nullopt, last.channels, macro.num_classes);
    fc.flops = count_flops(fc.kind, std::nullopt, fc.out_shape, last.channels);
    push(g, std::move(fc));
    return g;
}

void check_graph(const NetworkGraph& graph) {
    std::int64_t params = 0;
    std::int64_t flops = 0;
    int classifiers = 0;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& n = graph.nodes[i];
        if (n.id != static_cast<int>(i)) throw std::logic_error("node id does not match position");
        const auto& s = n.out_shape;
        if (s.height < 1 || s.width < 1 || s.channels < 1) {
            throw std::logic_error("node " + std::to_string(n.id) + " has non-positive shape");
        }
        for (int in : n.inputs) {
            if (in < 0 || in >= n.id) throw std::logic_error("node " + std::to_string(n.id) + " breaks topological order");
        }
        if (n.kind == LayerKind::add) {
            if (n.inputs.size() != 2 || graph.node(n.inputs[0]).out_shape != graph.node(n.inputs[1]).out_shape ||
                graph.node(n.inputs[0]).out_shape != s) {
                throw std::logic_error("add node " + std::to_string(n.id) + " has mismatched inputs");
            }
        }
        if (n.kind == LayerKind::concat) {
            std::int64_t channels = 0;
            for (int in : n.inputs) {
                const auto& is = graph.node(in).out_shape;
                if (is.height != s.height || is.width != s.width) {
                    throw std::logic_error("concat node " + std::to_string(n.id) + " spatial mismatch");
                }
                channels += is.channels;
            }
            if (n.inputs.empty() || channels != s.channels) {
                throw std::logic_error("concat node " + std::to_string(n.id) + " channel mismatch");
            }
        }
        if (n.kind == LayerKind::classifier) ++classifiers;
        params += n.params;
        flops += n.flops;
    }
    if (params != graph.total_params || flops != graph.total_flops) {
        throw std::logic_error("graph totals do not match node sums");
    }
    if (classifiers > 1) throw std::logic_error("more than one classifier");
}

nlohmann::ordered_json graph_to_json(const NetworkGraph& graph) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : graph.nodes) {
        nlohmann::ordered_json j;
        j["id"] = n.id;
        j["kind"] = to_string(n.kind);
        if (n.op) j["op"] = to_string(*n.op);
        j["inputs"] = n.inputs;
        j["shape"] = {n.out_shape.height, n.out_shape.width, n.out_shape.channels};
        if (n.stride != 1) j["stride"] = n.stride;
        j["params"] = n.params;
        j["flops"] = n.flops;
        nodes.push_back(std::move(j));
    }
    nlohmann::ordered_json out;
    out["nodes"] = std::move(nodes);
    out["total_params"] = graph.total_params;
    out["total_flops"] = graph.total_flops;
    return out;
}

nlohmann::ordered_json macro_to_json(const MacroConfig& m) {
    nlohmann::ordered_json j;
    j["N"] = m.cell_repeats;
    j["F"] = m.initial_filters;
    j["num_reduction_cells"] = m.num_reduction_cells;
    j["input_shape"] = {m.input_shape.height, m.input_shape.width, m.input_shape.channels};
    j["num_classes"] = m.num_classes;
    return j;
}

MacroConfig macro_from_json(const nlohmann::ordered_json& j, MacroConfig m) {
    if (!j.is_object()) throw std::invalid_argument("macro config must be a JSON object");
    m.cell_repeats = j.value("N", m.cell_repeats);
    m.initial_filters = j.value("F", m.initial_filters);
    m.num_reduction_cells = j.value("num_reduction_cells", m.num_reduction_cells);
    m.num_classes = j.value("num_classes", m.num_classes);
    if (j.contains("input_shape")) {
        const auto& s = j.at("input_shape");
        if (!s.is_array() || s.size() != 3) throw std::invalid_argument("input_shape must be [h, w, c]");
        m.input_shape = {s[0].get<std::int64_t>(), s[1].get<std::int64_t>(), s[2].get<std::int64_t>()};
    }
    m.validate();
    return m;
}

}  // namespace teadnn
