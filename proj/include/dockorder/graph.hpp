#pragma once

#include "dockorder/dockerfile.hpp"
#include "dockorder/semantics.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

enum class EdgeKind { Variable, FileDir, User, Package, Context, Other };

std::string_view to_string(EdgeKind k);
std::optional<EdgeKind> edge_kind_from_string(std::string_view s);

struct DependencyEdge {
    std::size_t from_index = 0;  // prerequisite
    std::size_t to_index = 0;    // dependent
    EdgeKind kind = EdgeKind::Other;
    std::string evidence;

    /// Identity is (from, to, kind); evidence is informational.
    bool same_key(const DependencyEdge& o) const {
        return from_index == o.from_index && to_index == o.to_index && kind == o.kind;
    }
};

struct GraphNode {
    std::size_t index = 0;
    Instruction instr;
    SemanticElements elements;

    /// 0 for ARGs before the first FROM, stage_index + 1 otherwise.
    std::size_t segment() const { return elements.misc.global_arg ? 0 : instr.stage_index + 1; }
};

struct GraphOptions {
    /// Also order readers before later writers (WAR) and writers before later
    /// writers (WAW) of the same element. Off = only the literal read-after-write rules.
    bool anti_dependencies = true;
};

class DependencyGraph {
public:
    std::vector<GraphNode> nodes;
    std::vector<DependencyEdge> edges;  // sorted by (from, to, kind), unique on that key

    std::size_t size() const { return nodes.size(); }

    /// Inserts unless an edge with the same (from, to, kind) exists. Returns true on insert.
    bool add_edge(DependencyEdge e);
    bool has_edge(std::size_t from, std::size_t to) const;
    bool has_edge(std::size_t from, std::size_t to, EdgeKind kind) const;

    std::vector<std::vector<std::size_t>> successors() const;    // deduplicated over kinds
    std::vector<std::vector<std::size_t>> predecessors() const;  // deduplicated over kinds
    std::vector<std::size_t> indegrees() const;

    bool is_acyclic() const;
    bool is_topological_order(const std::vector<std::size_t>& order) const;
    /// Reflexive-transitive reachability from `from`.
    std::vector<bool> reachable_from(std::size_t from) const;

    /// Same nodes (index, kind, stage) and the same edge keys.
    bool operator==(const DependencyGraph& o) const;
};

/// Decides which edges a -> b exist for a preceding b. Reaching definitions and
/// most-recent writers are precomputed once for the whole node list.
class PairJudge {
public:
    explicit PairJudge(const std::vector<GraphNode>& nodes, GraphOptions opts = {});

    /// Requires a < b (positions in the node list). Step one is a kind-pair
    /// filter; step two matches elements.
    std::vector<DependencyEdge> judge(std::size_t a, std::size_t b) const;

    /// Step one alone: could instructions of these kinds be related at all?
    static bool kinds_may_depend(InstructionKind a, InstructionKind b, bool anti_dependencies);

private:
    struct Reach;
    const std::vector<GraphNode>& nodes_;
    GraphOptions opts_;
    std::vector<Reach> reach_;

public:
    ~PairJudge();
};

/// Two-node form: a is treated as the only instruction before b.
std::vector<DependencyEdge> judge_pair(const GraphNode& a, const GraphNode& b, GraphOptions opts = {});

DependencyGraph build_graph(const ParsedDockerfile& doc, const std::vector<SemanticElements>& elements,
                            GraphOptions opts = {});
DependencyGraph build_graph(const ParsedDockerfile& doc, GraphOptions opts = {});

enum class GraphFormat { Dot, Json };

std::string export_graph(const DependencyGraph& g, GraphFormat format);
/// Inverse of export_graph(g, Json). Nodes carry kind, stage and text only.
DependencyGraph import_graph_json(std::string_view json_text);

}  // namespace dockorder
