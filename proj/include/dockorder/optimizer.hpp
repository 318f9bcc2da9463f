// Instruction reordering: cost model, list-scheduling optimizer, exact
// small-instance search and group contraction.
#pragma once

#include "dockorder/build_cost.hpp"
#include "dockorder/dockerfile.hpp"
#include "dockorder/graph.hpp"
#include "dockorder/history.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

enum class KeyRule { Paper, Ratio };

std::string_view to_string(KeyRule k);
std::optional<KeyRule> key_rule_from_string(std::string_view s);

using GroupMap = std::vector<std::vector<std::size_t>>;

struct OptimizationOptions {
    KeyRule key_rule = KeyRule::Paper;
    /// Remaining-time key only: recompute ready keys at every pop. false = keys fixed when a node becomes ready.
    bool refresh_keys = true;
    bool preserve_groups = false;
    std::optional<GroupMap> group_map;
    bool safeguard = true;
};

struct PlanNode {
    std::size_t index = 0;
    double frequency = 0;
    double build_time = 0;
    std::size_t position = 0;  // in optimized_order
};

struct OptimizationPlan {
    std::vector<std::size_t> original_order;
    std::vector<std::size_t> optimized_order;
    double cost_before = 0;
    double cost_after = 0;
    std::string chosen_variant;
    std::vector<PlanNode> nodes;  // by index

    bool changed() const { return optimized_order != original_order; }
};

/// Sum over positions of f * (b at that position and everything after it).
double total_cost(const std::vector<std::size_t>& order, const std::vector<double>& freq,
                  const std::vector<double>& build_time);
double total_cost(const std::vector<std::size_t>& order, const FrequencyTable& freq, const CostTable& cost);

OptimizationPlan optimize(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                          const OptimizationOptions& opts = {});

struct BruteForceResult {
    std::vector<std::size_t> order;
    double cost = 0;
};

BruteForceResult brute_force_optimal(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                                     std::size_t max_n = 10);

struct ContractedGraph {
    DependencyGraph graph;  // node i stands for group i
    FrequencyTable freq;    // max over members
    CostTable cost;         // sum over members
    GroupMap members;       // each group in the order it is expanded
};

ContractedGraph group_contract(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                               const GroupMap& group_map);

/// Indices not named by any group become singleton groups. Groups are sorted by first member.
GroupMap complete_groups(const GroupMap& partial, std::size_t n);
GroupMap load_group_map(const std::string& path, std::size_t n);

std::string emit_dockerfile(const ParsedDockerfile& doc, const OptimizationPlan& plan);

std::string plan_to_json(const OptimizationPlan& plan, const ParsedDockerfile* doc = nullptr);

}  // namespace dockorder
