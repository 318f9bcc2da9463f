#include "dockorder/optimizer.hpp"

#include "dockorder/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dockorder {

std::string_view to_string(KeyRule k) { return k == KeyRule::Paper ? "paper" : "ratio"; }

std::optional<KeyRule> key_rule_from_string(std::string_view s) {
    if (s == "paper") return KeyRule::Paper;
    if (s == "ratio") return KeyRule::Ratio;
    return std::nullopt;
}

double total_cost(const std::vector<std::size_t>& order, const std::vector<double>& freq,
                  const std::vector<double>& build_time) {
    double suffix = 0;
    double total = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        suffix += build_time.at(*it);
        total += freq.at(*it) * suffix;
    }
    return total;
}

double total_cost(const std::vector<std::size_t>& order, const FrequencyTable& freq, const CostTable& cost) {
    return total_cost(order, freq.normalized, cost.seconds);
}

namespace {

void check_weights(std::size_t n, const FrequencyTable& freq, const CostTable& cost) {
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = i < freq.normalized.size() && i < cost.seconds.size() && std::isfinite(freq.normalized[i]) &&
                  std::isfinite(cost.seconds[i]) && freq.normalized[i] >= 0 && cost.seconds[i] >= 0;
        if (!ok) throw MissingWeight(i);
    }
}

std::vector<std::size_t> identity(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

// Nodes grouped by segment, segments ascending, members in index order.
std::vector<std::vector<std::size_t>> segments_of(const DependencyGraph& g) {
    std::map<std::size_t, std::vector<std::size_t>> by;
    for (std::size_t i = 0; i < g.size(); ++i) by[g.nodes[i].segment()].push_back(i);
    std::vector<std::vector<std::size_t>> out;
    for (auto& [seg, members] : by) out.push_back(std::move(members));
    return out;
}

void check_segments(const DependencyGraph& g) {
    for (const auto& e : g.edges) {
        if (e.from_index >= g.size() || e.to_index >= g.size())
            throw CyclicDependency("edge references a missing node");
        if (g.nodes[e.from_index].segment() > g.nodes[e.to_index].segment())
            throw CyclicDependency("edge " + std::to_string(e.from_index) + " -> " + std::to_string(e.to_index) +
                                   " points into an earlier stage");
    }
}

double ratio_key(double f, double b) {
    if (b > 0) return f / b;
    return f > 0 ? std::numeric_limits<double>::infinity() : 0.0;
}

std::vector<std::size_t> list_schedule(const DependencyGraph& g, const std::vector<double>& f,
                                       const std::vector<double>& b, KeyRule rule, bool refresh) {
    const std::size_t n = g.size();
    auto preds = g.predecessors();
    auto succs = g.successors();
    std::vector<std::size_t> order;
    order.reserve(n);
    for (const auto& seg : segments_of(g)) {
        std::vector<bool> in_seg(n, false);
        double remaining = 0;
        for (auto i : seg) {
            in_seg[i] = true;
            remaining += b[i];
        }
        std::vector<std::size_t> pending(n, 0);
        for (auto i : seg)
            for (auto p : preds[i])
                if (in_seg[p]) ++pending[i];
        std::vector<double> key(n, 0);
        std::vector<std::size_t> ready;
        auto admit = [&](std::size_t i) {
            ready.push_back(i);
            key[i] = rule == KeyRule::Paper ? f[i] * remaining : ratio_key(f[i], b[i]);
        };
        for (auto i : seg)
            if (pending[i] == 0) admit(i);
        for (std::size_t step = 0; step < seg.size(); ++step) {
            if (ready.empty()) throw CyclicDependency("no ready instruction while scheduling");
            if (rule == KeyRule::Paper && refresh)
                for (auto i : ready) key[i] = f[i] * remaining;
            auto best = std::min_element(ready.begin(), ready.end(), [&](std::size_t x, std::size_t y) {
                return key[x] != key[y] ? key[x] < key[y] : x < y;
            });
            std::size_t u = *best;
            ready.erase(best);
            order.push_back(u);
            remaining -= b[u];
            for (auto s : succs[u])
                if (in_seg[s] && --pending[s] == 0) admit(s);
        }
    }
    return order;
}

// Places each group's members in dependency order, ties by index.
std::vector<std::size_t> order_members(const DependencyGraph& g, const std::vector<std::size_t>& members) {
    std::set<std::size_t> in(members.begin(), members.end());
    std::map<std::size_t, std::size_t> pending;
    for (auto m : members) pending[m] = 0;
    auto preds = g.predecessors();
    for (auto m : members)
        for (auto p : preds[m])
            if (in.count(p)) ++pending[m];
    auto succs = g.successors();
    std::set<std::size_t> ready;
    for (auto& [m, c] : pending)
        if (c == 0) ready.insert(m);
    std::vector<std::size_t> out;
    while (!ready.empty()) {
        auto u = *ready.begin();
        ready.erase(ready.begin());
        out.push_back(u);
        for (auto s : succs[u])
            if (in.count(s) && --pending[s] == 0) ready.insert(s);
    }
    if (out.size() != members.size()) throw CyclicDependency("cycle inside an instruction group");
    return out;
}

std::vector<std::size_t> cycle_members(const DependencyGraph& g) {
    // Nodes that lie on a cycle: v reaches u and u reaches v for some edge u -> v.
    std::set<std::size_t> out;
    for (const auto& e : g.edges) {
        if (e.from_index == e.to_index) {
            out.insert(e.from_index);
            continue;
        }
        auto r = g.reachable_from(e.to_index);
        if (r[e.from_index]) {
            out.insert(e.from_index);
            out.insert(e.to_index);
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace

GroupMap complete_groups(const GroupMap& partial, std::size_t n) {
    std::vector<bool> seen(n, false);
    GroupMap out;
    for (const auto& g : partial) {
        if (g.empty()) throw InvalidGroups("empty group");
        for (auto i : g) {
            if (i >= n) throw InvalidGroups("index " + std::to_string(i) + " out of range");
            if (seen[i]) throw InvalidGroups("index " + std::to_string(i) + " appears twice");
            seen[i] = true;
        }
        out.push_back(g);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) out.push_back({i});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return *std::min_element(a.begin(), a.end()) < *std::min_element(b.begin(), b.end());
    });
    return out;
}

GroupMap load_group_map(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.is_object() && j.contains("groups")) j = j.at("groups");
        return complete_groups(j.get<GroupMap>(), n);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidGroups(std::string("bad JSON: ") + e.what());
    }
}

ContractedGraph group_contract(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                               const GroupMap& group_map) {
    const std::size_t n = graph.size();
    check_weights(n, freq, cost);
    std::vector<std::size_t> group_of(n, n);
    std::size_t covered = 0;
    for (std::size_t gi = 0; gi < group_map.size(); ++gi) {
        if (group_map[gi].empty()) throw InvalidGroups("group " + std::to_string(gi) + " is empty");
        for (auto i : group_map[gi]) {
            if (i >= n) throw InvalidGroups("index " + std::to_string(i) + " out of range");
            if (group_of[i] != n) throw InvalidGroups("index " + std::to_string(i) + " appears twice");
            group_of[i] = gi;
            ++covered;
        }
        auto seg = graph.nodes[group_map[gi].front()].segment();
        for (auto i : group_map[gi])
            if (graph.nodes[i].segment() != seg)
                throw InvalidGroups("group " + std::to_string(gi) + " spans more than one stage");
    }
    if (covered != n) throw InvalidGroups("groups do not cover every instruction");

    ContractedGraph c;
    c.freq.window_months = freq.window_months;
    c.freq.total_modifications = freq.total_modifications;
    c.cost.source = cost.source;
    c.cost.repeats = cost.repeats;
    for (std::size_t gi = 0; gi < group_map.size(); ++gi) {
        std::vector<std::size_t> members(group_map[gi]);
        std::sort(members.begin(), members.end());
        GraphNode node = graph.nodes[members.front()];
        node.index = gi;
        c.graph.nodes.push_back(std::move(node));
        double fmax = 0, raw = 0, bsum = 0;
        for (auto i : members) {
            fmax = std::max(fmax, freq.normalized[i]);
            if (i < freq.raw.size()) raw = std::max(raw, freq.raw[i]);
            bsum += cost.seconds[i];
        }
        c.freq.normalized.push_back(fmax);
        c.freq.raw.push_back(raw);
        c.cost.seconds.push_back(bsum);
        c.members.push_back(std::move(members));
    }
    for (const auto& e : graph.edges) {
        auto a = group_of[e.from_index], b = group_of[e.to_index];
        if (a == b) continue;
        c.graph.add_edge({a, b, e.kind, e.evidence});
    }
    if (!c.graph.is_acyclic()) throw GroupCycle(cycle_members(c.graph));
    for (auto& m : c.members) m = order_members(graph, m);
    return c;
}

OptimizationPlan optimize(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                          const OptimizationOptions& opts) {
    const std::size_t n = graph.size();
    check_weights(n, freq, cost);
    if (!graph.is_acyclic()) throw CyclicDependency("dependency graph has a cycle");
    check_segments(graph);

    OptimizationPlan plan;
    plan.original_order = identity(n);
    plan.cost_before = total_cost(plan.original_order, freq, cost);

    std::string variant(to_string(opts.key_rule));
    if (opts.key_rule == KeyRule::Paper && !opts.refresh_keys) variant += "-stale";

    if (opts.preserve_groups && opts.group_map) {
        auto c = group_contract(graph, freq, cost, *opts.group_map);
        auto grouped = list_schedule(c.graph, c.freq.normalized, c.cost.seconds, opts.key_rule, opts.refresh_keys);
        for (auto g : grouped)
            plan.optimized_order.insert(plan.optimized_order.end(), c.members[g].begin(), c.members[g].end());
        variant += "+groups";
    } else {
        plan.optimized_order = list_schedule(graph, freq.normalized, cost.seconds, opts.key_rule, opts.refresh_keys);
    }
    if (!graph.is_topological_order(plan.optimized_order))
        throw CyclicDependency("schedule violates an edge");
    plan.cost_after = total_cost(plan.optimized_order, freq, cost);

    if (opts.safeguard && plan.cost_after > plan.cost_before) {
        plan.optimized_order = plan.original_order;
        plan.cost_after = plan.cost_before;
        variant = "original (safeguard over " + variant + ")";
    }
    plan.chosen_variant = variant;

    plan.nodes.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        auto i = plan.optimized_order[pos];
        plan.nodes[i] = PlanNode{i, freq.normalized[i], cost.seconds[i], pos};
    }
    return plan;
}

BruteForceResult brute_force_optimal(const DependencyGraph& graph, const FrequencyTable& freq, const CostTable& cost,
                                     std::size_t max_n) {
    const std::size_t n = graph.size();
    if (n > max_n) throw TooLarge(n, max_n);
    check_weights(n, freq, cost);
    if (!graph.is_acyclic()) throw CyclicDependency("dependency graph has a cycle");
    check_segments(graph);
    const auto& f = freq.normalized;
    const auto& b = cost.seconds;
    auto preds = graph.predecessors();
    auto succs = graph.successors();

    // Segment order is fixed, so each segment is searched on its own; the
    // cross-segment part of the cost does not depend on the inner orders.
    BruteForceResult result;
    for (const auto& seg : segments_of(graph)) {
        std::vector<bool> in_seg(n, false);
        double seg_b = 0;
        for (auto i : seg) {
            in_seg[i] = true;
            seg_b += b[i];
        }
        std::vector<std::size_t> pending(n, 0);
        for (auto i : seg)
            for (auto p : preds[i])
                if (in_seg[p]) ++pending[i];
        std::vector<bool> placed(n, false);
        std::vector<std::size_t> cur, best;
        double best_cost = std::numeric_limits<double>::infinity();

        auto rec = [&](auto&& self, double partial, double prefix_b) -> void {
            if (partial > best_cost) return;
            if (cur.size() == seg.size()) {
                if (partial < best_cost) {
                    best_cost = partial;
                    best = cur;
                }
                return;
            }
            for (auto i : seg) {
                if (placed[i] || pending[i] != 0) continue;
                placed[i] = true;
                cur.push_back(i);
                for (auto s : succs[i])
                    if (in_seg[s]) --pending[s];
                self(self, partial + f[i] * (seg_b - prefix_b), prefix_b + b[i]);
                for (auto s : succs[i])
                    if (in_seg[s]) ++pending[s];
                cur.pop_back();
                placed[i] = false;
            }
        };
        rec(rec, 0.0, 0.0);
        result.order.insert(result.order.end(), best.begin(), best.end());
    }
    result.cost = total_cost(result.order, freq, cost);
    return result;
}

std::string emit_dockerfile(const ParsedDockerfile& doc, const OptimizationPlan& plan) {
    return serialize(doc, plan.optimized_order);
}

std::string plan_to_json(const OptimizationPlan& plan, const ParsedDockerfile* doc) {
    nlohmann::ordered_json j;
    j["chosen_variant"] = plan.chosen_variant;
    j["cost_before"] = plan.cost_before;
    j["cost_after"] = plan.cost_after;
    j["improvement"] = plan.cost_before > 0 ? (plan.cost_before - plan.cost_after) / plan.cost_before : 0.0;
    j["original_order"] = plan.original_order;
    j["optimized_order"] = plan.optimized_order;
    nlohmann::ordered_json moved = nlohmann::ordered_json::array();
    for (const auto& node : plan.nodes) {
        std::size_t from = 0;
        while (from < plan.original_order.size() && plan.original_order[from] != node.index) ++from;
        if (from != node.position) moved.push_back({{"index", node.index}, {"from", from}, {"to", node.position}});
    }
    j["moved"] = moved;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& node : plan.nodes) {
        nlohmann::ordered_json x;
        x["index"] = node.index;
        x["frequency"] = node.frequency;
        x["build_time"] = node.build_time;
        x["position"] = node.position;
        if (doc && node.index < doc->instructions.size()) x["text"] = doc->instructions[node.index].text;
        nodes.push_back(x);
    }
    j["nodes"] = nodes;
    return j.dump(2) + "\n";
}

}  // namespace dockorder
