#include "dockorder/simulator.hpp"

#include "dockorder/errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace dockorder {

double simulate_rebuild_cost(const std::vector<std::size_t>& order, const ModificationEvent& event,
                             const CostTable& cost) {
    if (event.modified_indices.empty()) return 0.0;
    std::vector<std::size_t> pos(order.size() == 0 ? 0 : *std::max_element(order.begin(), order.end()) + 1,
                                 order.size());
    for (std::size_t p = 0; p < order.size(); ++p) pos[order[p]] = p;
    std::size_t first = order.size();
    for (auto i : event.modified_indices) {
        if (i >= pos.size() || pos[i] == order.size()) throw UnknownIndex(i);
        first = std::min(first, pos[i]);
    }
    double total = 0;
    for (std::size_t p = first; p < order.size(); ++p) total += cost.seconds.at(order[p]);
    return total;
}

EfficiencyReport replay(const std::vector<ModificationEvent>& history, const std::vector<std::size_t>& original_order,
                        const std::vector<std::size_t>& optimized_order, const CostTable& cost) {
    if (history.empty()) throw EmptyHistory();
    auto a = original_order, b = optimized_order;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw Error(ErrorClass::user_input, "orders are not permutations of the same index set");
    EfficiencyReport report;
    double sum = 0;
    for (const auto& e : history) {
        EventOutcome o;
        o.timestamp = e.timestamp;
        o.cost_before = simulate_rebuild_cost(original_order, e, cost);
        o.cost_after = simulate_rebuild_cost(optimized_order, e, cost);
        o.efficiency = o.cost_before > 0 ? (o.cost_before - o.cost_after) / o.cost_before : 0.0;
        sum += o.efficiency;
        report.events.push_back(o);
    }
    report.aggregate = sum / static_cast<double>(history.size());
    return report;
}

SweepPoint sweep_usage_interval(const std::vector<ModificationEvent>& history, const DependencyGraph& graph,
                                const FrequencyHook& freq_at, const CostTable& cost, std::size_t interval,
                                const OptimizationOptions& opts) {
    if (history.empty()) throw EmptyHistory();
    if (interval < 1) throw Error(ErrorClass::user_input, "interval must be at least 1");
    std::vector<std::size_t> original(graph.size());
    std::iota(original.begin(), original.end(), std::size_t{0});
    SweepPoint point;
    point.interval = interval;
    std::vector<std::size_t> current = original;
    double sum = 0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i % interval == 0) {
            current = optimize(graph, freq_at(i), cost, opts).optimized_order;
            ++point.optimizations;
        }
        double before = simulate_rebuild_cost(original, history[i], cost);
        double after = simulate_rebuild_cost(current, history[i], cost);
        sum += before > 0 ? (before - after) / before : 0.0;
    }
    point.aggregate = sum / static_cast<double>(history.size());
    return point;
}

std::vector<SweepPoint> sweep_usage_interval(const std::vector<ModificationEvent>& history,
                                             const DependencyGraph& graph, const FrequencyHook& freq_at,
                                             const CostTable& cost, const std::vector<std::size_t>& intervals,
                                             const OptimizationOptions& opts) {
    std::vector<SweepPoint> out;
    for (auto k : intervals) out.push_back(sweep_usage_interval(history, graph, freq_at, cost, k, opts));
    return out;
}

std::vector<ModificationEvent> events_from_records(const ParsedDockerfile& doc,
                                                   const std::vector<ModificationRecord>& records, double tau) {
    SimilarityModel model(doc, records, tau);
    std::vector<std::string> commit_order;
    std::map<std::string, ModificationEvent> by_commit;
    for (const auto& r : records) {
        auto [it, fresh] = by_commit.try_emplace(r.commit_id);
        if (fresh) {
            commit_order.push_back(r.commit_id);
            it->second.commit_id = r.commit_id;
            it->second.timestamp = r.date;
        }
        auto& ev = it->second;
        ev.timestamp = std::max(ev.timestamp, r.date);
        if (r.implicit()) {
            bool any = false;
            for (const auto& ins : doc.instructions) {
                if (model.similarity(ins, r) > 0) {
                    ev.modified_indices.insert(ins.index);
                    any = true;
                }
            }
            if (!any && r.related_instruction_hint && *r.related_instruction_hint < doc.instructions.size())
                ev.modified_indices.insert(*r.related_instruction_hint);
            continue;
        }
        double best = 0;
        std::optional<std::size_t> pick;
        for (const auto& ins : doc.instructions) {
            double s = model.similarity(ins, r);
            if (s > best) {
                best = s;
                pick = ins.index;
            }
        }
        if (pick) ev.modified_indices.insert(*pick);
    }
    std::vector<ModificationEvent> out;
    for (const auto& c : commit_order) {
        auto& ev = by_commit.at(c);
        if (!ev.modified_indices.empty()) out.push_back(std::move(ev));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ModificationEvent& a, const ModificationEvent& b) { return a.timestamp < b.timestamp; });
    return out;
}

FrequencyHook record_frequency_hook(const ParsedDockerfile& doc, std::vector<ModificationRecord> records,
                                    std::vector<ModificationEvent> events, int window_months, double tau) {
    return [doc, records = std::move(records), events = std::move(events), window_months,
            tau](std::size_t seen) -> FrequencyTable {
        std::set<std::string> commits;
        for (std::size_t i = 0; i < seen && i < events.size(); ++i) commits.insert(events[i].commit_id);
        std::vector<ModificationRecord> subset;
        for (const auto& r : records)
            if (commits.count(r.commit_id)) subset.push_back(r);
        return compute_frequencies(doc, subset, window_months, tau);
    };
}

FrequencyHook event_frequency_hook(std::vector<ModificationEvent> events, std::size_t instruction_count) {
    return [events = std::move(events), instruction_count](std::size_t seen) -> FrequencyTable {
        FrequencyTable t = FrequencyTable::uniform(instruction_count);
        std::vector<double> counts(instruction_count, 0.0);
        double total = 0;
        for (std::size_t i = 0; i < seen && i < events.size(); ++i)
            for (auto idx : events[i].modified_indices)
                if (idx < instruction_count) {
                    counts[idx] += 1;
                    total += 1;
                }
        if (total == 0) return t;
        t.total_modifications = static_cast<std::size_t>(total);
        t.raw = counts;
        for (auto& c : counts) c /= total;
        t.normalized = counts;
        return t;
    };
}

std::string events_to_json(const std::vector<ModificationEvent>& events) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& e : events) {
        nlohmann::ordered_json x;
        x["modified_indices"] = e.modified_indices;
        x["timestamp"] = e.timestamp;
        if (!e.commit_id.empty()) x["commit"] = e.commit_id;
        j.push_back(x);
    }
    return j.dump(2) + "\n";
}

std::vector<ModificationEvent> events_from_json(std::string_view json_text, std::size_t instruction_count) {
    std::vector<ModificationEvent> out;
    try {
        auto j = nlohmann::json::parse(json_text);
        if (j.is_object() && j.contains("events")) j = j.at("events");
        if (!j.is_array()) throw ParseError("events must be a JSON array");
        for (const auto& x : j) {
            ModificationEvent e;
            for (const auto& i : x.at("modified_indices")) {
                auto idx = i.get<std::size_t>();
                if (idx >= instruction_count) throw UnknownIndex(idx);
                e.modified_indices.insert(idx);
            }
            if (x.contains("timestamp")) e.timestamp = x.at("timestamp").get<std::int64_t>();
            if (x.contains("commit")) e.commit_id = x.at("commit").get<std::string>();
            out.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("events: ") + e.what());
    }
    return out;
}

std::string efficiency_to_json(const EfficiencyReport& report) {
    nlohmann::ordered_json j;
    j["event_count"] = report.count();
    j["aggregate_efficiency"] = report.aggregate;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& e : report.events)
        rows.push_back({{"timestamp", e.timestamp},
                        {"cost_before", e.cost_before},
                        {"cost_after", e.cost_after},
                        {"efficiency", e.efficiency}});
    j["events"] = rows;
    return j.dump(2) + "\n";
}

std::string efficiency_to_csv(const EfficiencyReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "event,timestamp,cost_before,cost_after,efficiency\n";
    for (std::size_t i = 0; i < report.events.size(); ++i) {
        const auto& e = report.events[i];
        out << i << ',' << e.timestamp << ',' << e.cost_before << ',' << e.cost_after << ',' << e.efficiency << '\n';
    }
    return out.str();
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream out;
    out.precision(17);
    out << "interval,optimizations,aggregate_efficiency\n";
    for (const auto& p : points) out << p.interval << ',' << p.optimizations << ',' << p.aggregate << '\n';
    return out.str();
}

}  // namespace dockorder
