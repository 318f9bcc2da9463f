// Layer-cache rebuild simulation and history replay.
#pragma once

#include "dockorder/build_cost.hpp"
#include "dockorder/dockerfile.hpp"
#include "dockorder/graph.hpp"
#include "dockorder/history.hpp"
#include "dockorder/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

struct ModificationEvent {
    std::set<std::size_t> modified_indices;
    std::int64_t timestamp = 0;
    std::string commit_id;  // empty for synthetic events
};

/// Sum of b from the earliest modified position to the end of `order`.
double simulate_rebuild_cost(const std::vector<std::size_t>& order, const ModificationEvent& event,
                             const CostTable& cost);

struct EventOutcome {
    double cost_before = 0;
    double cost_after = 0;
    double efficiency = 0;  // (before - after) / before, 0 when before is 0
    std::int64_t timestamp = 0;
};

struct EfficiencyReport {
    std::vector<EventOutcome> events;
    double aggregate = 0;  // mean efficiency
    std::size_t count() const { return events.size(); }
};

EfficiencyReport replay(const std::vector<ModificationEvent>& history, const std::vector<std::size_t>& original_order,
                        const std::vector<std::size_t>& optimized_order, const CostTable& cost);

/// Frequencies available after the first `events_seen` events.
using FrequencyHook = std::function<FrequencyTable(std::size_t events_seen)>;

struct SweepPoint {
    std::size_t interval = 1;
    double aggregate = 0;
    std::size_t optimizations = 0;
};

/// Replays `history` re-optimizing only before events 0, interval, 2*interval, ...
SweepPoint sweep_usage_interval(const std::vector<ModificationEvent>& history, const DependencyGraph& graph,
                                const FrequencyHook& freq_at, const CostTable& cost, std::size_t interval,
                                const OptimizationOptions& opts = {});
std::vector<SweepPoint> sweep_usage_interval(const std::vector<ModificationEvent>& history,
                                             const DependencyGraph& graph, const FrequencyHook& freq_at,
                                             const CostTable& cost, const std::vector<std::size_t>& intervals,
                                             const OptimizationOptions& opts = {});

/// One event per commit, oldest first. A direct record marks its most similar
/// instruction; a file record marks every COPY/ADD whose sources contain it.
std::vector<ModificationEvent> events_from_records(const ParsedDockerfile& doc,
                                                   const std::vector<ModificationRecord>& records, double tau = 0.5);

/// Frequencies recomputed from the records of the first k events' commits.
FrequencyHook record_frequency_hook(const ParsedDockerfile& doc, std::vector<ModificationRecord> records,
                                    std::vector<ModificationEvent> events, int window_months = 30, double tau = 0.5);

/// Empirical frequencies of the first k events (each index counted once per event); uniform when k = 0.
FrequencyHook event_frequency_hook(std::vector<ModificationEvent> events, std::size_t instruction_count);

std::string events_to_json(const std::vector<ModificationEvent>& events);
std::vector<ModificationEvent> events_from_json(std::string_view json_text, std::size_t instruction_count);

std::string efficiency_to_json(const EfficiencyReport& report);
std::string efficiency_to_csv(const EfficiencyReport& report);
std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace dockorder
