#pragma once

#include "dockorder/dockerfile.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

enum class CostSource { Measured, Loaded, Estimated };

std::string_view to_string(CostSource s);

struct CostTable {
    std::vector<double> seconds;  // per instruction index, all >= 0
    CostSource source = CostSource::Estimated;
    int repeats = 1;
    bool low_confidence = false;  // stage alignment was positional
    std::vector<std::string> warnings;

    static CostTable uniform(std::size_t n, double value = 1.0);
};

std::string cost_table_to_json(const CostTable& t);

struct BuildResult {
    bool ok = false;
    std::string log;
    /// BuildKit step number -> instruction index, when the builder knows it.
    std::optional<std::map<int, std::size_t>> step_map;
};

class BuilderAdapter {
public:
    virtual ~BuilderAdapter() = default;
    virtual BuildResult build(const std::string& dockerfile_path, const std::string& context_dir) = 0;
    virtual void prune_all() = 0;
    /// Bytes still held by images and build cache.
    virtual std::uint64_t disk_usage() = 0;
};

/// Talks to the container CLI ($DOCKORDER_DOCKER or "docker").
class DockerCliAdapter : public BuilderAdapter {
public:
    explicit DockerCliAdapter(std::string binary = "");
    BuildResult build(const std::string& dockerfile_path, const std::string& context_dir) override;
    void prune_all() override;
    std::uint64_t disk_usage() override;

private:
    std::string binary_;
};

/// "1.5GB" / "312kB" / "0B" -> bytes (decimal units, as the container CLI prints them).
std::uint64_t parse_size(std::string_view s);

/// Prune, then verify nothing is left. Throws CleanupIncomplete otherwise.
void cleanup_environment(BuilderAdapter& adapter);

/// Every "#N DONE Ts" line; the last occurrence of a step number wins.
std::map<int, double> parse_buildkit_log(std::string_view log);

struct StepAlignment {
    std::map<int, std::size_t> step_to_instruction;
    bool low_confidence = false;
};

/// Align BuildKit steps to instructions from "#N [stage k/n] ..." headers.
/// [internal] steps go to the first FROM. Without headers, DONE steps are
/// assigned in order to the layer-producing instructions and flagged low-confidence.
StepAlignment align_steps(std::string_view log, const ParsedDockerfile& doc);

std::vector<double> attribute_durations(const std::map<int, double>& durations, const StepAlignment& alignment,
                                        std::size_t instruction_count);

CostTable measure_costs(const ParsedDockerfile& doc, const std::string& dockerfile_path, const std::string& context_dir,
                        BuilderAdapter& adapter, int repeats = 3);

/// JSON object keyed by instruction index ("0") or "sha256:<hex of instruction text>",
/// optionally wrapped as {"seconds": {...}}. Missing entries default to 1.0 with a warning.
CostTable load_costs_from_json(std::string_view json_text, const ParsedDockerfile& doc);
CostTable load_costs_from_json(std::string_view json_text, std::size_t instruction_count);
CostTable load_costs(const std::string& path, const ParsedDockerfile& doc);
CostTable load_costs(const std::string& path, std::size_t instruction_count);

}  // namespace dockorder
