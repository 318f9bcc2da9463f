// End-to-end pipeline, report emission and the command-line entry point.
#pragma once

#include "dockorder/build_cost.hpp"
#include "dockorder/dockerfile.hpp"
#include "dockorder/errors.hpp"
#include "dockorder/graph.hpp"
#include "dockorder/history.hpp"
#include "dockorder/optimizer.hpp"
#include "dockorder/semantics.hpp"
#include "dockorder/simulator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

// --- JSON views of intermediate results -------------------------------------

std::string document_to_json(const ParsedDockerfile& doc);
std::string elements_to_json(const ParsedDockerfile& doc, const std::vector<SemanticElements>& elements);
std::string frequency_to_json(const FrequencyTable& freq, const ParsedDockerfile* doc = nullptr);
FrequencyTable frequency_from_json(std::string_view json_text, std::size_t instruction_count);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// --- pipeline -----------------------------------------------------------------

enum class CostMode { Measure, Load, Uniform };

struct RunConfig {
    std::string dockerfile_path;
    std::string repo_path;     // default: the Dockerfile's directory
    std::string context_dir;   // default: the Dockerfile's directory
    int window_months = 30;
    double tau = 0.5;
    KeyRule key_rule = KeyRule::Paper;
    bool refresh_keys = true;
    bool safeguard = true;
    int repeats = 3;
    CostMode cost_mode = CostMode::Measure;
    std::string cost_path;  // CostMode::Load
    std::optional<std::string> groups_path;
    std::optional<std::string> registry_path;
    std::optional<std::string> records_path;  // use these records instead of mining
    std::optional<std::int64_t> as_of;
    bool literal_rules = false;
    bool uniform_freq = false;
    bool dry_run = false;
    std::string output_dir;  // default: <dockerfile dir>/.dockorder
    std::string optimized_suffix = ".optimized";
    std::vector<std::size_t> sweep_intervals;
    BuilderAdapter* builder = nullptr;  // default: the docker CLI

    /// Throws Error(user_input) on out-of-range values.
    void validate() const;
};

struct RunResult {
    ParsedDockerfile doc;
    DependencyGraph graph;
    FrequencyTable freq;
    CostTable cost;
    OptimizationPlan plan;
    std::vector<ModificationRecord> records;
    std::vector<ModificationEvent> events;
    std::optional<EfficiencyReport> efficiency;
    std::vector<SweepPoint> sweep;
    std::string optimized_path;  // empty on dry runs
    std::vector<std::string> artifacts;
    bool records_reused = false;
};

/// Errors keep their class and gain the name of the failing step.
class PipelineError : public Error {
public:
    PipelineError(std::string step, const Error& cause)
        : Error(cause.error_class(), step + ": " + cause.what()), step_(std::move(step)) {}
    const std::string& step() const noexcept { return step_; }

private:
    std::string step_;
};

RunResult run_pipeline(const RunConfig& config);

struct ReportPaths {
    std::string plan_json;
    std::string efficiency_json;
    std::string efficiency_csv;
    std::string sweep_csv;
};

/// Writes whichever paths are non-empty. Returns the files written.
std::vector<std::string> emit_report(const OptimizationPlan& plan, const std::optional<EfficiencyReport>& efficiency,
                                     const std::vector<SweepPoint>& sweep, const ReportPaths& paths,
                                     const ParsedDockerfile* doc = nullptr);

int exit_code(ErrorClass c);

/// The dockorder command line. Returns the process exit status.
int cli_main(int argc, char** argv);

}  // namespace dockorder
