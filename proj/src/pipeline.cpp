#include "dockorder/pipeline.hpp"

#include "dockorder/errors.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace dockorder {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    fs::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON views

namespace {

ojson payload_json(const ArgumentPayload& p) {
    return std::visit(
        [](const auto& v) -> ojson {
            using T = std::decay_t<decltype(v)>;
            ojson j;
            if constexpr (std::is_same_v<T, KeyValueList>) {
                j["type"] = "key_value";
                ojson pairs = ojson::array();
                for (const auto& kv : v.pairs)
                    pairs.push_back({{"key", kv.key}, {"value", kv.value ? ojson(*kv.value) : ojson(nullptr)}});
                j["pairs"] = pairs;
                j["legacy_form"] = v.legacy_form;
            } else if constexpr (std::is_same_v<T, ShellText>) {
                j["type"] = "shell";
                j["text"] = v.text;
                j["heredoc"] = v.heredoc;
            } else if constexpr (std::is_same_v<T, ExecArray>) {
                j["type"] = "exec";
                j["items"] = v.items;
                j["json"] = v.json;
            } else if constexpr (std::is_same_v<T, PathArgs>) {
                j["type"] = "paths";
                j["sources"] = v.sources;
                j["destination"] = v.destination;
                j["json"] = v.json;
            } else {
                j["type"] = "value";
                j["value"] = v.value;
            }
            return j;
        },
        p);
}

}  // namespace

std::string document_to_json(const ParsedDockerfile& doc) {
    ojson j;
    ojson dirs = ojson::array();
    for (const auto& d : doc.directives) dirs.push_back({{"name", d.name}, {"value", d.value}});
    j["directives"] = dirs;
    ojson list = ojson::array();
    for (const auto& ins : doc.instructions) {
        ojson x;
        x["index"] = ins.index;
        x["kind"] = std::string(to_string(ins.kind));
        x["stage"] = ins.stage_index;
        ojson flags = ojson::array();
        for (const auto& f : ins.flags)
            flags.push_back({{"name", f.name}, {"value", f.value ? ojson(*f.value) : ojson(nullptr)}});
        x["flags"] = flags;
        x["arguments"] = payload_json(ins.arguments);
        x["span"] = {{"start_line", ins.span.start_line}, {"end_line", ins.span.end_line}};
        x["text"] = ins.text;
        list.push_back(x);
    }
    j["instructions"] = list;
    return j.dump(2) + "\n";
}

std::string elements_to_json(const ParsedDockerfile& doc, const std::vector<SemanticElements>& elements) {
    ojson list = ojson::array();
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& e = elements[i];
        ojson x;
        x["index"] = i;
        if (i < doc.instructions.size()) x["kind"] = std::string(to_string(doc.instructions[i].kind));
        x["vars_defined"] = e.vars_defined;
        x["vars_used"] = e.vars_used;
        x["vars_unresolved"] = e.vars_unresolved;
        x["paths_in"] = e.paths_in;
        x["paths_out"] = e.paths_out;
        x["context_paths"] = e.context_paths;
        x["user_read"] = e.user_read;
        x["user_written"] = e.user_written ? ojson(*e.user_written) : ojson(nullptr);
        x["pkgs_installed"] = e.pkgs_installed;
        x["pkgs_used"] = e.pkgs_used;
        x["tools_provided"] = e.tools_provided;
        x["context_writes"] = e.context_writes;
        x["context_reads"] = e.context_reads;
        ojson misc;
        misc["from"] = e.misc.from;
        misc["onbuild"] = e.misc.onbuild;
        misc["healthcheck"] = e.misc.healthcheck;
        misc["stopsignal"] = e.misc.stopsignal;
        misc["global_arg"] = e.misc.global_arg;
        misc["opaque"] = e.misc.opaque;
        misc["deprecated"] = e.misc.deprecated;
        misc["copy_from"] = e.misc.copy_from ? ojson(*e.misc.copy_from) : ojson(nullptr);
        misc["from_image"] = e.misc.from_image ? ojson(*e.misc.from_image) : ojson(nullptr);
        x["misc"] = misc;
        list.push_back(x);
    }
    return list.dump(2) + "\n";
}

std::string frequency_to_json(const FrequencyTable& freq, const ParsedDockerfile* doc) {
    ojson j;
    j["window_months"] = freq.window_months;
    j["total_modifications"] = freq.total_modifications;
    j["raw"] = freq.raw;
    j["normalized"] = freq.normalized;
    if (doc) {
        ojson rows = ojson::array();
        for (const auto& ins : doc->instructions) {
            ojson r;
            r["index"] = ins.index;
            r["text"] = ins.text;
            r["raw"] = ins.index < freq.raw.size() ? freq.raw[ins.index] : 0.0;
            r["normalized"] = ins.index < freq.normalized.size() ? freq.normalized[ins.index] : 0.0;
            rows.push_back(r);
        }
        j["instructions"] = rows;
    }
    return j.dump(2) + "\n";
}

FrequencyTable frequency_from_json(std::string_view json_text, std::size_t instruction_count) {
    FrequencyTable t;
    try {
        auto j = nlohmann::json::parse(json_text);
        if (j.is_array()) {
            t.normalized = j.get<std::vector<double>>();
        } else {
            t.normalized = j.at("normalized").get<std::vector<double>>();
            if (j.contains("raw")) t.raw = j.at("raw").get<std::vector<double>>();
            if (j.contains("window_months")) t.window_months = j.at("window_months").get<int>();
            if (j.contains("total_modifications"))
                t.total_modifications = j.at("total_modifications").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("frequency file: ") + e.what());
    }
    if (t.normalized.size() != instruction_count)
        throw ParseError("frequency file covers " + std::to_string(t.normalized.size()) + " instructions, expected " +
                         std::to_string(instruction_count));
    if (t.raw.empty()) t.raw = t.normalized;
    double sum = 0;
    for (double x : t.normalized) {
        if (!(x >= 0) || !std::isfinite(x)) throw ParseError("frequency file holds a negative or non-finite value");
        sum += x;
    }
    if (sum == 0) t.normalized = FrequencyTable::uniform(instruction_count).normalized;
    else
        for (double& x : t.normalized) x /= sum;
    return t;
}

// ---------------------------------------------------------------------------
// pipeline

void RunConfig::validate() const {
    if (dockerfile_path.empty()) throw Error(ErrorClass::user_input, "no Dockerfile given");
    if (window_months < 1) throw Error(ErrorClass::user_input, "window_months must be at least 1");
    if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorClass::user_input, "tau must lie in [0, 1]");
    if (repeats < 1) throw Error(ErrorClass::user_input, "repeats must be at least 1");
    if (cost_mode == CostMode::Load && cost_path.empty()) throw Error(ErrorClass::user_input, "no cost file given");
    for (auto k : sweep_intervals)
        if (k < 1) throw Error(ErrorClass::user_input, "sweep intervals must be at least 1");
}

namespace {

template <typename F>
auto step(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const PipelineError&) {
        throw;
    } catch (const Error& e) {
        throw PipelineError(name, e);
    }
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    if (!fs::is_regular_file(cfg.dockerfile_path)) throw DockerfileNotFound(cfg.dockerfile_path);
    fs::path df = fs::absolute(cfg.dockerfile_path).lexically_normal();
    fs::path df_dir = df.parent_path();
    fs::path out_dir = cfg.output_dir.empty() ? df_dir / ".dockorder" : fs::path(cfg.output_dir);
    std::string repo = cfg.repo_path.empty() ? df_dir.string() : cfg.repo_path;
    std::string context = cfg.context_dir.empty() ? df_dir.string() : cfg.context_dir;

    RunResult r;
    auto artifact = [&](const std::string& file, std::string_view text) {
        auto path = (out_dir / file).string();
        write_text_file(path, text);
        r.artifacts.push_back(path);
    };

    // 1. dependency extraction
    std::vector<SemanticElements> elements;
    step("dependency extraction", [&] {
        r.doc = parse_dockerfile(read_text_file(df.string()));
        auto registry = cfg.registry_path ? CommandKnowledgeRegistry::from_file(*cfg.registry_path)
                                          : CommandKnowledgeRegistry::builtin();
        elements = extract_all(r.doc, registry);
        GraphOptions gopts;
        gopts.anti_dependencies = !cfg.literal_rules;
        r.graph = build_graph(r.doc, elements, gopts);
        artifact("document.json", document_to_json(r.doc));
        artifact("elements.json", elements_to_json(r.doc, elements));
        artifact("graph.json", export_graph(r.graph, GraphFormat::Json));
        artifact("graph.dot", export_graph(r.graph, GraphFormat::Dot));
    });
    const std::size_t n = r.doc.instructions.size();

    // 2. frequency evaluation
    step("frequency evaluation", [&] {
        if (cfg.records_path) {
            r.records = records_from_json(read_text_file(*cfg.records_path));
            std::int64_t as_of = cfg.as_of.value_or(std::chrono::duration_cast<std::chrono::seconds>(
                                                        std::chrono::system_clock::now().time_since_epoch())
                                                        .count());
            r.records = filter_window(r.records, cfg.window_months, as_of);
        } else if (!cfg.uniform_freq) {
            HistoryOptions h;
            h.window_months = cfg.window_months;
            h.as_of = cfg.as_of;
            r.records = collect_history_cached(repo, df.string(), h, (out_dir / "records.json").string(),
                                               &r.records_reused);
            r.artifacts.push_back((out_dir / "records.json").string());
        }
        r.freq = cfg.uniform_freq ? FrequencyTable::uniform(n)
                                  : compute_frequencies(r.doc, r.records, cfg.window_months, cfg.tau);
        r.freq.window_months = cfg.window_months;
        artifact("frequencies.json", frequency_to_json(r.freq, &r.doc));
    });

    // 3. build-time collection
    step("build-time collection", [&] {
        switch (cfg.cost_mode) {
            case CostMode::Uniform: r.cost = CostTable::uniform(n); break;
            case CostMode::Load: r.cost = load_costs(cfg.cost_path, r.doc); break;
            case CostMode::Measure: {
                DockerCliAdapter docker;
                BuilderAdapter& b = cfg.builder ? *cfg.builder : docker;
                r.cost = measure_costs(r.doc, df.string(), context, b, cfg.repeats);
                break;
            }
        }
        artifact("costs.json", cost_table_to_json(r.cost));
    });

    // 4. instruction reconstruction
    step("instruction reconstruction", [&] {
        OptimizationOptions o;
        o.key_rule = cfg.key_rule;
        o.refresh_keys = cfg.refresh_keys;
        o.safeguard = cfg.safeguard;
        if (cfg.groups_path) {
            o.preserve_groups = true;
            o.group_map = load_group_map(*cfg.groups_path, n);
        }
        r.plan = optimize(r.graph, r.freq, r.cost, o);
        if (!cfg.dry_run) {
            r.optimized_path = df.string() + cfg.optimized_suffix;
            write_text_file(r.optimized_path, emit_dockerfile(r.doc, r.plan));
        }

        r.events = events_from_records(r.doc, r.records, cfg.tau);
        if (!r.events.empty()) {
            r.efficiency = replay(r.events, r.plan.original_order, r.plan.optimized_order, r.cost);
            if (!cfg.sweep_intervals.empty()) {
                auto hook = record_frequency_hook(r.doc, r.records, r.events, cfg.window_months, cfg.tau);
                r.sweep = sweep_usage_interval(r.events, r.graph, hook, r.cost, cfg.sweep_intervals, o);
            }
            artifact("events.json", events_to_json(r.events));
        }
        ReportPaths paths;
        paths.plan_json = (out_dir / "plan.json").string();
        if (r.efficiency) {
            paths.efficiency_json = (out_dir / "efficiency.json").string();
            paths.efficiency_csv = (out_dir / "efficiency.csv").string();
        }
        if (!r.sweep.empty()) paths.sweep_csv = (out_dir / "sweep.csv").string();
        for (auto& p : emit_report(r.plan, r.efficiency, r.sweep, paths, &r.doc)) r.artifacts.push_back(p);
    });
    return r;
}

std::vector<std::string> emit_report(const OptimizationPlan& plan, const std::optional<EfficiencyReport>& efficiency,
                                     const std::vector<SweepPoint>& sweep, const ReportPaths& paths,
                                     const ParsedDockerfile* doc) {
    std::vector<std::string> written;
    auto put = [&](const std::string& path, const std::string& text) {
        if (path.empty()) return;
        write_text_file(path, text);
        written.push_back(path);
    };
    put(paths.plan_json, plan_to_json(plan, doc));
    if (efficiency) {
        put(paths.efficiency_json, efficiency_to_json(*efficiency));
        put(paths.efficiency_csv, efficiency_to_csv(*efficiency));
    }
    if (!sweep.empty()) put(paths.sweep_csv, sweep_to_csv(sweep));
    return written;
}

int exit_code(ErrorClass c) {
    switch (c) {
        case ErrorClass::internal: return 1;
        case ErrorClass::user_input: return 2;
        case ErrorClass::external_tool: return 3;
    }
    return 1;
}

}  // namespace dockorder
