#include "dockorder/consistency.hpp"
#include "dockorder/errors.hpp"
#include "dockorder/pipeline.hpp"

#include <filesystem>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;

namespace dockorder {

namespace {

std::string read_input(const std::string& path) {
    if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
    if (!fs::is_regular_file(path)) throw DockerfileNotFound(path);
    return read_text_file(path);
}

void output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else write_text_file(path, text);
}

std::string dir_of(const std::string& path) {
    auto p = fs::absolute(path).parent_path();
    return p.string();
}

KeyRule parse_key(const std::string& s) {
    auto k = key_rule_from_string(s);
    if (!k) throw Error(ErrorClass::user_input, "unknown key rule '" + s + "'");
    return *k;
}

std::optional<std::int64_t> parse_as_of(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_timestamp(s);
}

struct WeightFlags {
    std::string freq_path;
    bool uniform_freq = false;
    std::string repo;
    int window_months = 30;
    double tau = 0.5;
    std::string as_of;
    std::string costs_path;
    bool uniform_cost = false;
    bool literal_rules = false;
    std::string registry;

    void add(CLI::App* c) {
        c->add_option("--freq", freq_path, "Frequency table JSON (output of 'freq')");
        c->add_flag("--uniform-freq", uniform_freq, "Give every instruction the same frequency");
        c->add_option("--repo", repo, "Git work tree to mine (default: the Dockerfile's directory)");
        c->add_option("--window-months", window_months, "History window in months")->check(CLI::PositiveNumber);
        c->add_option("--tau", tau, "Shell similarity threshold")->check(CLI::Range(0.0, 1.0));
        c->add_option("--as-of", as_of, "End of the history window (unix seconds or ISO date)");
        c->add_option("--costs", costs_path, "Build cost JSON");
        c->add_flag("--uniform-cost", uniform_cost, "Give every instruction a build time of 1");
        c->add_flag("--literal-rules", literal_rules, "Only read-after-write dependency rules");
        c->add_option("--registry", registry, "Command knowledge registry JSON");
    }

    DependencyGraph graph(const ParsedDockerfile& doc) const {
        auto reg = registry.empty() ? CommandKnowledgeRegistry::builtin() : CommandKnowledgeRegistry::from_file(registry);
        GraphOptions o;
        o.anti_dependencies = !literal_rules;
        return build_graph(doc, extract_all(doc, reg), o);
    }

    std::vector<ModificationRecord> records(const std::string& df) const {
        HistoryOptions h;
        h.window_months = window_months;
        h.as_of = parse_as_of(as_of);
        return collect_history(repo.empty() ? dir_of(df) : repo, df, h);
    }

    FrequencyTable frequencies(const ParsedDockerfile& doc, const std::string& df) const {
        const auto n = doc.instructions.size();
        if (uniform_freq) return FrequencyTable::uniform(n);
        if (!freq_path.empty()) return frequency_from_json(read_text_file(freq_path), n);
        return compute_frequencies(doc, records(df), window_months, tau);
    }

    CostTable costs(const ParsedDockerfile& doc) const {
        if (!costs_path.empty()) return load_costs(costs_path, doc);
        if (uniform_cost) return CostTable::uniform(doc.instructions.size());
        throw Error(ErrorClass::user_input, "give --costs=path or --uniform-cost");
    }
};

int run_cli(int argc, char** argv) {
    CLI::App app{"Reorders Dockerfile instructions to lower expected rebuild time.", "dockorder"};
    app.require_subcommand(1);
    std::function<void()> action;

    // parse
    std::string df, out;
    auto* parse = app.add_subcommand("parse", "Print the instruction list as JSON");
    parse->add_option("dockerfile", df, "Dockerfile path or -")->required();
    parse->add_option("-o,--output", out, "Output path");
    parse->callback([&] {
        action = [&] { output(out, document_to_json(parse_dockerfile(read_input(df)))); };
    });

    // elements
    std::string registry;
    auto* elements = app.add_subcommand("elements", "Print per-instruction semantic elements as JSON");
    elements->add_option("dockerfile", df)->required();
    elements->add_option("--registry", registry, "Command knowledge registry JSON");
    elements->add_option("-o,--output", out);
    elements->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            auto reg = registry.empty() ? CommandKnowledgeRegistry::builtin()
                                        : CommandKnowledgeRegistry::from_file(registry);
            output(out, elements_to_json(doc, extract_all(doc, reg)));
        };
    });

    // graph
    std::string format = "dot";
    bool literal = false;
    auto* graph = app.add_subcommand("graph", "Print the dependency graph");
    graph->add_option("dockerfile", df)->required();
    graph->add_option("--format", format)->check(CLI::IsMember({"dot", "json"}));
    graph->add_option("--output,-o", out);
    graph->add_option("--registry", registry);
    graph->add_flag("--literal-rules", literal, "Only read-after-write dependency rules");
    graph->callback([&] {
        action = [&] {
            WeightFlags w;
            w.registry = registry;
            w.literal_rules = literal;
            auto g = w.graph(parse_dockerfile(read_input(df)));
            output(out, export_graph(g, format == "dot" ? GraphFormat::Dot : GraphFormat::Json));
        };
    });

    // freq
    WeightFlags weights;
    std::string records_out, records_in;
    auto* freq = app.add_subcommand("freq", "Mine history and print modification frequencies");
    freq->add_option("dockerfile", df)->required()->check(CLI::ExistingFile);
    freq->add_option("--repo", weights.repo);
    freq->add_option("--window-months", weights.window_months)->check(CLI::PositiveNumber);
    freq->add_option("--tau", weights.tau)->check(CLI::Range(0.0, 1.0));
    freq->add_option("--as-of", weights.as_of);
    freq->add_option("--records-out", records_out, "Write the mined records as JSON");
    freq->add_option("--records-in", records_in, "Use these records instead of mining");
    freq->add_option("-o,--output", out);
    freq->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            std::vector<ModificationRecord> recs;
            if (!records_in.empty()) {
                recs = records_from_json(read_text_file(records_in));
                if (auto as_of = parse_as_of(weights.as_of)) recs = filter_window(recs, weights.window_months, *as_of);
            } else {
                recs = weights.records(df);
            }
            if (!records_out.empty()) write_text_file(records_out, records_to_json(recs));
            auto table = compute_frequencies(doc, recs, weights.window_months, weights.tau);
            output(out, frequency_to_json(table, &doc));
        };
    });

    // cost
    auto* cost = app.add_subcommand("cost", "Measure or load per-instruction build times");
    cost->require_subcommand(1);
    std::string context, cost_file;
    int repeats = 3;
    auto* measure = cost->add_subcommand("measure", "Build without cache and time each instruction");
    measure->add_option("dockerfile", df)->required()->check(CLI::ExistingFile);
    measure->add_option("--context", context, "Build context (default: the Dockerfile's directory)");
    measure->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
    measure->add_option("-o,--output", out);
    measure->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            DockerCliAdapter docker;
            auto t = measure_costs(doc, df, context.empty() ? dir_of(df) : context, docker, repeats);
            output(out, cost_table_to_json(t));
        };
    });
    auto* load = cost->add_subcommand("load", "Validate a cost file against a Dockerfile");
    load->add_option("path", cost_file)->required();
    load->add_option("dockerfile", df)->required()->check(CLI::ExistingFile);
    load->add_option("-o,--output", out);
    load->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            auto t = load_costs(cost_file, doc);
            for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
            output(out, cost_table_to_json(t));
        };
    });

    // optimize
    std::string key = "paper", groups, emit, report;
    bool stale = false, no_safeguard = false, dry_run = false;
    auto* opt = app.add_subcommand("optimize", "Reorder instructions");
    opt->add_option("dockerfile", df)->required()->check(CLI::ExistingFile);
    weights.add(opt);
    opt->add_option("--key", key)->check(CLI::IsMember({"paper", "ratio"}));
    opt->add_flag("--stale-keys", stale, "Fix remaining-time keys when a node becomes ready");
    opt->add_flag("--no-safeguard", no_safeguard, "Keep the new order even if it costs more");
    opt->add_option("--groups", groups, "JSON list of instruction groups to keep together");
    opt->add_option("--emit", emit, "Write the reordered Dockerfile here");
    opt->add_option("--report", report, "Write the plan JSON here (default: stdout)");
    opt->add_flag("--dry-run", dry_run, "Report only");
    opt->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            auto g = weights.graph(doc);
            OptimizationOptions o;
            o.key_rule = parse_key(key);
            o.refresh_keys = !stale;
            o.safeguard = !no_safeguard;
            if (!groups.empty()) {
                o.preserve_groups = true;
                o.group_map = load_group_map(groups, doc.instructions.size());
            }
            auto plan = optimize(g, weights.frequencies(doc, df), weights.costs(doc), o);
            if (!emit.empty() && !dry_run) write_text_file(emit, emit_dockerfile(doc, plan));
            output(report, plan_to_json(plan, &doc));
        };
    });

    // simulate
    std::string history;
    std::vector<std::size_t> intervals;
    auto* sim = app.add_subcommand("simulate", "Replay modification history against the optimized order");
    sim->add_option("dockerfile", df)->required()->check(CLI::ExistingFile);
    weights.add(sim);
    sim->add_option("--history", history, "Events JSON file, or a git work tree to mine")->required();
    sim->add_option("--interval", intervals, "Re-optimize every N events (repeatable)")->check(CLI::PositiveNumber);
    sim->add_option("--key", key)->check(CLI::IsMember({"paper", "ratio"}));
    sim->add_option("--report", report, "JSON report path; a CSV is written next to it");
    sim->callback([&] {
        action = [&] {
            auto doc = parse_dockerfile(read_input(df));
            const auto n = doc.instructions.size();
            auto g = weights.graph(doc);
            auto costs = weights.costs(doc);
            OptimizationOptions o;
            o.key_rule = parse_key(key);

            std::vector<ModificationEvent> events;
            FrequencyTable f;
            FrequencyHook hook;
            if (fs::is_directory(history)) {
                WeightFlags w = weights;
                w.repo = history;
                auto recs = w.records(df);
                events = events_from_records(doc, recs, weights.tau);
                f = weights.uniform_freq || !weights.freq_path.empty()
                        ? weights.frequencies(doc, df)
                        : compute_frequencies(doc, recs, weights.window_months, weights.tau);
                hook = record_frequency_hook(doc, recs, events, weights.window_months, weights.tau);
            } else {
                events = events_from_json(read_text_file(history), n);
                hook = event_frequency_hook(events, n);
                f = weights.uniform_freq || !weights.freq_path.empty() ? weights.frequencies(doc, df)
                                                                       : hook(events.size());
            }
            auto plan = optimize(g, f, costs, o);
            auto eff = replay(events, plan.original_order, plan.optimized_order, costs);
            std::vector<SweepPoint> sweep;
            if (!intervals.empty()) sweep = sweep_usage_interval(events, g, hook, costs, intervals, o);

            auto j = nlohmann::ordered_json::parse(efficiency_to_json(eff));
            if (!sweep.empty()) {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& p : sweep)
                    arr.push_back({{"interval", p.interval},
                                   {"optimizations", p.optimizations},
                                   {"aggregate_efficiency", p.aggregate}});
                j["sweep"] = arr;
            }
            output(report, j.dump(2) + "\n");
            if (!report.empty() && report != "-") {
                auto base = fs::path(report).replace_extension("").string();
                write_text_file(base + ".csv", efficiency_to_csv(eff));
                if (!sweep.empty()) write_text_file(base + ".sweep.csv", sweep_to_csv(sweep));
            }
        };
    });

    // verify
    std::string image_a, image_b;
    std::vector<std::string> excludes;
    auto* verify = app.add_subcommand("verify", "Compare two images (or fixture directories)");
    verify->add_option("--image-a", image_a)->required();
    verify->add_option("--image-b", image_b)->required();
    verify->add_option("--exclude-env", excludes, "Also ignore this variable (repeatable)");
    verify->add_option("--report", report);
    verify->callback([&] {
        action = [&] {
            auto make = [](const std::string& x) -> std::unique_ptr<ImageInspector> {
                if (fs::is_directory(x)) return std::make_unique<FixtureInspector>(x);
                return std::make_unique<DockerInspector>(x);
            };
            auto a = make(image_a), b = make(image_b);
            auto ex = default_excludes();
            ex.insert(excludes.begin(), excludes.end());
            output(report, consistency_to_json(compare_images(*a, *b, ex)));
        };
    });

    // run
    RunConfig cfg;
    std::string as_of, cost_path;
    bool uniform_cost = false, run_stale = false, run_no_safeguard = false;
    std::string run_groups, run_registry, run_records;
    auto* run = app.add_subcommand("run", "Full pipeline: graph, frequencies, costs, plan, replay");
    run->add_option("dockerfile", cfg.dockerfile_path)->required();
    run->add_option("--repo", cfg.repo_path);
    run->add_option("--context", cfg.context_dir);
    run->add_option("--window-months", cfg.window_months)->check(CLI::PositiveNumber);
    run->add_option("--tau", cfg.tau)->check(CLI::Range(0.0, 1.0));
    run->add_option("--key", key)->check(CLI::IsMember({"paper", "ratio"}));
    run->add_flag("--stale-keys", run_stale);
    run->add_flag("--no-safeguard", run_no_safeguard);
    run->add_option("--repeats", cfg.repeats)->check(CLI::PositiveNumber);
    run->add_option("--costs", cost_path, "Load build costs instead of measuring");
    run->add_flag("--uniform-cost", uniform_cost);
    run->add_option("--groups", run_groups);
    run->add_option("--registry", run_registry);
    run->add_option("--records", run_records, "Use these records instead of mining");
    run->add_option("--as-of", as_of);
    run->add_flag("--literal-rules", cfg.literal_rules);
    run->add_flag("--uniform-freq", cfg.uniform_freq);
    run->add_flag("--dry-run", cfg.dry_run, "Write reports but not the optimized Dockerfile");
    run->add_option("--out-dir", cfg.output_dir, "Report directory (default: <dockerfile dir>/.dockorder)");
    run->add_option("--suffix", cfg.optimized_suffix, "Suffix of the optimized Dockerfile");
    run->add_option("--sweep", cfg.sweep_intervals, "Usage intervals to sweep (repeatable)");
    run->callback([&] {
        action = [&] {
            cfg.key_rule = parse_key(key);
            cfg.refresh_keys = !run_stale;
            cfg.safeguard = !run_no_safeguard;
            cfg.as_of = parse_as_of(as_of);
            if (!cost_path.empty()) {
                cfg.cost_mode = CostMode::Load;
                cfg.cost_path = cost_path;
            } else if (uniform_cost) {
                cfg.cost_mode = CostMode::Uniform;
            }
            if (!run_groups.empty()) cfg.groups_path = run_groups;
            if (!run_registry.empty()) cfg.registry_path = run_registry;
            if (!run_records.empty()) cfg.records_path = run_records;
            auto r = run_pipeline(cfg);
            std::cout << "variant: " << r.plan.chosen_variant << "\n";
            std::cout << "cost_before: " << r.plan.cost_before << "\n";
            std::cout << "cost_after: " << r.plan.cost_after << "\n";
            if (r.efficiency)
                std::cout << "replay_efficiency: " << r.efficiency->aggregate << " over " << r.efficiency->count()
                          << " events\n";
            if (!r.optimized_path.empty()) std::cout << "written: " << r.optimized_path << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (action) action();
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const Error& e) {
        std::cerr << "dockorder: " << e.what() << "\n";
        return exit_code(e.error_class());
    } catch (const std::exception& e) {
        std::cerr << "dockorder: internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace dockorder
