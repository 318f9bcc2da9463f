#include "dockorder/errors.hpp"
#include "dockorder/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>

using namespace dockorder;
namespace fs = std::filesystem;

namespace {

struct AppFixture {
    support::TempDir tmp;
    support::GitRepo repo{tmp / "repo"};
    support::AppHistory history = support::build_app_history(repo);

    RunConfig config() const {
        RunConfig c;
        c.dockerfile_path = repo.dir() + "/Dockerfile";
        c.cost_mode = CostMode::Uniform;
        c.as_of = support::unix_time("2026-04-01T00:00:00");
        return c;
    }
};

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dockorder");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

// Rebuild cost of one event: every instruction from the earliest modified position on.
double suffix_cost(const std::vector<std::size_t>& order, const std::set<std::size_t>& modified,
                   const std::vector<double>& b) {
    std::size_t first = order.size();
    for (std::size_t p = 0; p < order.size(); ++p)
        if (modified.count(order[p])) {
            first = p;
            break;
        }
    double s = 0;
    for (std::size_t p = first; p < order.size(); ++p) s += b[order[p]];
    return s;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("end to end on a mined repository") {
    AppFixture fx;
    auto r = run_pipeline(fx.config());
    const std::vector<double> f{0, 0, 0, 0, 0.5, 0.5, 0};
    const std::vector<double> b(7, 1.0);
    const std::vector<std::size_t> identity{0, 1, 2, 3, 4, 5, 6};
    const std::vector<std::size_t> expected{0, 1, 2, 3, 6, 4, 5};

    CHECK(r.freq.normalized == f);
    CHECK(r.plan.optimized_order == expected);
    CHECK(r.plan.cost_before == doctest::Approx(support::oracle_cost(identity, f, b)));
    CHECK(r.plan.cost_after == doctest::Approx(support::oracle_cost(expected, f, b)));
    CHECK(r.plan.cost_before == doctest::Approx(2.5));
    CHECK(r.plan.cost_after == doctest::Approx(1.5));
    CHECK(r.graph.is_topological_order(r.plan.optimized_order));

    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].modified_indices == std::set<std::size_t>{4});
    CHECK(r.events[1].modified_indices == std::set<std::size_t>{5});
    REQUIRE(r.efficiency);
    double e1 = 1 - suffix_cost(expected, {4}, b) / suffix_cost(identity, {4}, b);
    double e2 = 1 - suffix_cost(expected, {5}, b) / suffix_cost(identity, {5}, b);
    CHECK(r.efficiency->aggregate == doctest::Approx((e1 + e2) / 2));
    CHECK(r.efficiency->aggregate == doctest::Approx(5.0 / 12.0));

    REQUIRE_FALSE(r.optimized_path.empty());
    CHECK(r.optimized_path == fx.repo.dir() + "/Dockerfile.optimized");
    auto optimized = support::read_file(r.optimized_path);
    CHECK(optimized == serialize(r.doc, expected));
    CHECK(same_structure(parse_dockerfile(optimized), parse_dockerfile(serialize(r.doc, expected))));
    for (const char* name : {"document.json", "elements.json", "graph.json", "graph.dot", "records.json",
                             "frequencies.json", "costs.json", "events.json", "plan.json", "efficiency.json",
                             "efficiency.csv"})
        CHECK_MESSAGE(fs::exists(fx.repo.dir() + "/.dockorder/" + name), name);
}

TEST_CASE("repeat runs are deterministic and reuse mined records") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.sweep_intervals = {1, 2};
    auto first = run_pipeline(cfg);
    auto plan1 = support::read_file(fx.repo.dir() + "/.dockorder/plan.json");
    auto second = run_pipeline(cfg);
    CHECK_FALSE(first.records_reused);
    CHECK(second.records_reused);
    CHECK(support::read_file(fx.repo.dir() + "/.dockorder/plan.json") == plan1);
    CHECK(second.plan.optimized_order == first.plan.optimized_order);
    CHECK(second.sweep.size() == 2);
    CHECK(fs::exists(fx.repo.dir() + "/.dockorder/sweep.csv"));
}

TEST_CASE("dry runs leave the Dockerfile alone") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.dry_run = true;
    cfg.output_dir = fx.tmp / "out";
    auto before = support::read_file(cfg.dockerfile_path);
    auto r = run_pipeline(cfg);
    CHECK(r.optimized_path.empty());
    CHECK_FALSE(fs::exists(fx.repo.dir() + "/Dockerfile.optimized"));
    CHECK(fs::exists(fx.tmp / "out/plan.json"));
    CHECK(support::read_file(cfg.dockerfile_path) == before);
}

TEST_CASE("configuration errors") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.dockerfile_path = fx.repo.dir() + "/missing/Dockerfile";
    CHECK_THROWS_AS(run_pipeline(cfg), DockerfileNotFound);

    for (auto mutate : std::vector<void (*)(RunConfig&)>{
             [](RunConfig& c) { c.window_months = 0; }, [](RunConfig& c) { c.tau = 1.5; },
             [](RunConfig& c) { c.repeats = 0; }, [](RunConfig& c) { c.sweep_intervals = {0}; },
             [](RunConfig& c) {
                 c.cost_mode = CostMode::Load;
                 c.cost_path.clear();
             }}) {
        auto c = fx.config();
        mutate(c);
        try {
            c.validate();
            FAIL("accepted an invalid configuration");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::user_input);
        }
    }
}

TEST_CASE("a failing step names itself and keeps earlier artifacts") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.cost_mode = CostMode::Load;
    cfg.cost_path = fx.tmp / "no-such-costs.json";
    try {
        run_pipeline(cfg);
        FAIL("expected a failure");
    } catch (const PipelineError& e) {
        CHECK(e.step() == "build-time collection");
        CHECK(std::string(e.what()).rfind("build-time collection: ", 0) == 0);
    }
    CHECK(fs::exists(fx.repo.dir() + "/.dockorder/graph.json"));
    CHECK(fs::exists(fx.repo.dir() + "/.dockorder/frequencies.json"));
    CHECK_FALSE(fs::exists(fx.repo.dir() + "/.dockorder/plan.json"));

    cfg.cost_mode = CostMode::Measure;
    support::ScriptedBuilder builder;
    builder.builds.push_back(BuildResult{false, "ERROR: failed to solve", std::nullopt});
    cfg.builder = &builder;
    try {
        run_pipeline(cfg);
        FAIL("expected a failure");
    } catch (const PipelineError& e) {
        CHECK(e.step() == "build-time collection");
        CHECK(e.error_class() == ErrorClass::external_tool);
    }
}

TEST_CASE("loaded costs and recorded history") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.cost_mode = CostMode::Load;
    cfg.cost_path = fx.tmp / "costs.json";
    support::write_file(cfg.cost_path, R"({"seconds": {"0": 2, "1": 0, "2": 0, "3": 0.5, "4": 30, "5": 0.5, "6": 0}})");
    cfg.records_path = fx.tmp / "records.json";
    auto mined = collect_history(fx.repo.dir(), fx.repo.dir() + "/Dockerfile", HistoryOptions{30, cfg.as_of, {}});
    support::write_file(*cfg.records_path, records_to_json(mined));

    auto r = run_pipeline(cfg);
    const std::vector<double> f{0, 0, 0, 0, 0.5, 0.5, 0};
    const std::vector<double> b{2, 0, 0, 0.5, 30, 0.5, 0};
    CHECK(r.records == mined);
    CHECK(r.plan.cost_before == doctest::Approx(support::oracle_cost({0, 1, 2, 3, 4, 5, 6}, f, b)));
    CHECK(r.plan.cost_after == doctest::Approx(support::oracle_best(r.graph, f, b)));
}

TEST_CASE("uniform frequencies leave an order with nothing to gain") {
    AppFixture fx;
    auto cfg = fx.config();
    cfg.uniform_freq = true;
    auto r = run_pipeline(cfg);
    CHECK(r.plan.cost_after <= r.plan.cost_before + 1e-12);
    CHECK(r.graph.is_topological_order(r.plan.optimized_order));
}

TEST_CASE("report emission and JSON helpers") {
    support::TempDir tmp;
    OptimizationPlan plan;
    plan.original_order = {0, 1};
    plan.optimized_order = {1, 0};
    plan.cost_before = 2;
    plan.cost_after = 1;
    plan.chosen_variant = "paper";
    EfficiencyReport eff;
    eff.events.push_back(EventOutcome{2, 1, 0.5, 10});
    eff.aggregate = 0.5;
    ReportPaths paths;
    paths.plan_json = tmp / "r/plan.json";
    paths.efficiency_csv = tmp / "r/eff.csv";
    auto written = emit_report(plan, eff, {}, paths);
    CHECK(written == std::vector<std::string>{paths.plan_json, paths.efficiency_csv});
    CHECK(support::read_file(paths.efficiency_csv).rfind("event,timestamp,cost_before,cost_after,efficiency\n", 0) == 0);
    auto plan_text = support::read_file(paths.plan_json);
    CHECK(plan_text.find("\"chosen_variant\": \"paper\"") != std::string::npos);

    FrequencyTable t = FrequencyTable::uniform(3);
    t.normalized = {0.2, 0.3, 0.5};
    CHECK(frequency_from_json(frequency_to_json(t), 3).normalized == t.normalized);
    CHECK(frequency_from_json("[1, 1, 2]", 3).normalized == std::vector<double>{0.25, 0.25, 0.5});
    CHECK_THROWS(frequency_from_json("[1, 2]", 3));

    CHECK(exit_code(ErrorClass::internal) == 1);
    CHECK(exit_code(ErrorClass::user_input) == 2);
    CHECK(exit_code(ErrorClass::external_tool) == 3);
}

TEST_CASE("command line exit codes") {
    AppFixture fx;
    const std::string df = fx.repo.dir() + "/Dockerfile";
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"parse", fx.tmp / "absent"}) == 2);
    CHECK(run_cli({"parse", df, "-o", fx.tmp / "doc.json"}) == 0);
    CHECK(fs::exists(fx.tmp / "doc.json"));
    CHECK(run_cli({"graph", df, "--format", "json", "-o", fx.tmp / "g.json"}) == 0);
    CHECK(import_graph_json(support::read_file(fx.tmp / "g.json")).size() == 7);
    CHECK(run_cli({"optimize", df, "--uniform-cost", "--repo", fx.repo.dir(), "--as-of", "2026-04-01", "--emit",
                   fx.tmp / "opt.Dockerfile"}) == 0);
    CHECK(parse_dockerfile(support::read_file(fx.tmp / "opt.Dockerfile")).instructions[4].kind == InstructionKind::Cmd);
    CHECK(run_cli({"run", df, "--uniform-cost", "--as-of", "2026-04-01", "--dry-run"}) == 0);
    CHECK(run_cli({"run", df, "--uniform-cost", "--window-months", "0"}) == 2);

    setenv("DOCKORDER_DOCKER", "/nonexistent/docker", 1);
    CHECK(run_cli({"cost", "measure", df}) == 3);
    unsetenv("DOCKORDER_DOCKER");
}

}
