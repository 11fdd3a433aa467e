#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cellsentry/sensitivity.hpp"
#include "oracles.hpp"

using namespace cellsentry;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("the identity scenario reproduces the base case exactly") {
    Workbook wb = load_workbook("samples/toy_model.json");
    Scenario identity;
    identity.name = "identity";
    identity.watch = {"M!B10", "M!B11", "M!F5", "M!B16"};
    ScenarioResult r = run_scenario(wb, identity);
    RecalcResult base = recalculate(wb);
    for (const auto& [target, value] : r.outputs) {
        auto ref = parse_range_text(target);
        CHECK(value == base.value_at(ref->start));
    }
}

TEST_CASE("overrides through names and cells match the oracle") {
    Workbook wb = load_workbook("samples/toy_model.json");
    Scenario rate_up;
    rate_up.name = "rate_up";
    rate_up.overrides = {{"Rate", Value::number(0.10)}};
    rate_up.watch = {"M!B10", "M!F5"};
    ScenarioResult r = run_scenario(wb, rate_up);
    oracle::ToyParams p;
    p.rate = 0.10;
    auto want = oracle::toy_model_values(p);
    REQUIRE(r.outputs[0].second.is_number());
    CHECK(std::abs(r.outputs[0].second.num - want["M!B10"]) <= 1e-9);
    CHECK(std::abs(r.outputs[1].second.num - want["M!F5"]) <= 1e-9);
    CHECK(r.error_cells.empty());
}

TEST_CASE("errors caused by an override are captured, not thrown") {
    json doc = json::parse(
        R"x({"sheets":[{"name":"S","cells":{"A1":{"v":2},"B1":{"f":"=1/A1"}}}]})x");
    Workbook wb = load_workbook_json(doc, "t");
    Scenario zero;
    zero.name = "zero";
    zero.overrides = {{"S!A1", Value::number(0)}};
    zero.watch = {"S!B1"};
    ScenarioResult r = run_scenario(wb, zero);
    REQUIRE(r.error_cells.size() == 1);
    CHECK(render_a1(r.error_cells[0]) == "S!B1");
    CHECK(r.outputs[0].second == Value::error(ErrorCode::Div0));
}

TEST_CASE("invalid override targets are hard errors") {
    Workbook wb = load_workbook("samples/toy_model.json");
    Scenario bad;
    bad.name = "bad";
    bad.overrides = {{"M!C2", Value::number(1)}};  // formula cell
    CHECK_THROWS_AS(run_scenario(wb, bad), ScenarioError);

    Scenario missing;
    missing.name = "missing";
    missing.overrides = {{"Nowhere!A1", Value::number(1)}};
    CHECK_THROWS_AS(run_scenario(wb, missing), ScenarioError);

    Scenario multi;
    multi.name = "multi";
    multi.overrides = {{"M!B1:B2", Value::number(1)}};
    CHECK_THROWS_AS(run_scenario(wb, multi), ScenarioError);
}

TEST_CASE("duplicate scenario names fail before any run") {
    Workbook wb = load_workbook("samples/toy_model.json");
    std::vector<Scenario> suite(2);
    suite[0].name = "same";
    suite[1].name = "same";
    CHECK_THROWS_AS(run_sensitivity_suite(wb, suite), ScenarioError);
    CHECK_THROWS_AS(run_sensitivity_suite(wb, {}), ScenarioError);
}

TEST_CASE("suite results are base-first, deterministic, and order-independent") {
    Workbook wb = load_workbook("samples/toy_model.json");
    auto suite = load_scenario_suite("samples/toy_scenarios.json");
    auto run1 = run_sensitivity_suite(wb, suite);
    auto run2 = run_sensitivity_suite(wb, suite);
    REQUIRE(run1.size() == suite.size() + 1);
    CHECK(run1[0].scenario == "base");
    CHECK(scenario_results_to_json(run1).dump() == scenario_results_to_json(run2).dump());
    for (const auto& r : run1) CHECK(r.expectations_pass);

    auto shuffled = suite;
    std::mt19937 rng(5);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto run3 = run_sensitivity_suite(wb, shuffled);
    std::map<std::string, std::string> by_name1, by_name3;
    for (const auto& r : run1) by_name1[r.scenario] = scenario_results_to_json({r}).dump();
    for (const auto& r : run3) by_name3[r.scenario] = scenario_results_to_json({r}).dump();
    CHECK(by_name1 == by_name3);
}

TEST_CASE("saved scenario workbooks reproduce their outputs on reload") {
    Workbook wb = load_workbook("samples/toy_model.json");
    auto suite = load_scenario_suite("samples/toy_scenarios.json");
    fs::path dir = fresh_dir("cs_sens_artifacts");
    auto results = run_sensitivity_suite(wb, suite, dir);
    REQUIRE(fs::exists(dir / "results.json"));
    for (size_t i = 0; i < suite.size(); ++i) {
        fs::path saved = dir / scenario_artifact_name(suite[i].name);
        REQUIRE(fs::exists(saved));
        Workbook replayed = load_workbook(saved);
        RecalcResult r = recalculate(replayed);
        const ScenarioResult& original = results[i + 1];
        for (const auto& [target, value] : original.outputs) {
            CellRef cell = resolve_single_cell(replayed, target, "replay");
            CHECK(r.value_at(cell) == value);
        }
    }
}

TEST_CASE("expectation bands mark out-of-range outputs") {
    Workbook wb = load_workbook("samples/toy_model.json");
    Scenario sc;
    sc.name = "banded";
    sc.watch = {"M!B16"};
    sc.expect["M!B16"] = {100.0, 200.0};  // actual sum of flows is 700
    ScenarioResult r = run_scenario(wb, sc);
    CHECK_FALSE(r.expectations_pass);
    REQUIRE(r.expectation_failures.size() == 1);
    CHECK(r.expectation_failures[0].find("above max") != std::string::npos);
}
