#include "mobility/eval.hpp"

#include "mobility/rng.hpp"

#include <doctest.h>

using namespace mobility;

namespace {

ScenarioResult cell(std::int32_t m, const TargetCriterion& c, const std::string& model,
                    double acc, std::optional<double> rel = std::nullopt) {
    ScenarioResult r;
    r.m = m;
    r.criterion = c;
    r.model_name = model;
    r.accuracy = acc;
    r.n_test = 100;
    r.relative_perf = rel;
    return r;
}

}  // namespace

TEST_CASE("accuracy@1 counts exact matches") {
    const std::vector<LocationId> all_right = {1, 2, 3};
    CHECK(accuracy_at_1(all_right, all_right) == 1.0);
    const std::vector<LocationId> preds = {1, 2, 3};
    const std::vector<LocationId> labels = {1, 0, 3};
    CHECK(accuracy_at_1(preds, labels) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("accuracy@1 matches a per-item recount on random data") {
    Rng rng(3);
    std::vector<LocationId> preds, labels;
    for (int i = 0; i < 5000; ++i) {
        preds.push_back(static_cast<LocationId>(rng.uniform_index(7)));
        labels.push_back(static_cast<LocationId>(rng.uniform_index(7)));
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++hits;
    CHECK(accuracy_at_1(preds, labels) ==
          doctest::Approx(static_cast<double>(hits) / preds.size()).epsilon(1e-12));
}

TEST_CASE("random guess baseline is one over m minus one") {
    CHECK(random_guess_baseline(5) == doctest::Approx(0.25));
    CHECK(random_guess_baseline(2) == doctest::Approx(1.0));
    CHECK_THROWS_AS(random_guess_baseline(1), std::invalid_argument);
}

TEST_CASE("uniform guessing over non-current locations hits the baseline empirically") {
    Rng rng(5);
    const std::int32_t m = 7;
    std::size_t hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto current = static_cast<LocationId>(rng.uniform_index(m));
        // label uniform over non-current ids
        LocationId label = static_cast<LocationId>(rng.uniform_index(m - 1));
        if (label >= current) ++label;
        LocationId guess = static_cast<LocationId>(rng.uniform_index(m - 1));
        if (guess >= current) ++guess;
        if (guess == label) ++hits;
    }
    CHECK(static_cast<double>(hits) / n ==
          doctest::Approx(random_guess_baseline(m)).epsilon(0.07));
}

TEST_CASE("a single-cell grid aggregates to that cell") {
    const std::vector<ScenarioResult> cells = {
        cell(25, TargetCriterion::successive(), "fusion_c", 0.6, 1.25)};
    const auto grid = build_report_grid(cells, std::vector<std::int32_t>{5, 10});
    REQUIRE(grid.aggregates.size() == 2);
    for (const auto& agg : grid.aggregates)
        CHECK(agg.mean_relative_perf == doctest::Approx(1.25));
}

TEST_CASE("excluded granularities never contribute to aggregates") {
    std::vector<ScenarioResult> cells = {
        cell(25, TargetCriterion::successive(), "fusion_c", 0.6, 1.2),
        cell(5, TargetCriterion::successive(), "fusion_c", 0.9, 99.0)};
    const auto grid = build_report_grid(cells, std::vector<std::int32_t>{5, 10});
    for (const auto& agg : grid.aggregates) {
        CHECK(agg.mean_relative_perf == doctest::Approx(1.2));
        CHECK(agg.key != "5");
    }

    // perturbing the excluded cell changes nothing
    cells[1].relative_perf = 1234.5;
    const auto grid2 = build_report_grid(cells, std::vector<std::int32_t>{5, 10});
    REQUIRE(grid2.aggregates.size() == grid.aggregates.size());
    for (std::size_t i = 0; i < grid.aggregates.size(); ++i)
        CHECK(grid2.aggregates[i].mean_relative_perf ==
              doctest::Approx(grid.aggregates[i].mean_relative_perf));
}

TEST_CASE("aggregates match a hand recount over the cell map") {
    Rng rng(7);
    std::vector<ScenarioResult> cells;
    const std::vector<std::int32_t> ms = {5, 10, 25, 50};
    const auto criteria = default_criteria();
    for (const std::int32_t m : ms)
        for (const auto& c : criteria)
            cells.push_back(cell(m, c, "fusion_c", 0.5, 0.8 + rng.uniform01()));

    const std::vector<std::int32_t> excluded = {5, 10};
    const auto grid = build_report_grid(cells, excluded);

    for (const auto& agg : grid.aggregates) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : cells) {
            if (r.m == 5 || r.m == 10) continue;
            const bool in_axis = agg.axis == "granularity" ? std::to_string(r.m) == agg.key
                                                           : r.criterion.label() == agg.key;
            if (!in_axis) continue;
            sum += *r.relative_perf;
            ++count;
        }
        REQUIRE(count > 0);
        CHECK(agg.mean_relative_perf == doctest::Approx(sum / count).epsilon(1e-12));
    }
}

TEST_CASE("cells without relative performance are skipped in aggregates") {
    const std::vector<ScenarioResult> cells = {
        cell(25, TargetCriterion::successive(), "markov", 0.3),
        cell(25, TargetCriterion::successive(), "fusion_c", 0.66, 1.1)};
    const auto grid = build_report_grid(cells, std::vector<std::int32_t>{});
    for (const auto& agg : grid.aggregates) CHECK(agg.mean_relative_perf == doctest::Approx(1.1));
}

TEST_CASE("results csv has one row per cell and blank relative perf when missing") {
    const std::vector<ScenarioResult> cells = {
        cell(25, TargetCriterion::important_at(5), "markov", 0.31),
        cell(25, TargetCriterion::important_at(5), "fusion_c", 0.62, 2.0)};
    const std::string csv = results_csv(cells);
    CHECK(csv.rfind("m,criterion,k,model,groups,n_test,accuracy,relative_perf,"
                    "mean_target_stay_s\n", 0) == 0);
    CHECK(csv.find("25,important,5,markov,none,100,0.31") != std::string::npos);
    CHECK(csv.find(",,0\n") != std::string::npos);  // markov row has no relative perf
    CHECK(csv.find(",2,0\n") != std::string::npos); // fusion row carries the ratio 2.0
}
