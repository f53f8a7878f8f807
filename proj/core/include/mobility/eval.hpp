#pragma once

#include "mobility/query.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobility {

double accuracy_at_1(std::span<const LocationId> predictions, std::span<const LocationId> labels);

// Expected accuracy of a uniform guess over the m-1 legal answers (the
// label can never equal the current location).
double random_guess_baseline(std::int32_t m);

// One cell of the experiment grid.
struct ScenarioResult {
    std::int32_t m = 0;
    TargetCriterion criterion;
    std::string model_name;
    std::string groups = "none";  // feature groups of fused / single-feature models
    double accuracy = 0.0;
    std::size_t n_test = 0;
    double mean_target_stay_seconds = 0.0;
    std::optional<double> relative_perf;  // fused accuracy / pure-LSTM accuracy
};

struct HeatmapEntry {
    std::string axis;  // "granularity" | "criterion"
    std::string key;   // m value or criterion label
    double mean_relative_perf = 0.0;
};

struct ReportGrid {
    std::vector<ScenarioResult> cells;
    std::vector<std::int32_t> excluded_m;  // granularities left out of the aggregates
    std::vector<HeatmapEntry> aggregates;
};

// Averages relative performance per granularity (over criteria and groups)
// and per criterion (over included granularities and groups). Cells at
// excluded granularities never contribute.
ReportGrid build_report_grid(std::span<const ScenarioResult> cells,
                             std::span<const std::int32_t> excluded_m);

std::string results_csv(std::span<const ScenarioResult> cells);
std::string heatmap_csv(const ReportGrid& grid);

}  // namespace mobility
