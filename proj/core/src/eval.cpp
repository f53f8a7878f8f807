#include "mobility/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace mobility {
namespace {

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double accuracy_at_1(std::span<const LocationId> predictions, std::span<const LocationId> labels) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("accuracy_at_1: empty or mismatched inputs");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double random_guess_baseline(std::int32_t m) {
    if (m < 2) throw std::invalid_argument("random_guess_baseline: m must be >= 2");
    return 1.0 / static_cast<double>(m - 1);
}

ReportGrid build_report_grid(std::span<const ScenarioResult> cells,
                             std::span<const std::int32_t> excluded_m) {
    ReportGrid grid;
    grid.cells.assign(cells.begin(), cells.end());
    grid.excluded_m.assign(excluded_m.begin(), excluded_m.end());

    const auto excluded = [&](std::int32_t m) {
        return std::find(grid.excluded_m.begin(), grid.excluded_m.end(), m) !=
               grid.excluded_m.end();
    };

    std::map<std::int32_t, std::pair<double, std::size_t>> by_m;
    std::map<TargetCriterion, std::pair<double, std::size_t>> by_criterion;
    for (const ScenarioResult& cell : cells) {
        if (!cell.relative_perf || excluded(cell.m)) continue;
        auto& [m_sum, m_count] = by_m[cell.m];
        m_sum += *cell.relative_perf;
        ++m_count;
        auto& [c_sum, c_count] = by_criterion[cell.criterion];
        c_sum += *cell.relative_perf;
        ++c_count;
    }
    for (const auto& [m, acc] : by_m)
        grid.aggregates.push_back(
            {"granularity", std::to_string(m), acc.first / static_cast<double>(acc.second)});
    for (const auto& [criterion, acc] : by_criterion)
        grid.aggregates.push_back(
            {"criterion", criterion.label(), acc.first / static_cast<double>(acc.second)});
    return grid;
}

std::string results_csv(std::span<const ScenarioResult> cells) {
    std::string out = "m,criterion,k,model,groups,n_test,accuracy,relative_perf,mean_target_stay_s\n";
    for (const ScenarioResult& c : cells) {
        out += std::to_string(c.m);
        out += ',';
        out += c.criterion.name();
        out += ',';
        out += std::to_string(c.criterion.k);
        out += ',';
        out += c.model_name;
        out += ',';
        out += c.groups;
        out += ',';
        out += std::to_string(c.n_test);
        out += ',';
        out += format_double(c.accuracy);
        out += ',';
        out += c.relative_perf ? format_double(*c.relative_perf) : std::string();
        out += ',';
        out += format_double(c.mean_target_stay_seconds);
        out += '\n';
    }
    return out;
}

std::string heatmap_csv(const ReportGrid& grid) {
    std::string out = "axis,key,mean_relative_perf\n";
    for (const HeatmapEntry& e : grid.aggregates) {
        out += e.axis;
        out += ',';
        out += e.key;
        out += ',';
        out += format_double(e.mean_relative_perf);
        out += '\n';
    }
    return out;
}

}  // namespace mobility
