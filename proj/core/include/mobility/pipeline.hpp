#pragma once

#include "mobility/config.hpp"
#include "mobility/experiment.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mobility {

inline constexpr const char* kToolVersion = "0.1.0";

struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineOptions {
    std::filesystem::path out_dir;
    RunConfig cfg;
    int jobs = 1;
};

// generate: synthesize the world and write geo.csv / events.csv.
void cmd_generate(const PipelineOptions& opts);

// prepare: cluster, assign granularities, extract trajectories, simulate
// and label queries, split. Declares geo.csv as input.
void cmd_prepare(const PipelineOptions& opts);

// One scenario cell: trains the model and writes its artifacts plus
// result.json under cells/<name>/.
struct CellSpec {
    ModelKind model = ModelKind::Markov;
    std::int32_t m = 0;
    TargetCriterion criterion;
    FeatureGroupSet groups;

    std::string name() const { return cell_name(m, criterion, model, groups); }
};
void cmd_train(const PipelineOptions& opts, const CellSpec& cell);

// evaluate: merges all cell results into results.csv and heatmap.csv,
// cross-checking n_test against the testing-size table.
void cmd_evaluate(const PipelineOptions& opts);

struct SweepStats {
    int computed = 0;
    int skipped = 0;
};
// sweep: every (m, criterion, model, groups) cell from the config, resumable
// per cell, then evaluate. Cells run on a pool of `jobs` workers.
SweepStats cmd_sweep(const PipelineOptions& opts);

// report: human-readable summary of results.csv and testing_size.csv.
std::string cmd_report(const std::filesystem::path& out_dir);

// Grid the sweep will run; exposed for tests and the CLI's dry runs.
std::vector<CellSpec> sweep_grid(const RunConfig& cfg);

// Prepared-stage artifacts loaded back for training/evaluation.
struct PreparedData {
    QueryDataset dataset;
    LabeledDataset labeled;
    DatasetSplit split;
    UsageEventIndex events;
    FeatureDimensions dims;

    static PreparedData load(const std::filesystem::path& out_dir, const RunConfig& cfg,
                             bool with_events);
};

}  // namespace mobility
