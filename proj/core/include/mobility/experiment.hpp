#pragma once

#include "mobility/config.hpp"
#include "mobility/eval.hpp"
#include "mobility/features.hpp"
#include "mobility/fusion.hpp"
#include "mobility/lstm.hpp"
#include "mobility/markov.hpp"
#include "mobility/query.hpp"

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace mobility {

// Records which query ids every training call consumed so the evaluation
// side can prove the test set never leaked into a fit.
class TrainingAudit {
public:
    void record_training(const std::string& cell, std::span<const std::uint32_t> query_ids);
    void record_evaluation(const std::string& cell, std::span<const std::uint32_t> query_ids);

    // Throws when a cell's evaluation ids intersect any of its training ids.
    void assert_no_leakage() const;

    std::size_t n_entries() const;
    static std::uint64_t id_hash(std::uint32_t query_id);

private:
    struct Entry {
        std::string cell;
        bool training = false;
        std::vector<std::uint64_t> id_hashes;  // sorted
    };
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
};

// All-group feature vectors per query, computed once and shared by every
// scenario cell.
class FeatureCache {
public:
    FeatureCache() = default;
    FeatureCache(const QueryDataset& dataset, const UsageEventIndex& events,
                 const FeatureDimensions& dims);

    const FeatureVector& get(std::uint32_t query_index) const { return features_.at(query_index); }
    const FeatureDimensions& dims() const { return dims_; }

private:
    FeatureDimensions dims_;
    std::vector<FeatureVector> features_;
};

struct ExperimentContext {
    const QueryDataset& dataset;
    const LabeledDataset& labeled;
    const DatasetSplit& split;
    const RunConfig& cfg;
    const FeatureCache* features = nullptr;  // needed by forest/fusion cells
    TrainingAudit* audit = nullptr;
};

// One (criterion, m) cell materialized for model consumption: labeled rows
// with preprocessed token sequences, partition row indices included.
struct ScenarioData {
    std::int32_t m = 0;
    TargetCriterion criterion;
    std::vector<std::uint32_t> query_ids;
    std::vector<TrainingExample> examples;
    std::vector<Timestamp> target_stays;
    std::vector<std::size_t> train_rows, validation_rows, test_rows;

    std::vector<std::uint32_t> row_query_ids(std::span<const std::size_t> rows) const;
    double mean_test_target_stay() const;
};

ScenarioData build_scenario_data(const ExperimentContext& ctx, const TargetCriterion& criterion,
                                 std::int32_t m);

std::string cell_name(std::int32_t m, const TargetCriterion& criterion, ModelKind model,
                      const FeatureGroupSet& groups);

// Per-cell deterministic seed, independent of scheduling order.
std::uint64_t cell_seed(std::uint64_t root_seed, const std::string& cell);

struct MarkovOutcome {
    MarkovModel model;
    ScenarioResult result;
};
MarkovOutcome run_markov_scenario(const ExperimentContext& ctx, const ScenarioData& data);

struct LstmOutcome {
    LstmClassifier model;
    ScenarioResult result;
    TrainResult train_info;
};
LstmOutcome run_lstm_scenario(const ExperimentContext& ctx, const ScenarioData& data);

struct ForestSingleOutcome {
    ForestModel model;
    ScenarioResult result;
};
ForestSingleOutcome run_forest_single_scenario(const ExperimentContext& ctx,
                                               const ScenarioData& data,
                                               const FeatureGroupSet& groups, int jobs = 1);

struct FusionOutcome {
    FusedModel model;
    ScenarioResult result;  // relative_perf filled from lstm_test_accuracy
};
FusionOutcome run_fusion_scenario(const ExperimentContext& ctx, const ScenarioData& data,
                                  ModelKind fusion_kind, const FeatureGroupSet& groups,
                                  const LstmClassifier& encoder, double lstm_test_accuracy,
                                  int jobs = 1);

}  // namespace mobility
