#pragma once

#include "mobility/fusion.hpp"
#include "mobility/kmeans.hpp"
#include "mobility/optim.hpp"
#include "mobility/query.hpp"
#include "mobility/synthgen.hpp"
#include "mobility/trajectory.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mobility {

// Flat "section.key = value" text config. Unknown keys are rejected once
// the consumer finishes reading, which catches typos early.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::int32_t> get_int_list(const std::string& key,
                                           std::vector<std::int32_t> fallback) const;
    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback) const;

    // Throws naming every key that no accessor consumed.
    void reject_unknown_keys() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> consumed_;
};

enum class ModelKind : std::uint8_t {
    Markov,
    Lstm,
    ForestSingle,
    FusionA,
    FusionB,
    FusionC,
};
std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

// Everything one run needs, with the shipped defaults.
struct RunConfig {
    WorldConfig world;
    GapConfig gaps{0.002, 600, 7200};
    ExtractionConfig extract;
    GranularityConfig granularity;
    std::int64_t transition_min_count = 5;

    int query_n_per_traj = 5;
    double query_min_frac = 0.2;
    std::vector<TargetCriterion> criteria = default_criteria();
    SplitFractions split;

    SequencePreprocessConfig preprocess;
    LstmDims lstm_dims{0, 32, 64};  // m filled per scenario
    TrainConfig train;
    DnnConfig dnn;
    ForestConfig forest;
    FusionVariant fusion_variant = FusionVariant::ForestOverLogits;

    std::vector<std::int32_t> eval_exclude_m = {5, 10};
    std::vector<ModelKind> sweep_models = {ModelKind::Markov, ModelKind::Lstm,
                                           ModelKind::ForestSingle, ModelKind::FusionC};
    std::vector<FeatureGroupSet> sweep_groups = {
        FeatureGroupSet{FeatureGroup::App}, FeatureGroupSet{FeatureGroup::Sensor},
        FeatureGroupSet{FeatureGroup::Broadcast}, FeatureGroupSet{FeatureGroup::Time},
        FeatureGroupSet::all()};

    static RunConfig from_kv(const KeyValueConfig& kv);
    static RunConfig load(const std::string& path);

    // Canonical echo of every setting; hashed into the run manifest.
    std::string echo() const;
    void validate() const;
};

}  // namespace mobility
