#pragma once

#include "mobility/features.hpp"
#include "mobility/forest.hpp"
#include "mobility/lstm.hpp"
#include "mobility/matrix.hpp"
#include "mobility/optim.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobility {

enum class FeatureGroup : std::uint8_t { App = 0, Sensor = 1, Broadcast = 2, Time = 3 };

// Sorted unique set of feature groups, in the fixed concatenation order
// app, sensor, broadcast, time.
class FeatureGroupSet {
public:
    FeatureGroupSet() = default;
    FeatureGroupSet(std::initializer_list<FeatureGroup> groups);

    void insert(FeatureGroup g);
    bool contains(FeatureGroup g) const;
    bool empty() const { return groups_.empty(); }
    std::span<const FeatureGroup> items() const { return groups_; }

    static FeatureGroupSet parse(const std::string& text);  // "app,sensor" | "all" | ""
    static FeatureGroupSet all();
    std::string label() const;  // "none" for the empty set

    friend bool operator==(const FeatureGroupSet&, const FeatureGroupSet&) = default;

private:
    std::vector<FeatureGroup> groups_;
};

// Column widths of one design-matrix row: LSTM logits first, then the
// selected groups. Time is one-hot (24+7 per endpoint) for DNN consumers
// and ordinal (4 integer-valued columns) for forests.
struct FusionLayout {
    std::int32_t m = 0;
    FeatureDimensions dims;
    FeatureGroupSet groups;
    bool one_hot_time = false;

    std::size_t group_width(FeatureGroup g) const;
    std::size_t feature_width() const;                 // without the logits block
    std::size_t width() const { return m + feature_width(); }
    std::size_t group_offset(FeatureGroup g) const;    // column of the group's first entry
};

// Writes one row: logits, then each selected group.
void fill_fusion_row(std::span<double> row, const FusionLayout& layout,
                     std::span<const double> logits, const FeatureVector& features);

// Design matrix over a set of examples. The encoder must have been trained
// on the training partition only; this function just evaluates it.
Matrix build_fusion_inputs(const LstmClassifier& encoder,
                           std::span<const TrainingExample> examples,
                           std::span<const FeatureVector> features, const FusionLayout& layout);

enum class FusionVariant : std::uint8_t {
    DnnConcat,         // DNN over logits+features, trained jointly with the encoder
    DnnLogitFeature,   // encoder frozen after pretraining, DNN over logits+features
    ForestOverLogits,  // forest over logits+features
};

std::string fusion_variant_name(FusionVariant v);
FusionVariant parse_fusion_variant(const std::string& text);

// Feed-forward rectifier network with a linear output layer; parameters in
// one flat vector like the LSTM.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t input_dim, std::span<const int> hidden, std::size_t output_dim);

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t n_params() const { return params_.size(); }
    std::size_t input_dim() const { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.empty() ? 0 : layer_sizes_.back(); }

    void init_params(Rng& rng);

    struct Cache {
        std::vector<std::vector<double>> activations;  // a0 = input, then post-relu
        std::vector<std::vector<double>> pre;          // pre-activation per layer
    };

    std::vector<double> forward(std::span<const double> input, Cache* cache = nullptr) const;

    // Accumulates gradients; optionally yields d(loss)/d(input) for joint
    // training through an upstream encoder.
    void backward(const Cache& cache, std::span<const double> doutput, std::span<double> grads,
                  std::span<double> dinput = {}) const;

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<double> params_;
};

struct DnnConfig {
    std::vector<int> hidden = {128, 64};
    TrainConfig train;
    bool freeze_encoder_variant_a = false;
};

struct FusedModel {
    FusionVariant variant = FusionVariant::ForestOverLogits;
    FusionLayout layout;
    LstmClassifier encoder;
    Mlp mlp;             // DnnConcat / DnnLogitFeature
    ForestModel forest;  // ForestOverLogits
};

// Joint loss of variant DnnConcat on one example set; exposed so the
// finite-difference test can drive the exact training computation.
struct JointLossResult {
    double loss = 0.0;
    std::vector<double> encoder_grads;
    std::vector<double> mlp_grads;
};
JointLossResult joint_loss_and_grads(const LstmClassifier& encoder, const Mlp& mlp,
                                     const FusionLayout& layout,
                                     std::span<const TrainingExample> batch,
                                     std::span<const FeatureVector> features,
                                     std::span<const std::size_t> batch_indices);

// Trains one fusion model. For DnnConcat the encoder is trained jointly
// (starting from the given, typically pretrained, encoder); for the other
// variants the encoder is frozen. Validation drives early stopping of the
// DNN variants.
FusedModel fusion_fit(FusionVariant variant, const LstmClassifier& encoder,
                      std::span<const TrainingExample> train_examples,
                      std::span<const FeatureVector> train_features,
                      std::span<const TrainingExample> validation_examples,
                      std::span<const FeatureVector> validation_features,
                      const FeatureGroupSet& groups, const FeatureDimensions& dims,
                      const DnnConfig& dnn_cfg, const ForestConfig& forest_cfg, int jobs = 1);

LocationId fused_predict(const FusedModel& model, const TrainingExample& example,
                         const FeatureVector& features);

double fused_accuracy(const FusedModel& model, std::span<const TrainingExample> examples,
                      std::span<const FeatureVector> features);

// fused Accuracy@1 divided by pure-LSTM Accuracy@1; empty when the
// denominator is zero.
std::optional<double> relative_performance(double fused_accuracy, double lstm_accuracy);

}  // namespace mobility
