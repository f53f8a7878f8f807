#pragma once

#include "mobility/optim.hpp"
#include "mobility/rng.hpp"
#include "mobility/trajectory.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mobility {

struct SequencePreprocessConfig {
    int truncate_len = 100;
};

// Merges repeated consecutive locations, then keeps the latest
// truncate_len tokens.
std::vector<LocationId> preprocess_sequence(std::span<const LocationId> history,
                                            const SequencePreprocessConfig& cfg);

struct TrainingExample {
    std::vector<LocationId> tokens;
    LocationId target = 0;
};

struct LstmDims {
    std::int32_t m = 0;  // vocabulary and output size
    int embed_dim = 32;
    int hidden_dim = 64;
};

// Sequence classifier: embedding, one LSTM layer, linear head. Parameters
// live in one flat vector (embedding, gate weights, gate bias, head weights,
// head bias in that order) so the optimizer, checkpointing and the
// finite-difference tests can treat the model uniformly.
class LstmClassifier {
public:
    LstmClassifier() = default;
    explicit LstmClassifier(const LstmDims& dims);

    const LstmDims& dims() const { return dims_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t n_params() const { return params_.size(); }

    // uniform(-1/sqrt(hidden_dim), +1/sqrt(hidden_dim))
    void init_params(Rng& rng);

    struct Cache {
        std::vector<LocationId> tokens;
        std::vector<double> h, c, i, f, g, o, tanh_c;  // T x hidden each
        std::vector<double> logits;
    };

    // Runs the recurrence from zero state and returns the logits; the cache
    // (when given) holds the activations needed by backward().
    std::vector<double> forward(std::span<const LocationId> tokens, Cache* cache = nullptr) const;

    // Accumulates parameter gradients for d(loss)/d(logits) into grads.
    void backward(const Cache& cache, std::span<const double> dlogits,
                  std::span<double> grads) const;

    // Parameter block offsets within the flat vector.
    std::size_t embed_offset() const { return 0; }
    std::size_t w_offset() const;
    std::size_t b_offset() const;
    std::size_t head_w_offset() const;
    std::size_t head_b_offset() const;

private:
    LstmDims dims_;
    std::vector<double> params_;
};

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

// Mean cross-entropy over the batch plus the full analytic gradient.
struct LossAndGrads {
    double loss = 0.0;
    std::vector<double> grads;
};
LossAndGrads loss_and_grads(const LstmClassifier& model,
                            std::span<const TrainingExample> batch);

struct EpochStats {
    double train_loss = 0.0;
    double validation_accuracy = 0.0;
};

struct TrainResult {
    LstmClassifier model;  // best validation checkpoint
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_validation_accuracy = 0.0;
};

// Adam training with seeded shuffling and early stopping on validation
// Accuracy@1. Single-threaded and deterministic for a fixed config.
TrainResult train_classifier(LstmClassifier model, std::span<const TrainingExample> train_set,
                             std::span<const TrainingExample> validation_set,
                             const TrainConfig& cfg);

struct Prediction {
    LocationId location = 0;
    std::vector<double> logits;
};
Prediction predict(const LstmClassifier& model, std::span<const LocationId> tokens);

LocationId argmax_smallest(std::span<const double> values);

double accuracy_of(const LstmClassifier& model, std::span<const TrainingExample> examples);

// Flat binary tensor container with a JSON header.
void save_checkpoint(const std::string& path, const LstmClassifier& model,
                     std::uint64_t seed);
LstmClassifier load_checkpoint(const std::string& path);

}  // namespace mobility
