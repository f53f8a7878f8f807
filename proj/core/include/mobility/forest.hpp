#pragma once

#include "mobility/matrix.hpp"
#include "mobility/rng.hpp"
#include "mobility/trajectory.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobility {

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 0;           // 0 = unlimited
    int min_samples_leaf = 1;
    int features_per_split = 0;  // 0 = round(sqrt(feature count))
    bool bootstrap = true;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

// Axis-aligned threshold splits; rows with x[feature] < threshold go left.
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    // Leaf class counts, sparse. Most leaves are pure.
    std::vector<std::pair<std::int32_t, std::int64_t>> counts;
};

struct CartTree {
    std::vector<TreeNode> nodes;  // node 0 is the root
};

struct ForestModel {
    std::int32_t n_classes = 0;
    std::int32_t n_features = 0;
    std::vector<CartTree> trees;
};

// Bagged CART trees grown on Gini impurity decrease. Split quality is
// compared in exact integer arithmetic, so tie-breaking (lowest feature,
// then lowest threshold) is reproducible and independent of evaluation
// order. Trees train in parallel from per-tree sub-seeds when jobs > 1.
ForestModel forest_fit(const Matrix& x, std::span<const LocationId> y, std::int32_t n_classes,
                       const ForestConfig& cfg, int jobs = 1);

struct ForestPrediction {
    LocationId label = 0;
    std::vector<double> probabilities;  // mean of per-tree leaf distributions
};
ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x);

std::string forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const std::string& text);

}  // namespace mobility
