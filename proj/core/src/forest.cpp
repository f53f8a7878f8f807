#include "mobility/forest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <stdexcept>

namespace mobility {
namespace {

// Split quality is the rational S = sum_k cl_k^2 / nl + sum_k cr_k^2 / nr;
// larger S means a larger Gini decrease within the node. Exact comparison
// avoids float ties that would make the split choice depend on sweep order.
struct SplitQuality {
    std::int64_t numer = -1;  // A_l * nr + A_r * nl
    std::int64_t denom = 1;   // nl * nr

    bool better_than(const SplitQuality& other) const {
        return static_cast<__int128>(numer) * other.denom >
               static_cast<__int128>(other.numer) * denom;
    }
    // Positive Gini decrease: S > A_parent / n.
    bool improves_on(std::int64_t parent_sq_sum, std::int64_t n) const {
        return static_cast<__int128>(numer) * n > static_cast<__int128>(parent_sq_sum) * denom;
    }
};

struct BestSplit {
    bool found = false;
    std::int32_t feature = -1;
    double threshold = 0.0;
    SplitQuality quality;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const LocationId> y, std::int32_t n_classes,
                const ForestConfig& cfg, Rng rng)
        : x_(x), y_(y), n_classes_(n_classes), cfg_(cfg), rng_(rng) {}

    CartTree build() {
        const std::size_t n = x_.rows();
        rows_.resize(n);
        if (cfg_.bootstrap) {
            for (auto& r : rows_) r = static_cast<std::uint32_t>(rng_.uniform_index(n));
        } else {
            for (std::size_t i = 0; i < n; ++i) rows_[i] = static_cast<std::uint32_t>(i);
        }
        tree_.nodes.clear();
        grow(0, n, 0);
        return std::move(tree_);
    }

private:
    std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
        const std::size_t n = end - begin;
        std::vector<std::int64_t> counts(n_classes_, 0);
        for (std::size_t i = begin; i < end; ++i) ++counts[y_[rows_[i]]];

        std::int64_t parent_sq = 0;
        int distinct_classes = 0;
        for (const std::int64_t c : counts) {
            parent_sq += c * c;
            if (c > 0) ++distinct_classes;
        }

        const bool depth_capped = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
        BestSplit best;
        if (distinct_classes > 1 && !depth_capped &&
            n >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
            best = find_split(begin, end, counts, parent_sq);

        const auto node_index = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        if (!best.found) {
            TreeNode& leaf = tree_.nodes[node_index];
            for (std::int32_t k = 0; k < n_classes_; ++k)
                if (counts[k] > 0) leaf.counts.emplace_back(k, counts[k]);
            return node_index;
        }

        const auto mid = std::partition(rows_.begin() + begin, rows_.begin() + end,
                                        [&](std::uint32_t r) {
                                            return x_(r, best.feature) < best.threshold;
                                        }) -
                         rows_.begin();
        const std::int32_t left = grow(begin, static_cast<std::size_t>(mid), depth + 1);
        const std::int32_t right = grow(static_cast<std::size_t>(mid), end, depth + 1);
        TreeNode& node = tree_.nodes[node_index];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        return node_index;
    }

    BestSplit find_split(std::size_t begin, std::size_t end,
                         const std::vector<std::int64_t>& parent_counts,
                         std::int64_t parent_sq) {
        const std::size_t n = end - begin;
        const std::int32_t d = static_cast<std::int32_t>(x_.cols());
        std::int32_t mtry = cfg_.features_per_split;
        if (mtry <= 0) mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(d))));
        mtry = std::min(mtry, d);

        // Distinct candidate features, scanned in ascending order so that
        // quality ties resolve to the lowest feature index.
        std::set<std::int32_t> candidates;
        if (mtry == d) {
            for (std::int32_t f = 0; f < d; ++f) candidates.insert(f);
        } else {
            for (std::int32_t j = d - mtry; j < d; ++j) {
                const auto t = static_cast<std::int32_t>(rng_.uniform_index(j + 1));
                candidates.insert(candidates.count(t) ? j : t);
            }
        }

        scratch_.assign(rows_.begin() + begin, rows_.begin() + end);
        std::vector<std::int64_t> left_counts(n_classes_);
        BestSplit best;

        for (const std::int32_t f : candidates) {
            std::sort(scratch_.begin(), scratch_.end(), [&](std::uint32_t a, std::uint32_t b) {
                return x_(a, f) < x_(b, f);
            });
            std::fill(left_counts.begin(), left_counts.end(), 0);
            std::int64_t sq_left = 0;
            std::int64_t sq_right = parent_sq;

            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                const std::int32_t k = y_[scratch_[pos]];
                sq_left += 2 * left_counts[k] + 1;
                sq_right += 1 - 2 * (parent_counts[k] - left_counts[k]);
                ++left_counts[k];

                const double v = x_(scratch_[pos], f);
                const double v_next = x_(scratch_[pos + 1], f);
                if (v == v_next) continue;

                const auto nl = static_cast<std::int64_t>(pos + 1);
                const auto nr = static_cast<std::int64_t>(n) - nl;
                if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;

                SplitQuality q{sq_left * nr + sq_right * nl, nl * nr};
                if (!q.improves_on(parent_sq, static_cast<std::int64_t>(n))) continue;
                if (!best.found || q.better_than(best.quality)) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = v + (v_next - v) / 2.0;
                    best.quality = q;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const LocationId> y_;
    std::int32_t n_classes_;
    const ForestConfig& cfg_;
    Rng rng_;
    CartTree tree_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::uint32_t> scratch_;
};

const TreeNode& descend(const CartTree& tree, std::span<const double> x) {
    std::int32_t idx = 0;
    for (;;) {
        const TreeNode& node = tree.nodes[idx];
        if (node.feature < 0) return node;
        idx = x[node.feature] < node.threshold ? node.left : node.right;
    }
}

}  // namespace

void ForestConfig::validate() const {
    if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
    if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
    if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (features_per_split < 0) throw std::invalid_argument("features_per_split must be >= 0");
}

ForestModel forest_fit(const Matrix& x, std::span<const LocationId> y, std::int32_t n_classes,
                       const ForestConfig& cfg, int jobs) {
    cfg.validate();
    if (x.rows() == 0 || x.rows() != y.size())
        throw std::invalid_argument("forest_fit: empty input or row/label mismatch");
    for (const double v : x.data())
        if (!std::isfinite(v)) throw std::invalid_argument("forest_fit: non-finite feature value");
    for (const LocationId label : y)
        if (label < 0 || label >= n_classes)
            throw std::out_of_range("forest_fit: label outside [0, n_classes)");

    ForestModel model;
    model.n_classes = n_classes;
    model.n_features = static_cast<std::int32_t>(x.cols());
    model.trees.resize(cfg.n_trees);

    const Rng root(cfg.rng_seed);
    auto build_one = [&](int t) {
        TreeBuilder builder(x, y, n_classes, cfg, root.derive(0x7265e5ULL, t));
        return builder.build();
    };

    if (jobs <= 1 || cfg.n_trees == 1) {
        for (int t = 0; t < cfg.n_trees; ++t) model.trees[t] = build_one(t);
    } else {
        std::vector<std::future<CartTree>> futures(cfg.n_trees);
        int in_flight = 0, next = 0, done = 0;
        // Bounded fan-out keeps peak memory flat for large forests.
        while (done < cfg.n_trees) {
            while (in_flight < jobs && next < cfg.n_trees) {
                futures[next] = std::async(std::launch::async, build_one, next);
                ++next;
                ++in_flight;
            }
            futures[done].wait();
            model.trees[done] = futures[done].get();
            ++done;
            --in_flight;
        }
    }
    return model;
}

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x) {
    if (static_cast<std::int32_t>(x.size()) != model.n_features)
        throw std::invalid_argument("forest_predict: feature dimension mismatch");
    for (const double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forest_predict: non-finite input");

    ForestPrediction pred;
    pred.probabilities.assign(model.n_classes, 0.0);
    for (const CartTree& tree : model.trees) {
        const TreeNode& leaf = descend(tree, x);
        std::int64_t total = 0;
        for (const auto& [k, c] : leaf.counts) total += c;
        for (const auto& [k, c] : leaf.counts)
            pred.probabilities[k] += static_cast<double>(c) / static_cast<double>(total);
    }
    for (double& p : pred.probabilities) p /= static_cast<double>(model.trees.size());
    std::size_t best = 0;
    for (std::size_t k = 1; k < pred.probabilities.size(); ++k)
        if (pred.probabilities[k] > pred.probabilities[best]) best = k;
    pred.label = static_cast<LocationId>(best);
    return pred;
}

std::string forest_to_json(const ForestModel& model) {
    nlohmann::json doc;
    doc["n_classes"] = model.n_classes;
    doc["n_features"] = model.n_features;
    auto& trees = doc["trees"] = nlohmann::json::array();
    for (const CartTree& tree : model.trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const TreeNode& node : tree.nodes) {
            if (node.feature < 0) {
                nlohmann::json counts = nlohmann::json::array();
                for (const auto& [k, c] : node.counts) counts.push_back({k, c});
                jt.push_back({{"counts", std::move(counts)}});
            } else {
                jt.push_back({{"f", node.feature},
                              {"t", node.threshold},
                              {"l", node.left},
                              {"r", node.right}});
            }
        }
        trees.push_back(std::move(jt));
    }
    return doc.dump();
}

ForestModel forest_from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    ForestModel model;
    model.n_classes = doc.at("n_classes").get<std::int32_t>();
    model.n_features = doc.at("n_features").get<std::int32_t>();
    for (const auto& jt : doc.at("trees")) {
        CartTree tree;
        for (const auto& jn : jt) {
            TreeNode node;
            if (jn.contains("counts")) {
                for (const auto& pair : jn.at("counts"))
                    node.counts.emplace_back(pair.at(0).get<std::int32_t>(),
                                             pair.at(1).get<std::int64_t>());
            } else {
                node.feature = jn.at("f").get<std::int32_t>();
                node.threshold = jn.at("t").get<double>();
                node.left = jn.at("l").get<std::int32_t>();
                node.right = jn.at("r").get<std::int32_t>();
            }
            tree.nodes.push_back(std::move(node));
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace mobility
