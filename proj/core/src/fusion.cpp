#include "mobility/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mobility {
namespace {

constexpr std::size_t kTimeOneHotWidth = 24 + 7 + 24 + 7;
constexpr std::size_t kTimeOrdinalWidth = 4;

void fill_time(std::span<double> dst, const TimeContext& time, bool one_hot) {
    if (one_hot) {
        std::fill(dst.begin(), dst.end(), 0.0);
        dst[time.begin_hour] = 1.0;
        dst[24 + time.begin_dow] = 1.0;
        dst[31 + time.end_hour] = 1.0;
        dst[55 + time.end_dow] = 1.0;
    } else {
        dst[0] = time.begin_hour;
        dst[1] = time.begin_dow;
        dst[2] = time.end_hour;
        dst[3] = time.end_dow;
    }
}

}  // namespace

FeatureGroupSet::FeatureGroupSet(std::initializer_list<FeatureGroup> groups) {
    for (const FeatureGroup g : groups) insert(g);
}

void FeatureGroupSet::insert(FeatureGroup g) {
    const auto it = std::lower_bound(groups_.begin(), groups_.end(), g);
    if (it == groups_.end() || *it != g) groups_.insert(it, g);
}

bool FeatureGroupSet::contains(FeatureGroup g) const {
    return std::binary_search(groups_.begin(), groups_.end(), g);
}

FeatureGroupSet FeatureGroupSet::all() {
    return {FeatureGroup::App, FeatureGroup::Sensor, FeatureGroup::Broadcast, FeatureGroup::Time};
}

FeatureGroupSet FeatureGroupSet::parse(const std::string& text) {
    FeatureGroupSet set;
    if (text.empty() || text == "none") return set;
    if (text == "all") return all();
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        if (item == "app")
            set.insert(FeatureGroup::App);
        else if (item == "sensor")
            set.insert(FeatureGroup::Sensor);
        else if (item == "broadcast")
            set.insert(FeatureGroup::Broadcast);
        else if (item == "time")
            set.insert(FeatureGroup::Time);
        else
            throw std::invalid_argument("unknown feature group: " + item);
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return set;
}

std::string FeatureGroupSet::label() const {
    if (groups_.empty()) return "none";
    static const char* names[] = {"app", "sensor", "broadcast", "time"};
    std::string out;
    for (const FeatureGroup g : groups_) {
        if (!out.empty()) out += ',';
        out += names[static_cast<int>(g)];
    }
    return out;
}

std::size_t FusionLayout::group_width(FeatureGroup g) const {
    switch (g) {
        case FeatureGroup::App: return dims.n_apps;
        case FeatureGroup::Sensor: return dims.n_sensors;
        case FeatureGroup::Broadcast: return dims.n_broadcasts;
        case FeatureGroup::Time: return one_hot_time ? kTimeOneHotWidth : kTimeOrdinalWidth;
    }
    return 0;
}

std::size_t FusionLayout::feature_width() const {
    std::size_t w = 0;
    for (const FeatureGroup g : groups.items()) w += group_width(g);
    return w;
}

std::size_t FusionLayout::group_offset(FeatureGroup g) const {
    std::size_t off = m;
    for (const FeatureGroup item : groups.items()) {
        if (item == g) return off;
        off += group_width(item);
    }
    throw std::out_of_range("group " + FeatureGroupSet{g}.label() + " not in layout");
}

void fill_fusion_row(std::span<double> row, const FusionLayout& layout,
                     std::span<const double> logits, const FeatureVector& features) {
    if (row.size() != layout.width() || logits.size() != static_cast<std::size_t>(layout.m))
        throw std::invalid_argument("fusion row width mismatch");
    std::copy(logits.begin(), logits.end(), row.begin());
    std::size_t off = layout.m;
    for (const FeatureGroup g : layout.groups.items()) {
        const std::size_t w = layout.group_width(g);
        switch (g) {
            case FeatureGroup::App:
                if (features.app.size() != w)
                    throw std::invalid_argument("app feature width mismatch: have " +
                                                std::to_string(features.app.size()));
                for (std::size_t i = 0; i < w; ++i) row[off + i] = features.app[i];
                break;
            case FeatureGroup::Sensor:
                if (features.sensor.size() != w)
                    throw std::invalid_argument("sensor feature width mismatch: have " +
                                                std::to_string(features.sensor.size()));
                std::copy(features.sensor.begin(), features.sensor.end(), row.begin() + off);
                break;
            case FeatureGroup::Broadcast:
                if (features.broadcast.size() != w)
                    throw std::invalid_argument("broadcast feature width mismatch: have " +
                                                std::to_string(features.broadcast.size()));
                for (std::size_t i = 0; i < w; ++i) row[off + i] = features.broadcast[i];
                break;
            case FeatureGroup::Time:
                fill_time(row.subspan(off, w), features.time, layout.one_hot_time);
                break;
        }
        off += w;
    }
}

Matrix build_fusion_inputs(const LstmClassifier& encoder,
                           std::span<const TrainingExample> examples,
                           std::span<const FeatureVector> features, const FusionLayout& layout) {
    if (examples.size() != features.size())
        throw std::invalid_argument("examples/features row count mismatch");
    Matrix design(examples.size(), layout.width());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto logits = encoder.forward(examples[i].tokens);
        fill_fusion_row(design.row(i), layout, logits, features[i]);
    }
    return design;
}

std::string fusion_variant_name(FusionVariant v) {
    switch (v) {
        case FusionVariant::DnnConcat: return "dnn_concat";
        case FusionVariant::DnnLogitFeature: return "dnn_logit_feature";
        case FusionVariant::ForestOverLogits: return "forest_over_logits";
    }
    return "?";
}

FusionVariant parse_fusion_variant(const std::string& text) {
    if (text == "dnn_concat" || text == "a") return FusionVariant::DnnConcat;
    if (text == "dnn_logit_feature" || text == "b") return FusionVariant::DnnLogitFeature;
    if (text == "forest_over_logits" || text == "c") return FusionVariant::ForestOverLogits;
    throw std::invalid_argument("unknown fusion variant: " + text);
}

Mlp::Mlp(std::size_t input_dim, std::span<const int> hidden, std::size_t output_dim) {
    layer_sizes_.push_back(input_dim);
    for (const int h : hidden) {
        if (h < 1) throw std::invalid_argument("hidden layer width must be >= 1");
        layer_sizes_.push_back(static_cast<std::size_t>(h));
    }
    layer_sizes_.push_back(output_dim);
    std::size_t total = 0;
    for (std::size_t l = 1; l < layer_sizes_.size(); ++l)
        total += layer_sizes_[l] * layer_sizes_[l - 1] + layer_sizes_[l];
    params_.assign(total, 0.0);
}

void Mlp::init_params(Rng& rng) {
    std::size_t off = 0;
    for (std::size_t l = 1; l < layer_sizes_.size(); ++l) {
        const std::size_t fan_in = layer_sizes_[l - 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        const std::size_t w_count = layer_sizes_[l] * fan_in;
        for (std::size_t i = 0; i < w_count; ++i) params_[off + i] = rng.uniform(-bound, bound);
        off += w_count + layer_sizes_[l];  // biases stay zero
    }
}

std::vector<double> Mlp::forward(std::span<const double> input, Cache* cache) const {
    if (input.size() != layer_sizes_.front())
        throw std::invalid_argument("mlp input width mismatch");
    std::vector<double> act(input.begin(), input.end());
    if (cache) {
        cache->activations.assign(1, act);
        cache->pre.clear();
    }

    std::size_t off = 0;
    for (std::size_t l = 1; l < layer_sizes_.size(); ++l) {
        const std::size_t in_dim = layer_sizes_[l - 1];
        const std::size_t out_dim = layer_sizes_[l];
        const double* w = params_.data() + off;
        const double* b = params_.data() + off + out_dim * in_dim;
        std::vector<double> next(out_dim);
        for (std::size_t r = 0; r < out_dim; ++r) {
            const double* wr = w + r * in_dim;
            double acc = b[r];
            for (std::size_t c = 0; c < in_dim; ++c) acc += wr[c] * act[c];
            next[r] = acc;
        }
        if (cache) cache->pre.push_back(next);
        const bool last = l + 1 == layer_sizes_.size();
        if (!last)
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        act = std::move(next);
        if (cache) cache->activations.push_back(act);
        off += out_dim * in_dim + out_dim;
    }
    return act;
}

void Mlp::backward(const Cache& cache, std::span<const double> doutput, std::span<double> grads,
                   std::span<double> dinput) const {
    if (grads.size() != params_.size()) throw std::invalid_argument("mlp grad buffer mismatch");
    const std::size_t n_layers = layer_sizes_.size() - 1;

    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += layer_sizes_[l + 1] * layer_sizes_[l] + layer_sizes_[l + 1];
    }

    std::vector<double> dz(doutput.begin(), doutput.end());
    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t in_dim = layer_sizes_[l];
        const std::size_t out_dim = layer_sizes_[l + 1];
        const double* w = params_.data() + offsets[l];
        double* dw = grads.data() + offsets[l];
        double* db = grads.data() + offsets[l] + out_dim * in_dim;
        const auto& a_prev = cache.activations[l];

        std::vector<double> da_prev(in_dim, 0.0);
        for (std::size_t r = 0; r < out_dim; ++r) {
            const double dz_r = dz[r];
            db[r] += dz_r;
            double* dwr = dw + r * in_dim;
            const double* wr = w + r * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c) {
                dwr[c] += dz_r * a_prev[c];
                da_prev[c] += dz_r * wr[c];
            }
        }
        if (l == 0) {
            if (!dinput.empty())
                std::copy(da_prev.begin(), da_prev.end(), dinput.begin());
        } else {
            const auto& pre_prev = cache.pre[l - 1];
            dz.assign(in_dim, 0.0);
            for (std::size_t c = 0; c < in_dim; ++c)
                dz[c] = pre_prev[c] > 0.0 ? da_prev[c] : 0.0;
        }
    }
}

JointLossResult joint_loss_and_grads(const LstmClassifier& encoder, const Mlp& mlp,
                                     const FusionLayout& layout,
                                     std::span<const TrainingExample> batch,
                                     std::span<const FeatureVector> features,
                                     std::span<const std::size_t> batch_indices) {
    JointLossResult result;
    result.encoder_grads.assign(encoder.n_params(), 0.0);
    result.mlp_grads.assign(mlp.n_params(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch_indices.size());

    LstmClassifier::Cache enc_cache;
    Mlp::Cache mlp_cache;
    std::vector<double> row(layout.width());
    std::vector<double> dinput(layout.width());

    for (const std::size_t idx : batch_indices) {
        const TrainingExample& ex = batch[idx];
        const auto logits = encoder.forward(ex.tokens, &enc_cache);
        fill_fusion_row(row, layout, logits, features[idx]);
        const auto out = mlp.forward(row, &mlp_cache);

        auto probs = softmax(out);
        result.loss -= std::log(std::max(probs[ex.target], 1e-300)) * inv_n;
        std::vector<double> dout = std::move(probs);
        dout[ex.target] -= 1.0;
        for (double& d : dout) d *= inv_n;

        mlp.backward(mlp_cache, dout, result.mlp_grads, dinput);
        encoder.backward(enc_cache, std::span<const double>(dinput.data(), layout.m),
                         result.encoder_grads);
    }
    return result;
}

namespace {

double joint_accuracy(const LstmClassifier& encoder, const Mlp& mlp, const FusionLayout& layout,
                      std::span<const TrainingExample> examples,
                      std::span<const FeatureVector> features) {
    if (examples.empty()) return 0.0;
    std::vector<double> row(layout.width());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        fill_fusion_row(row, layout, encoder.forward(examples[i].tokens), features[i]);
        if (argmax_smallest(mlp.forward(row)) == examples[i].target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

// Shared epoch loop for the two DNN variants: variant A updates the encoder,
// variant B treats it as a fixed featurizer.
void train_dnn(LstmClassifier& encoder, Mlp& mlp, bool update_encoder,
               const FusionLayout& layout, std::span<const TrainingExample> train_examples,
               std::span<const FeatureVector> train_features,
               std::span<const TrainingExample> validation_examples,
               std::span<const FeatureVector> validation_features, const TrainConfig& cfg) {
    cfg.validate();
    if (train_examples.empty()) throw std::invalid_argument("fusion_fit: empty training set");

    AdamOptimizer enc_opt(encoder.n_params(), cfg);
    AdamOptimizer mlp_opt(mlp.n_params(), cfg);
    Rng rng(cfg.rng_seed);
    std::vector<std::size_t> order(train_examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    LstmClassifier best_encoder = encoder;
    Mlp best_mlp = mlp;
    double best_acc = -1.0;
    int stale = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            auto lg = joint_loss_and_grads(encoder, mlp, layout, train_examples, train_features,
                                           idx);
            if (update_encoder) enc_opt.step(encoder.params(), lg.encoder_grads);
            mlp_opt.step(mlp.params(), lg.mlp_grads);
        }
        const double val_acc =
            joint_accuracy(encoder, mlp, layout, validation_examples, validation_features);
        if (val_acc > best_acc) {
            best_acc = val_acc;
            best_encoder = encoder;
            best_mlp = mlp;
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            break;
        }
    }
    encoder = std::move(best_encoder);
    mlp = std::move(best_mlp);
}

}  // namespace

FusedModel fusion_fit(FusionVariant variant, const LstmClassifier& encoder,
                      std::span<const TrainingExample> train_examples,
                      std::span<const FeatureVector> train_features,
                      std::span<const TrainingExample> validation_examples,
                      std::span<const FeatureVector> validation_features,
                      const FeatureGroupSet& groups, const FeatureDimensions& dims,
                      const DnnConfig& dnn_cfg, const ForestConfig& forest_cfg, int jobs) {
    FusedModel model;
    model.variant = variant;
    model.encoder = encoder;
    model.layout = {encoder.dims().m, dims, groups,
                    variant != FusionVariant::ForestOverLogits};

    switch (variant) {
        case FusionVariant::DnnConcat:
        case FusionVariant::DnnLogitFeature: {
            model.mlp = Mlp(model.layout.width(), dnn_cfg.hidden, encoder.dims().m);
            Rng init_rng(dnn_cfg.train.rng_seed);
            model.mlp.init_params(init_rng);
            const bool update_encoder = variant == FusionVariant::DnnConcat &&
                                        !dnn_cfg.freeze_encoder_variant_a;
            train_dnn(model.encoder, model.mlp, update_encoder, model.layout, train_examples,
                      train_features, validation_examples, validation_features, dnn_cfg.train);
            break;
        }
        case FusionVariant::ForestOverLogits: {
            const Matrix design =
                build_fusion_inputs(model.encoder, train_examples, train_features, model.layout);
            std::vector<LocationId> labels(train_examples.size());
            for (std::size_t i = 0; i < train_examples.size(); ++i)
                labels[i] = train_examples[i].target;
            model.forest =
                forest_fit(design, labels, encoder.dims().m, forest_cfg, jobs);
            break;
        }
    }
    return model;
}

LocationId fused_predict(const FusedModel& model, const TrainingExample& example,
                         const FeatureVector& features) {
    std::vector<double> row(model.layout.width());
    fill_fusion_row(row, model.layout, model.encoder.forward(example.tokens), features);
    if (model.variant == FusionVariant::ForestOverLogits)
        return forest_predict(model.forest, row).label;
    return argmax_smallest(model.mlp.forward(row));
}

double fused_accuracy(const FusedModel& model, std::span<const TrainingExample> examples,
                      std::span<const FeatureVector> features) {
    if (examples.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (fused_predict(model, examples[i], features[i]) == examples[i].target) ++hits;
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::optional<double> relative_performance(double fused_accuracy, double lstm_accuracy) {
    if (lstm_accuracy <= 0.0) return std::nullopt;
    return fused_accuracy / lstm_accuracy;
}

}  // namespace mobility
