#include "mobility/lstm.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mobility {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<LocationId> preprocess_sequence(std::span<const LocationId> history,
                                            const SequencePreprocessConfig& cfg) {
    if (history.empty()) throw std::invalid_argument("preprocess_sequence: empty history");
    if (cfg.truncate_len < 1) throw std::invalid_argument("truncate_len must be >= 1");
    std::vector<LocationId> dedup;
    dedup.reserve(history.size());
    for (const LocationId loc : history)
        if (dedup.empty() || dedup.back() != loc) dedup.push_back(loc);
    const std::size_t keep = std::min<std::size_t>(dedup.size(), cfg.truncate_len);
    return {dedup.end() - keep, dedup.end()};
}

LstmClassifier::LstmClassifier(const LstmDims& dims) : dims_(dims) {
    if (dims.m < 1 || dims.embed_dim < 1 || dims.hidden_dim < 1)
        throw std::invalid_argument("lstm dims must be positive");
    const std::size_t m = dims.m, e = dims.embed_dim, h = dims.hidden_dim;
    params_.assign(m * e + 4 * h * (e + h) + 4 * h + m * h + m, 0.0);
}

std::size_t LstmClassifier::w_offset() const {
    return static_cast<std::size_t>(dims_.m) * dims_.embed_dim;
}
std::size_t LstmClassifier::b_offset() const {
    return w_offset() + 4ul * dims_.hidden_dim * (dims_.embed_dim + dims_.hidden_dim);
}
std::size_t LstmClassifier::head_w_offset() const { return b_offset() + 4ul * dims_.hidden_dim; }
std::size_t LstmClassifier::head_b_offset() const {
    return head_w_offset() + static_cast<std::size_t>(dims_.m) * dims_.hidden_dim;
}

void LstmClassifier::init_params(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_.hidden_dim));
    for (double& p : params_) p = rng.uniform(-bound, bound);
}

std::vector<double> LstmClassifier::forward(std::span<const LocationId> tokens,
                                            Cache* cache) const {
    if (tokens.empty()) throw std::invalid_argument("lstm forward: empty token sequence");
    const std::size_t m = dims_.m, e = dims_.embed_dim, h = dims_.hidden_dim;
    const std::size_t zin_dim = e + h;
    const double* embed = params_.data();
    const double* w = params_.data() + w_offset();
    const double* b = params_.data() + b_offset();
    const double* head_w = params_.data() + head_w_offset();
    const double* head_b = params_.data() + head_b_offset();
    const std::size_t T = tokens.size();

    if (cache) {
        cache->tokens.assign(tokens.begin(), tokens.end());
        for (auto* v : {&cache->h, &cache->c, &cache->i, &cache->f, &cache->g, &cache->o,
                        &cache->tanh_c})
            v->assign(T * h, 0.0);
    }

    std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0), h_cur(h), c_cur(h);
    std::vector<double> zin(zin_dim), gates(4 * h);

    for (std::size_t t = 0; t < T; ++t) {
        const LocationId tok = tokens[t];
        if (tok < 0 || tok >= dims_.m)
            throw std::out_of_range("token " + std::to_string(tok) + " outside vocabulary m=" +
                                    std::to_string(dims_.m));
        std::memcpy(zin.data(), embed + static_cast<std::size_t>(tok) * e, e * sizeof(double));
        std::memcpy(zin.data() + e, h_prev.data(), h * sizeof(double));

        for (std::size_t r = 0; r < 4 * h; ++r) {
            const double* wr = w + r * zin_dim;
            double acc = b[r];
            for (std::size_t c = 0; c < zin_dim; ++c) acc += wr[c] * zin[c];
            gates[r] = acc;
        }
        for (std::size_t j = 0; j < h; ++j) {
            const double gi = sigmoid(gates[j]);
            const double gf = sigmoid(gates[h + j]);
            const double gg = std::tanh(gates[2 * h + j]);
            const double go = sigmoid(gates[3 * h + j]);
            const double cc = gf * c_prev[j] + gi * gg;
            const double tc = std::tanh(cc);
            c_cur[j] = cc;
            h_cur[j] = go * tc;
            if (cache) {
                cache->i[t * h + j] = gi;
                cache->f[t * h + j] = gf;
                cache->g[t * h + j] = gg;
                cache->o[t * h + j] = go;
                cache->c[t * h + j] = cc;
                cache->tanh_c[t * h + j] = tc;
                cache->h[t * h + j] = h_cur[j];
            }
        }
        std::swap(h_prev, h_cur);
        std::swap(c_prev, c_cur);
    }

    std::vector<double> logits(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double* uk = head_w + k * h;
        double acc = head_b[k];
        for (std::size_t j = 0; j < h; ++j) acc += uk[j] * h_prev[j];
        logits[k] = acc;
    }
    if (cache) cache->logits = logits;
    return logits;
}

void LstmClassifier::backward(const Cache& cache, std::span<const double> dlogits,
                              std::span<double> grads) const {
    const std::size_t m = dims_.m, e = dims_.embed_dim, h = dims_.hidden_dim;
    const std::size_t zin_dim = e + h;
    const std::size_t T = cache.tokens.size();
    if (grads.size() != params_.size())
        throw std::invalid_argument("gradient buffer size mismatch");

    const double* embed = params_.data();
    const double* w = params_.data() + w_offset();
    const double* head_w = params_.data() + head_w_offset();
    double* d_embed = grads.data();
    double* d_w = grads.data() + w_offset();
    double* d_b = grads.data() + b_offset();
    double* d_head_w = grads.data() + head_w_offset();
    double* d_head_b = grads.data() + head_b_offset();

    const double* h_last = cache.h.data() + (T - 1) * h;
    std::vector<double> dh(h, 0.0), dc(h, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double dl = dlogits[k];
        d_head_b[k] += dl;
        double* duk = d_head_w + k * h;
        const double* uk = head_w + k * h;
        for (std::size_t j = 0; j < h; ++j) {
            duk[j] += dl * h_last[j];
            dh[j] += dl * uk[j];
        }
    }

    std::vector<double> da(4 * h), zin(zin_dim), dzin(zin_dim);
    for (std::size_t t = T; t-- > 0;) {
        const double* it = cache.i.data() + t * h;
        const double* ft = cache.f.data() + t * h;
        const double* gt = cache.g.data() + t * h;
        const double* ot = cache.o.data() + t * h;
        const double* tct = cache.tanh_c.data() + t * h;
        const double* c_prev = t == 0 ? nullptr : cache.c.data() + (t - 1) * h;

        for (std::size_t j = 0; j < h; ++j) {
            const double do_j = dh[j] * tct[j];
            const double dc_j = dc[j] + dh[j] * ot[j] * (1.0 - tct[j] * tct[j]);
            const double cprev_j = c_prev ? c_prev[j] : 0.0;
            const double di_j = dc_j * gt[j];
            const double df_j = dc_j * cprev_j;
            const double dg_j = dc_j * it[j];
            da[j] = di_j * it[j] * (1.0 - it[j]);
            da[h + j] = df_j * ft[j] * (1.0 - ft[j]);
            da[2 * h + j] = dg_j * (1.0 - gt[j] * gt[j]);
            da[3 * h + j] = do_j * ot[j] * (1.0 - ot[j]);
            dc[j] = dc_j * ft[j];  // becomes dc_prev
        }

        const LocationId tok = cache.tokens[t];
        std::memcpy(zin.data(), embed + static_cast<std::size_t>(tok) * e, e * sizeof(double));
        if (t == 0)
            std::memset(zin.data() + e, 0, h * sizeof(double));
        else
            std::memcpy(zin.data() + e, cache.h.data() + (t - 1) * h, h * sizeof(double));

        std::fill(dzin.begin(), dzin.end(), 0.0);
        for (std::size_t r = 0; r < 4 * h; ++r) {
            const double dar = da[r];
            d_b[r] += dar;
            double* dwr = d_w + r * zin_dim;
            const double* wr = w + r * zin_dim;
            for (std::size_t c = 0; c < zin_dim; ++c) {
                dwr[c] += dar * zin[c];
                dzin[c] += dar * wr[c];
            }
        }

        double* de = d_embed + static_cast<std::size_t>(tok) * e;
        for (std::size_t c = 0; c < e; ++c) de[c] += dzin[c];
        for (std::size_t j = 0; j < h; ++j) dh[j] = dzin[e + j];
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

LossAndGrads loss_and_grads(const LstmClassifier& model,
                            std::span<const TrainingExample> batch) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    LossAndGrads result;
    result.grads.assign(model.n_params(), 0.0);
    LstmClassifier::Cache cache;
    std::vector<double> dlogits;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const TrainingExample& ex : batch) {
        if (ex.target < 0 || ex.target >= model.dims().m)
            throw std::out_of_range("target outside vocabulary");
        const auto logits = model.forward(ex.tokens, &cache);
        auto probs = softmax(logits);
        result.loss -= std::log(std::max(probs[ex.target], 1e-300)) * inv_n;
        dlogits = std::move(probs);
        dlogits[ex.target] -= 1.0;
        for (double& d : dlogits) d *= inv_n;
        model.backward(cache, dlogits, result.grads);
    }
    return result;
}

LocationId argmax_smallest(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return static_cast<LocationId>(best);
}

Prediction predict(const LstmClassifier& model, std::span<const LocationId> tokens) {
    Prediction p;
    p.logits = model.forward(tokens);
    p.location = argmax_smallest(p.logits);
    return p;
}

double accuracy_of(const LstmClassifier& model, std::span<const TrainingExample> examples) {
    if (examples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const TrainingExample& ex : examples)
        if (predict(model, ex.tokens).location == ex.target) ++hits;
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

TrainResult train_classifier(LstmClassifier model, std::span<const TrainingExample> train_set,
                             std::span<const TrainingExample> validation_set,
                             const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train_classifier: empty training set");

    AdamOptimizer opt(model.n_params(), cfg);
    Rng rng(cfg.rng_seed);
    std::vector<std::uint32_t> order(train_set.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    result.model = model;
    int stale = 0;
    std::vector<TrainingExample> batch;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
            auto lg = loss_and_grads(model, batch);
            opt.step(model.params(), lg.grads);
            loss_sum += lg.loss;
            ++n_batches;
        }

        const double val_acc = accuracy_of(model, validation_set);
        result.history.push_back({loss_sum / static_cast<double>(n_batches), val_acc});

        if (val_acc > result.best_validation_accuracy || result.best_epoch < 0) {
            result.best_validation_accuracy = val_acc;
            result.best_epoch = epoch;
            result.model = model;
            stale = 0;
        } else if (++stale >= cfg.early_stop_patience) {
            break;
        }
    }
    return result;
}

void save_checkpoint(const std::string& path, const LstmClassifier& model, std::uint64_t seed) {
    const auto& d = model.dims();
    nlohmann::json header;
    header["format"] = 1;
    header["meta"] = {{"m", d.m},
                      {"embed_dim", d.embed_dim},
                      {"hidden_dim", d.hidden_dim},
                      {"seed", seed}};
    header["tensors"] = nlohmann::json::array(
        {{{"name", "embedding"}, {"shape", {d.m, d.embed_dim}}},
         {{"name", "gate_weights"}, {"shape", {4 * d.hidden_dim, d.embed_dim + d.hidden_dim}}},
         {{"name", "gate_bias"}, {"shape", {4 * d.hidden_dim}}},
         {{"name", "head_weights"}, {"shape", {d.m, d.hidden_dim}}},
         {{"name", "head_bias"}, {"shape", {d.m}}}});
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const char magic[4] = {'M', 'T', 'E', 'N'};
    out.write(magic, 4);
    const auto len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(model.params().data()),
              static_cast<std::streamsize>(model.params().size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

LstmClassifier load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MTEN", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string head(len, '\0');
    in.read(head.data(), len);
    const auto header = nlohmann::json::parse(head);

    LstmDims dims;
    dims.m = header.at("meta").at("m").get<std::int32_t>();
    dims.embed_dim = header.at("meta").at("embed_dim").get<int>();
    dims.hidden_dim = header.at("meta").at("hidden_dim").get<int>();
    LstmClassifier model(dims);
    in.read(reinterpret_cast<char*>(model.params().data()),
            static_cast<std::streamsize>(model.params().size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return model;
}

}  // namespace mobility
