#include "mobility/config.hpp"

#include "mobility/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mobility {
namespace {

std::string trim(std::string_view s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = trim(std::string_view(text).substr(pos, comma - pos));
        if (!item.empty()) out.push_back(item);
        if (comma == text.size()) break;
        pos = comma + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        " has no '=': " + stripped);
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        " has an empty key");
        if (!cfg.values_.emplace(key, value).second)
            throw std::invalid_argument("duplicate config key: " + key);
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) { return parse(read_file(path)); }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key " + key + " is not an integer: " + it->second);
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key " + key + " is not an unsigned integer: " +
                                    it->second);
    }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config key " + key + " is not a number: " + it->second);
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config key " + key + " is not a boolean: " + it->second);
}

std::vector<std::int32_t> KeyValueConfig::get_int_list(const std::string& key,
                                                       std::vector<std::int32_t> fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::int32_t> out;
    for (const std::string& item : split_list(it->second)) {
        try {
            out.push_back(std::stoi(item));
        } catch (...) {
            throw std::invalid_argument("config key " + key + " has a bad integer: " + item);
        }
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(
    const std::string& key, std::vector<std::string> fallback) const {
    consumed_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return split_list(it->second);
}

void KeyValueConfig::reject_unknown_keys() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (!consumed_.count(key)) {
            if (!unknown.empty()) unknown += ", ";
            unknown += key;
        }
    }
    if (!unknown.empty()) throw std::invalid_argument("unknown config keys: " + unknown);
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Markov: return "markov";
        case ModelKind::Lstm: return "lstm";
        case ModelKind::ForestSingle: return "forest_single";
        case ModelKind::FusionA: return "fusion_a";
        case ModelKind::FusionB: return "fusion_b";
        case ModelKind::FusionC: return "fusion_c";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "markov") return ModelKind::Markov;
    if (text == "lstm") return ModelKind::Lstm;
    if (text == "forest_single") return ModelKind::ForestSingle;
    if (text == "fusion_a") return ModelKind::FusionA;
    if (text == "fusion_b") return ModelKind::FusionB;
    if (text == "fusion_c") return ModelKind::FusionC;
    throw std::invalid_argument("unknown model: " + text);
}

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
    RunConfig cfg;

    cfg.world.n_users = static_cast<int>(kv.get_int("world.n_users", cfg.world.n_users));
    cfg.world.n_anchors_per_user =
        static_cast<int>(kv.get_int("world.n_anchors_per_user", cfg.world.n_anchors_per_user));
    cfg.world.sim_days = static_cast<int>(kv.get_int("world.sim_days", cfg.world.sim_days));
    cfg.world.record_cadence = kv.get_int("world.record_cadence", cfg.world.record_cadence);
    cfg.world.dwell_lognormal_mu =
        kv.get_double("world.dwell_lognormal_mu", cfg.world.dwell_lognormal_mu);
    cfg.world.dwell_lognormal_sigma =
        kv.get_double("world.dwell_lognormal_sigma", cfg.world.dwell_lognormal_sigma);
    cfg.world.dwell_sigma_user_jitter =
        kv.get_double("world.dwell_sigma_user_jitter", cfg.world.dwell_sigma_user_jitter);
    cfg.world.n_apps = static_cast<int>(kv.get_int("world.n_apps", cfg.world.n_apps));
    cfg.world.n_sensors = static_cast<int>(kv.get_int("world.n_sensors", cfg.world.n_sensors));
    cfg.world.n_broadcasts =
        static_cast<int>(kv.get_int("world.n_broadcasts", cfg.world.n_broadcasts));
    cfg.world.feature_signal_strength =
        kv.get_double("world.feature_signal_strength", cfg.world.feature_signal_strength);
    cfg.world.rng_seed = kv.get_u64("world.rng_seed", cfg.world.rng_seed);

    cfg.gaps.gap_rate = kv.get_double("gaps.rate", cfg.gaps.gap_rate);
    cfg.gaps.min_seconds = kv.get_int("gaps.min_seconds", cfg.gaps.min_seconds);
    cfg.gaps.max_seconds = kv.get_int("gaps.max_seconds", cfg.gaps.max_seconds);

    cfg.extract.gap_threshold = kv.get_int("extract.gap_threshold", cfg.extract.gap_threshold);
    cfg.extract.min_duration = kv.get_int("extract.min_duration", cfg.extract.min_duration);

    cfg.granularity.m_values = kv.get_int_list("granularity.m_values", cfg.granularity.m_values);
    cfg.granularity.kmeans_max_iters = static_cast<int>(
        kv.get_int("granularity.kmeans_max_iters", cfg.granularity.kmeans_max_iters));
    cfg.granularity.kmeans_tolerance =
        kv.get_double("granularity.kmeans_tolerance", cfg.granularity.kmeans_tolerance);
    cfg.granularity.kmeans_restarts = static_cast<int>(
        kv.get_int("granularity.kmeans_restarts", cfg.granularity.kmeans_restarts));
    cfg.transition_min_count =
        kv.get_int("granularity.transition_min_count", cfg.transition_min_count);

    cfg.query_n_per_traj =
        static_cast<int>(kv.get_int("query.n_per_trajectory", cfg.query_n_per_traj));
    cfg.query_min_frac = kv.get_double("query.min_fraction", cfg.query_min_frac);
    if (kv.has("query.criteria")) {
        cfg.criteria.clear();
        for (const std::string& item : kv.get_string_list("query.criteria", {}))
            cfg.criteria.push_back(TargetCriterion::parse(item));
    } else {
        kv.get_string("query.criteria", "");  // mark consumed
    }

    cfg.split.train = kv.get_double("split.train", cfg.split.train);
    cfg.split.validation = kv.get_double("split.validation", cfg.split.validation);
    cfg.split.test = kv.get_double("split.test", cfg.split.test);

    cfg.preprocess.truncate_len =
        static_cast<int>(kv.get_int("lstm.truncate_len", cfg.preprocess.truncate_len));
    cfg.lstm_dims.embed_dim =
        static_cast<int>(kv.get_int("lstm.embed_dim", cfg.lstm_dims.embed_dim));
    cfg.lstm_dims.hidden_dim =
        static_cast<int>(kv.get_int("lstm.hidden_dim", cfg.lstm_dims.hidden_dim));

    cfg.train.learning_rate = kv.get_double("train.learning_rate", cfg.train.learning_rate);
    cfg.train.beta1 = kv.get_double("train.adam_beta1", cfg.train.beta1);
    cfg.train.beta2 = kv.get_double("train.adam_beta2", cfg.train.beta2);
    cfg.train.epsilon = kv.get_double("train.adam_epsilon", cfg.train.epsilon);
    cfg.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", cfg.train.batch_size));
    cfg.train.max_epochs = static_cast<int>(kv.get_int("train.max_epochs", cfg.train.max_epochs));
    cfg.train.early_stop_patience = static_cast<int>(
        kv.get_int("train.early_stop_patience", cfg.train.early_stop_patience));

    std::vector<std::int32_t> hidden_default(cfg.dnn.hidden.begin(), cfg.dnn.hidden.end());
    const auto hidden = kv.get_int_list("fusion.dnn_hidden", hidden_default);
    cfg.dnn.hidden.assign(hidden.begin(), hidden.end());
    cfg.dnn.train = cfg.train;
    cfg.dnn.freeze_encoder_variant_a =
        kv.get_bool("fusion.freeze_encoder_variant_a", cfg.dnn.freeze_encoder_variant_a);
    cfg.fusion_variant =
        parse_fusion_variant(kv.get_string("fusion.variant", fusion_variant_name(cfg.fusion_variant)));

    cfg.forest.n_trees = static_cast<int>(kv.get_int("forest.n_trees", cfg.forest.n_trees));
    cfg.forest.max_depth = static_cast<int>(kv.get_int("forest.max_depth", cfg.forest.max_depth));
    cfg.forest.min_samples_leaf =
        static_cast<int>(kv.get_int("forest.min_samples_leaf", cfg.forest.min_samples_leaf));
    cfg.forest.features_per_split =
        static_cast<int>(kv.get_int("forest.features_per_split", cfg.forest.features_per_split));

    cfg.eval_exclude_m = kv.get_int_list("eval.exclude_m", cfg.eval_exclude_m);

    if (kv.has("sweep.models")) {
        cfg.sweep_models.clear();
        for (const std::string& item : kv.get_string_list("sweep.models", {}))
            cfg.sweep_models.push_back(parse_model_kind(item));
    } else {
        kv.get_string("sweep.models", "");
    }
    if (kv.has("sweep.groups")) {
        cfg.sweep_groups.clear();
        for (std::string item : kv.get_string_list("sweep.groups", {})) {
            // subsets join their groups with '+', e.g. "app+sensor"
            std::replace(item.begin(), item.end(), '+', ',');
            cfg.sweep_groups.push_back(FeatureGroupSet::parse(item));
        }
    } else {
        kv.get_string("sweep.groups", "");
    }

    kv.reject_unknown_keys();
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_kv(KeyValueConfig::load(path));
}

void RunConfig::validate() const {
    world.validate();
    gaps.validate();
    extract.validate();
    granularity.validate();
    split.validate();
    train.validate();
    forest.validate();
    if (query_n_per_traj < 1) throw std::invalid_argument("query.n_per_trajectory must be >= 1");
    if (query_min_frac < 0.0 || query_min_frac >= 0.5)
        throw std::invalid_argument("query.min_fraction must be in [0, 0.5)");
    if (criteria.empty()) throw std::invalid_argument("query.criteria must not be empty");
    if (preprocess.truncate_len < 1) throw std::invalid_argument("lstm.truncate_len must be >= 1");
    if (lstm_dims.embed_dim < 1 || lstm_dims.hidden_dim < 1)
        throw std::invalid_argument("lstm dims must be >= 1");
}

std::string RunConfig::echo() const {
    std::string out;
    const auto put = [&](const std::string& key, const std::string& value) {
        out += key + " = " + value + "\n";
    };
    put("world.n_users", std::to_string(world.n_users));
    put("world.n_anchors_per_user", std::to_string(world.n_anchors_per_user));
    put("world.sim_days", std::to_string(world.sim_days));
    put("world.record_cadence", std::to_string(world.record_cadence));
    put("world.dwell_lognormal_mu", format_double(world.dwell_lognormal_mu));
    put("world.dwell_lognormal_sigma", format_double(world.dwell_lognormal_sigma));
    put("world.dwell_sigma_user_jitter", format_double(world.dwell_sigma_user_jitter));
    put("world.n_apps", std::to_string(world.n_apps));
    put("world.n_sensors", std::to_string(world.n_sensors));
    put("world.n_broadcasts", std::to_string(world.n_broadcasts));
    put("world.feature_signal_strength", format_double(world.feature_signal_strength));
    put("world.rng_seed", std::to_string(world.rng_seed));
    put("gaps.rate", format_double(gaps.gap_rate));
    put("gaps.min_seconds", std::to_string(gaps.min_seconds));
    put("gaps.max_seconds", std::to_string(gaps.max_seconds));
    put("extract.gap_threshold", std::to_string(extract.gap_threshold));
    put("extract.min_duration", std::to_string(extract.min_duration));
    {
        std::string list;
        for (const std::int32_t m : granularity.m_values) {
            if (!list.empty()) list += ',';
            list += std::to_string(m);
        }
        put("granularity.m_values", list);
    }
    put("granularity.kmeans_max_iters", std::to_string(granularity.kmeans_max_iters));
    put("granularity.kmeans_tolerance", format_double(granularity.kmeans_tolerance));
    put("granularity.kmeans_restarts", std::to_string(granularity.kmeans_restarts));
    put("granularity.transition_min_count", std::to_string(transition_min_count));
    put("query.n_per_trajectory", std::to_string(query_n_per_traj));
    put("query.min_fraction", format_double(query_min_frac));
    {
        std::string list;
        for (const TargetCriterion& c : criteria) {
            if (!list.empty()) list += ',';
            list += c.label();
        }
        put("query.criteria", list);
    }
    put("split.train", format_double(split.train));
    put("split.validation", format_double(split.validation));
    put("split.test", format_double(split.test));
    put("lstm.truncate_len", std::to_string(preprocess.truncate_len));
    put("lstm.embed_dim", std::to_string(lstm_dims.embed_dim));
    put("lstm.hidden_dim", std::to_string(lstm_dims.hidden_dim));
    put("train.learning_rate", format_double(train.learning_rate));
    put("train.adam_beta1", format_double(train.beta1));
    put("train.adam_beta2", format_double(train.beta2));
    put("train.adam_epsilon", format_double(train.epsilon));
    put("train.batch_size", std::to_string(train.batch_size));
    put("train.max_epochs", std::to_string(train.max_epochs));
    put("train.early_stop_patience", std::to_string(train.early_stop_patience));
    {
        std::string list;
        for (const int h : dnn.hidden) {
            if (!list.empty()) list += ',';
            list += std::to_string(h);
        }
        put("fusion.dnn_hidden", list);
    }
    put("fusion.freeze_encoder_variant_a", dnn.freeze_encoder_variant_a ? "true" : "false");
    put("fusion.variant", fusion_variant_name(fusion_variant));
    put("forest.n_trees", std::to_string(forest.n_trees));
    put("forest.max_depth", std::to_string(forest.max_depth));
    put("forest.min_samples_leaf", std::to_string(forest.min_samples_leaf));
    put("forest.features_per_split", std::to_string(forest.features_per_split));
    {
        std::string list;
        for (const std::int32_t m : eval_exclude_m) {
            if (!list.empty()) list += ',';
            list += std::to_string(m);
        }
        put("eval.exclude_m", list);
    }
    {
        std::string list;
        for (const ModelKind kind : sweep_models) {
            if (!list.empty()) list += ',';
            list += model_kind_name(kind);
        }
        put("sweep.models", list);
    }
    {
        std::string list;
        for (const FeatureGroupSet& set : sweep_groups) {
            if (!list.empty()) list += ',';
            std::string item = set.label();
            std::replace(item.begin(), item.end(), ',', '+');
            list += item;
        }
        put("sweep.groups", list);
    }
    return out;
}

}  // namespace mobility
