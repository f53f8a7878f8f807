#include "mobility/experiment.hpp"

#include "mobility/io.hpp"

#include <algorithm>
#include <stdexcept>

namespace mobility {

std::uint64_t TrainingAudit::id_hash(std::uint32_t query_id) {
    return Rng::mix(0x9d1dULL, query_id);
}

void TrainingAudit::record_training(const std::string& cell,
                                    std::span<const std::uint32_t> query_ids) {
    Entry entry{cell, true, {}};
    entry.id_hashes.reserve(query_ids.size());
    for (const std::uint32_t id : query_ids) entry.id_hashes.push_back(id_hash(id));
    std::sort(entry.id_hashes.begin(), entry.id_hashes.end());
    const std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

void TrainingAudit::record_evaluation(const std::string& cell,
                                      std::span<const std::uint32_t> query_ids) {
    Entry entry{cell, false, {}};
    entry.id_hashes.reserve(query_ids.size());
    for (const std::uint32_t id : query_ids) entry.id_hashes.push_back(id_hash(id));
    std::sort(entry.id_hashes.begin(), entry.id_hashes.end());
    const std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

void TrainingAudit::assert_no_leakage() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    for (const Entry& eval : entries_) {
        if (eval.training) continue;
        for (const Entry& train : entries_) {
            if (!train.training || train.cell != eval.cell) continue;
            std::vector<std::uint64_t> overlap;
            std::set_intersection(eval.id_hashes.begin(), eval.id_hashes.end(),
                                  train.id_hashes.begin(), train.id_hashes.end(),
                                  std::back_inserter(overlap));
            if (!overlap.empty())
                throw std::logic_error("leakage: cell " + eval.cell + " evaluated " +
                                       std::to_string(overlap.size()) +
                                       " query ids that appeared in its training inputs");
        }
    }
}

std::size_t TrainingAudit::n_entries() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

FeatureCache::FeatureCache(const QueryDataset& dataset, const UsageEventIndex& events,
                           const FeatureDimensions& dims)
    : dims_(dims) {
    features_.reserve(dataset.queries.size());
    for (const Query& q : dataset.queries)
        features_.push_back(extract_features(dataset, q, events, dims));
}

std::vector<std::uint32_t> ScenarioData::row_query_ids(std::span<const std::size_t> rows) const {
    std::vector<std::uint32_t> out;
    out.reserve(rows.size());
    for (const std::size_t r : rows) out.push_back(query_ids[r]);
    return out;
}

double ScenarioData::mean_test_target_stay() const {
    if (test_rows.empty()) return 0.0;
    double sum = 0.0;
    for (const std::size_t r : test_rows) sum += static_cast<double>(target_stays[r]);
    return sum / static_cast<double>(test_rows.size());
}

ScenarioData build_scenario_data(const ExperimentContext& ctx, const TargetCriterion& criterion,
                                 std::int32_t m) {
    ScenarioData data;
    data.m = m;
    data.criterion = criterion;

    const auto& rows = ctx.labeled.cell(criterion, m);
    data.query_ids.reserve(rows.size());
    data.examples.reserve(rows.size());
    data.target_stays.reserve(rows.size());

    std::vector<LocationId> raw;
    for (const LabeledQuery& lq : rows) {
        const Query& q = ctx.dataset.queries[lq.query_index];
        const auto history = ctx.dataset.history(q);
        raw.clear();
        raw.reserve(history.size());
        for (const LocationRecord& rec : history) raw.push_back(rec.id_at(m));

        TrainingExample ex;
        ex.tokens = preprocess_sequence(raw, ctx.cfg.preprocess);
        ex.target = lq.target;
        const std::size_t row = data.examples.size();
        data.examples.push_back(std::move(ex));
        data.query_ids.push_back(lq.query_index);
        data.target_stays.push_back(lq.target_stay_seconds);

        switch (ctx.split.query_partition(ctx.dataset, lq.query_index)) {
            case Partition::Train: data.train_rows.push_back(row); break;
            case Partition::Validation: data.validation_rows.push_back(row); break;
            case Partition::Test: data.test_rows.push_back(row); break;
        }
    }
    return data;
}

std::string cell_name(std::int32_t m, const TargetCriterion& criterion, ModelKind model,
                      const FeatureGroupSet& groups) {
    std::string name = model_kind_name(model) + "_m" + std::to_string(m) + "_" + criterion.name();
    if (criterion.kind != CriterionKind::Successive) name += std::to_string(criterion.k);
    if (model == ModelKind::ForestSingle || model == ModelKind::FusionA ||
        model == ModelKind::FusionB || model == ModelKind::FusionC) {
        std::string g = groups.label();
        std::replace(g.begin(), g.end(), ',', '+');
        name += "_" + g;
    }
    return name;
}

std::uint64_t cell_seed(std::uint64_t root_seed, const std::string& cell) {
    return Rng::mix(root_seed, content_hash(cell));
}

namespace {

ScenarioResult make_result(const ScenarioData& data, const std::string& model_name,
                           const std::string& groups, double accuracy) {
    ScenarioResult res;
    res.m = data.m;
    res.criterion = data.criterion;
    res.model_name = model_name;
    res.groups = groups;
    res.accuracy = accuracy;
    res.n_test = data.test_rows.size();
    res.mean_target_stay_seconds = data.mean_test_target_stay();
    return res;
}

void audit_cell(const ExperimentContext& ctx, const ScenarioData& data, const std::string& cell) {
    if (!ctx.audit) return;
    const auto train_ids = data.row_query_ids(data.train_rows);
    const auto val_ids = data.row_query_ids(data.validation_rows);
    const auto test_ids = data.row_query_ids(data.test_rows);
    ctx.audit->record_training(cell, train_ids);
    ctx.audit->record_training(cell, val_ids);  // validation steers early stopping
    ctx.audit->record_evaluation(cell, test_ids);
}

std::vector<TrainingExample> gather(const std::vector<TrainingExample>& examples,
                                    std::span<const std::size_t> rows) {
    std::vector<TrainingExample> out;
    out.reserve(rows.size());
    for (const std::size_t r : rows) out.push_back(examples[r]);
    return out;
}

std::vector<FeatureVector> gather_features(const ExperimentContext& ctx,
                                           const ScenarioData& data,
                                           std::span<const std::size_t> rows) {
    if (!ctx.features)
        throw std::logic_error("scenario needs feature vectors but no FeatureCache was provided");
    std::vector<FeatureVector> out;
    out.reserve(rows.size());
    for (const std::size_t r : rows) out.push_back(ctx.features->get(data.query_ids[r]));
    return out;
}

}  // namespace

MarkovOutcome run_markov_scenario(const ExperimentContext& ctx, const ScenarioData& data) {
    const std::string cell =
        cell_name(data.m, data.criterion, ModelKind::Markov, FeatureGroupSet{});
    audit_cell(ctx, data, cell);

    MarkovOutcome outcome;
    outcome.model = markov_init(data.m);
    for (const std::size_t r : data.train_rows)
        markov_add_history(outcome.model, data.examples[r].tokens);

    std::vector<LocationId> predictions, labels;
    predictions.reserve(data.test_rows.size());
    for (const std::size_t r : data.test_rows) {
        const LocationId current = data.examples[r].tokens.back();
        predictions.push_back(markov_predict(outcome.model, current));
        labels.push_back(data.examples[r].target);
    }
    const double acc = predictions.empty() ? 0.0 : accuracy_at_1(predictions, labels);
    outcome.result = make_result(data, "markov", "none", acc);
    return outcome;
}

LstmOutcome run_lstm_scenario(const ExperimentContext& ctx, const ScenarioData& data) {
    const std::string cell = cell_name(data.m, data.criterion, ModelKind::Lstm, FeatureGroupSet{});
    audit_cell(ctx, data, cell);

    LstmDims dims = ctx.cfg.lstm_dims;
    dims.m = data.m;
    LstmClassifier model(dims);
    TrainConfig train_cfg = ctx.cfg.train;
    train_cfg.rng_seed = cell_seed(ctx.cfg.world.rng_seed, cell);
    Rng init_rng(train_cfg.rng_seed);
    model.init_params(init_rng);

    const auto train_examples = gather(data.examples, data.train_rows);
    const auto val_examples = gather(data.examples, data.validation_rows);

    LstmOutcome outcome;
    outcome.train_info = train_classifier(std::move(model), train_examples, val_examples,
                                          train_cfg);
    outcome.model = outcome.train_info.model;

    const auto test_examples = gather(data.examples, data.test_rows);
    const double acc = accuracy_of(outcome.model, test_examples);
    outcome.result = make_result(data, "lstm", "none", acc);
    return outcome;
}

ForestSingleOutcome run_forest_single_scenario(const ExperimentContext& ctx,
                                               const ScenarioData& data,
                                               const FeatureGroupSet& groups, int jobs) {
    if (groups.empty())
        throw std::invalid_argument("forest_single needs at least one feature group");
    const std::string cell = cell_name(data.m, data.criterion, ModelKind::ForestSingle, groups);
    audit_cell(ctx, data, cell);

    // Features only, ordinal time; no logits block (m = 0).
    FusionLayout layout{0, ctx.features->dims(), groups, false};
    const auto build_design = [&](std::span<const std::size_t> rows) {
        Matrix design(rows.size(), layout.width());
        for (std::size_t i = 0; i < rows.size(); ++i)
            fill_fusion_row(design.row(i), layout, {},
                            ctx.features->get(data.query_ids[rows[i]]));
        return design;
    };

    const Matrix train_design = build_design(data.train_rows);
    std::vector<LocationId> train_labels;
    train_labels.reserve(data.train_rows.size());
    for (const std::size_t r : data.train_rows) train_labels.push_back(data.examples[r].target);

    ForestConfig forest_cfg = ctx.cfg.forest;
    forest_cfg.rng_seed = cell_seed(ctx.cfg.world.rng_seed, cell);

    ForestSingleOutcome outcome;
    outcome.model = forest_fit(train_design, train_labels, data.m, forest_cfg, jobs);

    const Matrix test_design = build_design(data.test_rows);
    std::vector<LocationId> predictions, labels;
    for (std::size_t i = 0; i < data.test_rows.size(); ++i) {
        predictions.push_back(forest_predict(outcome.model, test_design.row(i)).label);
        labels.push_back(data.examples[data.test_rows[i]].target);
    }
    const double acc = predictions.empty() ? 0.0 : accuracy_at_1(predictions, labels);
    outcome.result = make_result(data, "forest_single", groups.label(), acc);
    return outcome;
}

FusionOutcome run_fusion_scenario(const ExperimentContext& ctx, const ScenarioData& data,
                                  ModelKind fusion_kind, const FeatureGroupSet& groups,
                                  const LstmClassifier& encoder, double lstm_test_accuracy,
                                  int jobs) {
    FusionVariant variant;
    switch (fusion_kind) {
        case ModelKind::FusionA: variant = FusionVariant::DnnConcat; break;
        case ModelKind::FusionB: variant = FusionVariant::DnnLogitFeature; break;
        case ModelKind::FusionC: variant = FusionVariant::ForestOverLogits; break;
        default: throw std::invalid_argument("run_fusion_scenario: not a fusion model kind");
    }
    const std::string cell = cell_name(data.m, data.criterion, fusion_kind, groups);
    audit_cell(ctx, data, cell);

    const auto train_examples = gather(data.examples, data.train_rows);
    const auto train_features = gather_features(ctx, data, data.train_rows);
    const auto val_examples = gather(data.examples, data.validation_rows);
    const auto val_features = gather_features(ctx, data, data.validation_rows);

    DnnConfig dnn_cfg = ctx.cfg.dnn;
    dnn_cfg.train.rng_seed = cell_seed(ctx.cfg.world.rng_seed, cell);
    ForestConfig forest_cfg = ctx.cfg.forest;
    forest_cfg.rng_seed = dnn_cfg.train.rng_seed;

    FusionOutcome outcome;
    outcome.model = fusion_fit(variant, encoder, train_examples, train_features, val_examples,
                               val_features, groups, ctx.features->dims(), dnn_cfg, forest_cfg,
                               jobs);

    const auto test_examples = gather(data.examples, data.test_rows);
    const auto test_features = gather_features(ctx, data, data.test_rows);
    const double acc = fused_accuracy(outcome.model, test_examples, test_features);
    outcome.result = make_result(data, model_kind_name(fusion_kind), groups.label(), acc);
    outcome.result.relative_perf = relative_performance(acc, lstm_test_accuracy);
    return outcome;
}

}  // namespace mobility
