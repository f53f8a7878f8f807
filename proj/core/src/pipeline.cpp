#include "mobility/pipeline.hpp"

#include "mobility/csv.hpp"
#include "mobility/io.hpp"
#include "mobility/transition.hpp"

#include <nlohmann/json.hpp>

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <charconv>
#include <mutex>
#include <sstream>
#include <thread>

namespace mobility {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Cross-process advisory lock guarding manifest read-modify-write cycles.
class FileLock {
public:
    explicit FileLock(const fs::path& path) {
        fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ >= 0) ::flock(fd_, LOCK_EX);
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

class Manifest {
public:
    Manifest(const fs::path& out_dir, const RunConfig& cfg)
        : dir_(out_dir), path_(out_dir / "manifest.json"), lock_path_(out_dir / ".manifest.lock") {
        fs::create_directories(out_dir);
        const FileLock lock(lock_path_);
        if (fs::exists(path_)) {
            doc_ = json::parse(read_file(path_));
            const std::string existing = doc_.value("config_echo_hash", "");
            const std::string current = hash_hex(content_hash(cfg.echo()));
            if (!existing.empty() && existing != current)
                throw StageError("manifest config hash mismatch: run directory was produced "
                                 "with a different configuration");
        } else {
            doc_["tool_version"] = kToolVersion;
            doc_["config_echo_hash"] = hash_hex(content_hash(cfg.echo()));
            doc_["seed"] = cfg.world.rng_seed;
            doc_["files"] = json::object();
            doc_["stages"] = json::object();
        }
    }

    void record_file(const std::string& name, const std::string& content) {
        atomic_write_file(dir_ / name, content);
        doc_["files"][name] = hash_hex(content_hash(content));
    }

    void record_existing_file(const std::string& name) {
        doc_["files"][name] = hash_hex(file_hash(dir_ / name));
    }

    void require_input(const std::string& name) const {
        if (!doc_["files"].contains(name))
            throw StageError("missing input " + name + ": run the earlier stage first");
        const fs::path p = dir_ / name;
        if (!fs::exists(p)) throw StageError("declared input vanished: " + name);
        const std::string want = doc_["files"][name].get<std::string>();
        const std::string have = hash_hex(file_hash(p));
        if (want != have)
            throw StageError("input hash mismatch on " + name + " (want " + want + ", have " +
                             have + ")");
    }

    std::string input_hash(const std::string& name) const {
        return doc_["files"].value(name, "");
    }

    void set_stage(const std::string& stage, const std::string& status, double elapsed_s) {
        doc_["stages"][stage] = {{"status", status}, {"elapsed_s", elapsed_s}};
    }

    void save() {
        const FileLock lock(lock_path_);
        atomic_write_file(path_, doc_.dump(2) + "\n");
    }

private:
    fs::path dir_;
    fs::path path_;
    fs::path lock_path_;
    json doc_;
};

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string base_queries_csv(const QueryDataset& dataset) {
    std::string out = "query_id,trajectory_id,split_index\n";
    for (std::size_t qi = 0; qi < dataset.queries.size(); ++qi) {
        out += std::to_string(qi);
        out += ',';
        out += std::to_string(dataset.queries[qi].trajectory_index);
        out += ',';
        out += std::to_string(dataset.queries[qi].split_index);
        out += '\n';
    }
    return out;
}

std::vector<Query> read_base_queries_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "query_id,trajectory_id,split_index")
        throw StageError("base_queries.csv: bad header");
    std::vector<Query> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Query q;
        std::uint64_t id = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto r1 = std::from_chars(p, end, id);
        auto r2 = std::from_chars(r1.ptr + 1, end, q.trajectory_index);
        auto r3 = std::from_chars(r2.ptr + 1, end, q.split_index);
        if (r1.ec != std::errc() || r2.ec != std::errc() || r3.ec != std::errc() ||
            id != out.size())
            throw StageError("base_queries.csv: bad row: " + line);
        out.push_back(q);
    }
    return out;
}

DatasetSplit read_splits_csv(const std::string& text, const QueryDataset& dataset,
                             const SplitFractions& fractions) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "trajectory_id,partition")
        throw StageError("splits.csv: bad header");
    DatasetSplit split;
    split.fractions = fractions;
    split.trajectory_partition.assign(dataset.trajectories.size(), Partition::Test);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        const std::size_t id = std::stoul(line.substr(0, comma));
        const std::string part = line.substr(comma + 1);
        if (id >= split.trajectory_partition.size())
            throw StageError("splits.csv: trajectory id out of range");
        split.trajectory_partition[id] = part == "train"        ? Partition::Train
                                         : part == "validation" ? Partition::Validation
                                                                : Partition::Test;
        ++rows;
    }
    if (rows != dataset.trajectories.size())
        throw StageError("splits.csv: row count does not match trajectories");
    for (std::uint32_t qi = 0; qi < dataset.queries.size(); ++qi) {
        switch (split.trajectory_partition[dataset.queries[qi].trajectory_index]) {
            case Partition::Train: split.train.push_back(qi); break;
            case Partition::Validation: split.validation.push_back(qi); break;
            case Partition::Test: split.test.push_back(qi); break;
        }
    }
    return split;
}

json result_to_json(const ScenarioResult& r) {
    json j;
    j["m"] = r.m;
    j["criterion"] = r.criterion.label();
    j["model"] = r.model_name;
    j["groups"] = r.groups;
    j["accuracy"] = r.accuracy;
    j["n_test"] = r.n_test;
    j["mean_target_stay_s"] = r.mean_target_stay_seconds;
    if (r.relative_perf) j["relative_perf"] = *r.relative_perf;
    return j;
}

ScenarioResult result_from_json(const json& j) {
    ScenarioResult r;
    r.m = j.at("m").get<std::int32_t>();
    r.criterion = TargetCriterion::parse(j.at("criterion").get<std::string>());
    r.model_name = j.at("model").get<std::string>();
    r.groups = j.at("groups").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.n_test = j.at("n_test").get<std::size_t>();
    r.mean_target_stay_seconds = j.at("mean_target_stay_s").get<double>();
    if (j.contains("relative_perf")) r.relative_perf = j.at("relative_perf").get<double>();
    return r;
}

// Inputs every training cell depends on; recorded into the cell's
// result.json so a resumed sweep can tell whether the cell is stale.
std::vector<std::string> cell_inputs(const CellSpec& cell) {
    std::vector<std::string> inputs = {"trajectories.csv", "base_queries.csv", "splits.csv"};
    if (cell.model == ModelKind::ForestSingle || cell.model == ModelKind::FusionA ||
        cell.model == ModelKind::FusionB || cell.model == ModelKind::FusionC)
        inputs.push_back("events.csv");
    if (cell.model == ModelKind::FusionA || cell.model == ModelKind::FusionB ||
        cell.model == ModelKind::FusionC) {
        const CellSpec lstm_cell{ModelKind::Lstm, cell.m, cell.criterion, {}};
        inputs.push_back("cells/" + lstm_cell.name() + "/lstm.ckpt");
        inputs.push_back("cells/" + lstm_cell.name() + "/result.json");
    }
    return inputs;
}

bool cell_is_fresh(const fs::path& out_dir, const CellSpec& cell) {
    const fs::path result_path = out_dir / "cells" / cell.name() / "result.json";
    if (!fs::exists(result_path)) return false;
    json doc;
    try {
        doc = json::parse(read_file(result_path));
    } catch (...) {
        return false;
    }
    if (!doc.contains("input_hashes")) return false;
    for (const auto& [name, want] : doc.at("input_hashes").items()) {
        const fs::path p = out_dir / name;
        if (!fs::exists(p)) return false;
        if (hash_hex(file_hash(p)) != want.get<std::string>()) return false;
    }
    return true;
}

// Trains one cell against already-loaded prepared data and writes its
// artifacts. Returns the cell's scenario result.
ScenarioResult compute_cell(const fs::path& out_dir, const RunConfig& cfg,
                            const PreparedData& prepared, const FeatureCache* features,
                            TrainingAudit* audit, const CellSpec& cell, int jobs) {
    const fs::path cell_dir = out_dir / "cells" / cell.name();
    fs::create_directories(cell_dir);

    ExperimentContext ctx{prepared.dataset, prepared.labeled, prepared.split, cfg, features,
                          audit};
    const ScenarioData data = build_scenario_data(ctx, cell.criterion, cell.m);

    ScenarioResult result;
    switch (cell.model) {
        case ModelKind::Markov: {
            auto outcome = run_markov_scenario(ctx, data);
            atomic_write_file(cell_dir / "markov.csv", markov_csv(outcome.model));
            result = outcome.result;
            break;
        }
        case ModelKind::Lstm: {
            auto outcome = run_lstm_scenario(ctx, data);
            save_checkpoint((cell_dir / "lstm.ckpt").string(), outcome.model,
                            cell_seed(cfg.world.rng_seed, cell.name()));
            result = outcome.result;
            break;
        }
        case ModelKind::ForestSingle: {
            auto outcome = run_forest_single_scenario(ctx, data, cell.groups, jobs);
            atomic_write_file(cell_dir / "forest.json", forest_to_json(outcome.model));
            result = outcome.result;
            break;
        }
        case ModelKind::FusionA:
        case ModelKind::FusionB:
        case ModelKind::FusionC: {
            const CellSpec lstm_cell{ModelKind::Lstm, cell.m, cell.criterion, {}};
            const fs::path lstm_dir = out_dir / "cells" / lstm_cell.name();
            if (!fs::exists(lstm_dir / "lstm.ckpt"))
                throw StageError("fusion cell " + cell.name() + " needs the lstm cell " +
                                 lstm_cell.name() + " trained first");
            const LstmClassifier encoder = load_checkpoint((lstm_dir / "lstm.ckpt").string());
            const auto lstm_result =
                result_from_json(json::parse(read_file(lstm_dir / "result.json")));

            auto outcome = run_fusion_scenario(ctx, data, cell.model, cell.groups, encoder,
                                               lstm_result.accuracy, jobs);
            if (cell.model == ModelKind::FusionC) {
                atomic_write_file(cell_dir / "forest.json", forest_to_json(outcome.model.forest));
            } else {
                save_checkpoint((cell_dir / "encoder.ckpt").string(), outcome.model.encoder,
                                cell_seed(cfg.world.rng_seed, cell.name()));
            }
            json bundle;
            bundle["variant"] = fusion_variant_name(outcome.model.variant);
            bundle["groups"] = cell.groups.label();
            bundle["seed"] = cell_seed(cfg.world.rng_seed, cell.name());
            atomic_write_file(cell_dir / "fusion.json", bundle.dump(2) + "\n");
            result = outcome.result;
            break;
        }
    }

    json doc = result_to_json(result);
    doc["cell"] = cell.name();
    doc["seed"] = cell_seed(cfg.world.rng_seed, cell.name());
    auto& hashes = doc["input_hashes"] = json::object();
    for (const std::string& input : cell_inputs(cell))
        hashes[input] = hash_hex(file_hash(out_dir / input));
    atomic_write_file(cell_dir / "result.json", doc.dump(2) + "\n");
    return result;
}

}  // namespace

void cmd_generate(const PipelineOptions& opts) {
    const StageTimer timer;
    Manifest manifest(opts.out_dir, opts.cfg);

    const World world = generate_world(opts.cfg.world);
    Rng gap_rng = Rng(opts.cfg.world.rng_seed).derive(0x6a95ULL);
    const auto geo = inject_gaps(world.geo, opts.cfg.gaps, gap_rng);

    manifest.record_file("config.echo.conf", opts.cfg.echo());
    manifest.record_file("geo.csv", geo_csv(geo));
    manifest.record_file("events.csv", events_csv(world.events));
    manifest.set_stage("generate", "complete", timer.elapsed());
    manifest.save();
}

void cmd_prepare(const PipelineOptions& opts) {
    const StageTimer timer;
    Manifest manifest(opts.out_dir, opts.cfg);
    manifest.require_input("geo.csv");

    const auto geo = read_geo_csv(read_file(opts.out_dir / "geo.csv"));
    Rng rng(opts.cfg.world.rng_seed);
    Rng kmeans_rng = rng.derive(0x6b6dULL);
    const AssignedWorld assigned =
        assign_all_granularities(geo, opts.cfg.granularity, kmeans_rng, opts.jobs);

    manifest.record_file("records.csv",
                         records_csv(assigned.user_streams, opts.cfg.granularity.m_values));
    manifest.record_file("centroids.csv", centroids_csv(assigned.models));

    QueryDataset dataset;
    dataset.trajectories = extract_trajectories(assigned.user_streams, opts.cfg.extract);

    {
        std::string transitions = "m,from,to,count\n";
        for (const std::int32_t m : opts.cfg.granularity.m_values) {
            const TransitionMatrix matrix = transition_counts(dataset.trajectories, m, true);
            const std::string body = transition_csv(matrix, opts.cfg.transition_min_count);
            transitions.append(body, body.find('\n') + 1, std::string::npos);
        }
        manifest.record_file("transitions.csv", transitions);
    }

    Rng query_rng = rng.derive(0x9ae1ULL);
    for (std::uint32_t ti = 0; ti < dataset.trajectories.size(); ++ti) {
        const auto qs = simulate_queries(dataset.trajectories[ti], ti, opts.cfg.query_n_per_traj,
                                         opts.cfg.query_min_frac, query_rng);
        dataset.queries.insert(dataset.queries.end(), qs.begin(), qs.end());
    }

    LabeledDataset labeled =
        label_dataset(dataset, opts.cfg.criteria, opts.cfg.granularity.m_values);
    Rng split_rng = rng.derive(0x5911ULL);
    const DatasetSplit split = grouped_split(dataset, opts.cfg.split, split_rng);
    fill_test_counts(labeled, dataset, split);

    manifest.record_file("trajectories.csv",
                         trajectories_csv(dataset.trajectories, opts.cfg.granularity.m_values));
    manifest.record_file("base_queries.csv", base_queries_csv(dataset));
    manifest.record_file("queries.csv", labeled_queries_csv(labeled, dataset));
    manifest.record_file("testing_size.csv", testing_size_csv(labeled));
    manifest.record_file("splits.csv", splits_csv(split));
    manifest.set_stage("prepare", "complete", timer.elapsed());
    manifest.save();
}

PreparedData PreparedData::load(const std::filesystem::path& out_dir, const RunConfig& cfg,
                                bool with_events) {
    PreparedData prepared;
    prepared.dataset.trajectories =
        read_trajectories_csv(read_file(out_dir / "trajectories.csv"));
    prepared.dataset.queries = read_base_queries_csv(read_file(out_dir / "base_queries.csv"));
    prepared.labeled = label_dataset(prepared.dataset, cfg.criteria, cfg.granularity.m_values);
    prepared.split =
        read_splits_csv(read_file(out_dir / "splits.csv"), prepared.dataset, cfg.split);
    fill_test_counts(prepared.labeled, prepared.dataset, prepared.split);

    // Integrity: the relabeled counts must reproduce the prepare-stage table.
    const std::string recounted = testing_size_csv(prepared.labeled);
    if (content_hash(recounted) != file_hash(out_dir / "testing_size.csv"))
        throw StageError("testing_size.csv does not match relabeled data; "
                         "prepare stage artifacts are inconsistent");

    prepared.dims = {cfg.world.n_apps, cfg.world.n_sensors, cfg.world.n_broadcasts};
    if (with_events)
        prepared.events = UsageEventIndex(read_events_csv(read_file(out_dir / "events.csv")));
    return prepared;
}

void cmd_train(const PipelineOptions& opts, const CellSpec& cell) {
    const StageTimer timer;
    Manifest manifest(opts.out_dir, opts.cfg);
    for (const std::string& input : cell_inputs(cell)) {
        if (input.rfind("cells/", 0) == 0) continue;  // checked by compute_cell
        manifest.require_input(input);
    }

    const bool needs_events = cell.model != ModelKind::Markov && cell.model != ModelKind::Lstm;
    const PreparedData prepared = PreparedData::load(opts.out_dir, opts.cfg, needs_events);
    std::optional<FeatureCache> features;
    if (needs_events)
        features.emplace(prepared.dataset, prepared.events, prepared.dims);

    TrainingAudit audit;
    compute_cell(opts.out_dir, opts.cfg, prepared, features ? &*features : nullptr, &audit, cell,
                 opts.jobs);
    audit.assert_no_leakage();

    manifest.set_stage("train:" + cell.name(), "complete", timer.elapsed());
    manifest.save();
}

void cmd_evaluate(const PipelineOptions& opts) {
    const StageTimer timer;
    Manifest manifest(opts.out_dir, opts.cfg);
    manifest.require_input("testing_size.csv");

    std::vector<ScenarioResult> results;
    const fs::path cells_dir = opts.out_dir / "cells";
    if (fs::exists(cells_dir)) {
        std::vector<fs::path> result_files;
        for (const auto& entry : fs::recursive_directory_iterator(cells_dir))
            if (entry.is_regular_file() && entry.path().filename() == "result.json")
                result_files.push_back(entry.path());
        std::sort(result_files.begin(), result_files.end());
        for (const auto& p : result_files)
            results.push_back(result_from_json(json::parse(read_file(p))));
    }
    if (results.empty()) throw StageError("no trained cells found: run train or sweep first");

    std::sort(results.begin(), results.end(), [](const ScenarioResult& a, const ScenarioResult& b) {
        return std::tuple(a.m, a.criterion, a.model_name, a.groups) <
               std::tuple(b.m, b.criterion, b.model_name, b.groups);
    });

    // n_test bookkeeping must agree with the prepare-stage table.
    {
        const RunConfig& cfg = opts.cfg;
        PreparedData prepared = PreparedData::load(opts.out_dir, cfg, false);
        for (const ScenarioResult& r : results) {
            const TestingSizeRow* row =
                prepared.labeled.testing_size(r.criterion, r.m);
            if (!row)
                throw StageError("result cell references unknown (criterion, m): " +
                                 r.criterion.label() + ", " + std::to_string(r.m));
            if (row->count_test != r.n_test)
                throw StageError("n_test mismatch for " + r.model_name + " at " +
                                 r.criterion.label() + " m=" + std::to_string(r.m) + ": cell has " +
                                 std::to_string(r.n_test) + ", testing-size table says " +
                                 std::to_string(row->count_test));
        }
    }

    const ReportGrid grid = build_report_grid(results, opts.cfg.eval_exclude_m);
    manifest.record_file("results.csv", results_csv(results));
    manifest.record_file("heatmap.csv", heatmap_csv(grid));
    manifest.set_stage("evaluate", "complete", timer.elapsed());
    manifest.save();
}

std::vector<CellSpec> sweep_grid(const RunConfig& cfg) {
    std::vector<CellSpec> cells;
    for (const std::int32_t m : cfg.granularity.m_values) {
        for (const TargetCriterion& criterion : cfg.criteria) {
            for (const ModelKind model : cfg.sweep_models) {
                switch (model) {
                    case ModelKind::Markov:
                    case ModelKind::Lstm:
                        cells.push_back({model, m, criterion, {}});
                        break;
                    case ModelKind::ForestSingle:
                    case ModelKind::FusionA:
                    case ModelKind::FusionB:
                    case ModelKind::FusionC:
                        for (const FeatureGroupSet& groups : cfg.sweep_groups)
                            cells.push_back({model, m, criterion, groups});
                        break;
                }
            }
        }
    }
    return cells;
}

SweepStats cmd_sweep(const PipelineOptions& opts) {
    const StageTimer timer;
    Manifest manifest(opts.out_dir, opts.cfg);
    for (const char* input : {"trajectories.csv", "base_queries.csv", "splits.csv",
                              "testing_size.csv"})
        manifest.require_input(input);

    const auto cells = sweep_grid(opts.cfg);
    const bool needs_events =
        std::any_of(cells.begin(), cells.end(), [](const CellSpec& c) {
            return c.model != ModelKind::Markov && c.model != ModelKind::Lstm;
        });
    if (needs_events) manifest.require_input("events.csv");

    const PreparedData prepared = PreparedData::load(opts.out_dir, opts.cfg, needs_events);
    std::optional<FeatureCache> features;
    if (needs_events)
        features.emplace(prepared.dataset, prepared.events, prepared.dims);

    TrainingAudit audit;
    SweepStats stats;
    std::mutex stats_mutex;

    // Fusion cells read the lstm checkpoints, so they run as a second phase.
    std::vector<CellSpec> phase1, phase2;
    for (const CellSpec& cell : cells) {
        const bool fusion = cell.model == ModelKind::FusionA ||
                            cell.model == ModelKind::FusionB ||
                            cell.model == ModelKind::FusionC;
        (fusion ? phase2 : phase1).push_back(cell);
    }

    const auto run_phase = [&](const std::vector<CellSpec>& phase) {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const int n_workers = std::max(1, std::min<int>(opts.jobs,
                                                        static_cast<int>(phase.size())));
        std::vector<std::exception_ptr> errors(n_workers);
        for (int w = 0; w < n_workers; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= phase.size()) break;
                        const CellSpec& cell = phase[i];
                        if (cell_is_fresh(opts.out_dir, cell)) {
                            const std::lock_guard<std::mutex> lock(stats_mutex);
                            ++stats.skipped;
                            continue;
                        }
                        compute_cell(opts.out_dir, opts.cfg, prepared,
                                     features ? &*features : nullptr, &audit, cell, 1);
                        const std::lock_guard<std::mutex> lock(stats_mutex);
                        ++stats.computed;
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    };
    run_phase(phase1);
    run_phase(phase2);
    audit.assert_no_leakage();

    manifest.set_stage("sweep", "complete", timer.elapsed());
    manifest.save();

    cmd_evaluate(opts);
    return stats;
}

std::string cmd_report(const std::filesystem::path& out_dir) {
    std::string out;
    const fs::path results = out_dir / "results.csv";
    const fs::path sizes = out_dir / "testing_size.csv";
    if (fs::exists(sizes)) {
        out += "# Testing sizes (criterion,k,m,count,count_test)\n";
        out += read_file(sizes);
        out += '\n';
    }
    if (fs::exists(results)) {
        out += "# Results\n";
        out += read_file(results);
    }
    if (fs::exists(out_dir / "heatmap.csv")) {
        out += "\n# Mean relative performance\n";
        out += read_file(out_dir / "heatmap.csv");
    }
    if (out.empty()) out = "nothing to report: no artifacts in " + out_dir.string() + "\n";
    return out;
}

}  // namespace mobility
