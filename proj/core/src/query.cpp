#include "mobility/query.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mobility {

TargetCriterion TargetCriterion::important_at(std::int32_t minutes) {
    if (minutes <= 0) throw std::invalid_argument("important@K needs K > 0 minutes");
    return {CriterionKind::ImportantAtK, minutes};
}

TargetCriterion TargetCriterion::longest_at(std::int32_t count) {
    if (count < 1) throw std::invalid_argument("longest@K needs K >= 1 segments");
    return {CriterionKind::LongestAtK, count};
}

std::string TargetCriterion::name() const {
    switch (kind) {
        case CriterionKind::Successive: return "successive";
        case CriterionKind::ImportantAtK: return "important";
        case CriterionKind::LongestAtK: return "longest";
    }
    return "?";
}

std::string TargetCriterion::label() const {
    if (kind == CriterionKind::Successive) return name();
    return name() + "@" + std::to_string(k);
}

TargetCriterion TargetCriterion::parse(const std::string& text) {
    if (text == "successive") return successive();
    const auto at = text.find('@');
    if (at != std::string::npos) {
        const std::string family = text.substr(0, at);
        const int k = std::stoi(text.substr(at + 1));
        if (family == "important") return important_at(k);
        if (family == "longest") return longest_at(k);
    }
    throw std::invalid_argument("unknown target criterion: " + text);
}

std::vector<TargetCriterion> default_criteria() {
    return {TargetCriterion::successive(),   TargetCriterion::important_at(2),
            TargetCriterion::important_at(5), TargetCriterion::important_at(10),
            TargetCriterion::longest_at(3),   TargetCriterion::longest_at(5),
            TargetCriterion::longest_at(10)};
}

SplitRange valid_split_range(std::size_t n_records, double min_frac) {
    const double n = static_cast<double>(n_records);
    const auto lo_raw = static_cast<std::int64_t>(std::ceil(min_frac * n - 1e-9));
    const auto hi_raw = static_cast<std::int64_t>(std::floor((1.0 - min_frac) * n + 1e-9));
    SplitRange range;
    range.lo = static_cast<std::uint32_t>(std::max<std::int64_t>(lo_raw, 1));
    if (hi_raw < 1 || n_records < 2) {
        range.hi = 0;
        range.lo = 1;
        return range;
    }
    range.hi = static_cast<std::uint32_t>(
        std::min<std::int64_t>(hi_raw, static_cast<std::int64_t>(n_records) - 1));
    return range;
}

std::vector<Query> simulate_queries(const Trajectory& traj, std::uint32_t trajectory_index,
                                    int n_per_traj, double min_frac, Rng& rng) {
    if (n_per_traj < 1) throw std::invalid_argument("n_per_traj must be >= 1");
    if (min_frac < 0.0 || min_frac >= 0.5)
        throw std::invalid_argument("min_frac must be in [0, 0.5)");
    const SplitRange range = valid_split_range(traj.records.size(), min_frac);
    std::vector<Query> out;
    if (range.empty()) return out;

    const std::uint32_t n_valid = range.size();
    std::vector<std::uint32_t> chosen;
    if (n_valid <= static_cast<std::uint32_t>(n_per_traj)) {
        chosen.resize(n_valid);
        for (std::uint32_t i = 0; i < n_valid; ++i) chosen[i] = range.lo + i;
    } else {
        // Floyd's sampling: n_per_traj distinct indices, uniform over the range.
        std::set<std::uint32_t> picked;
        for (std::uint32_t j = n_valid - n_per_traj; j < n_valid; ++j) {
            const auto t = static_cast<std::uint32_t>(rng.uniform_index(j + 1));
            picked.insert(picked.count(t) ? j : t);
        }
        chosen.assign(picked.begin(), picked.end());
        for (auto& c : chosen) c += range.lo;
    }

    out.reserve(chosen.size());
    for (std::uint32_t s : chosen) out.push_back({trajectory_index, s});
    return out;
}

std::optional<TargetSelection> select_target(std::span<const StaySegment> segments,
                                             LocationId current,
                                             const TargetCriterion& criterion) {
    switch (criterion.kind) {
        case CriterionKind::Successive:
            for (const StaySegment& s : segments)
                if (s.location != current) return TargetSelection{s.location, s.stay_seconds};
            return std::nullopt;

        case CriterionKind::ImportantAtK: {
            const Timestamp need = 60LL * criterion.k;
            for (const StaySegment& s : segments)
                if (s.location != current && s.stay_seconds >= need)
                    return TargetSelection{s.location, s.stay_seconds};
            return std::nullopt;
        }

        case CriterionKind::LongestAtK: {
            if (segments.size() < static_cast<std::size_t>(criterion.k)) return std::nullopt;
            const StaySegment* best = nullptr;
            for (std::int32_t i = 0; i < criterion.k; ++i) {
                const StaySegment& s = segments[i];
                if (s.location == current) continue;
                if (best == nullptr || s.stay_seconds > best->stay_seconds) best = &s;
            }
            if (best == nullptr) return std::nullopt;
            return TargetSelection{best->location, best->stay_seconds};
        }
    }
    return std::nullopt;
}

std::optional<TargetSelection> select_target(std::span<const LocationRecord> future,
                                             LocationId current, const TargetCriterion& criterion,
                                             std::int32_t m) {
    if (future.empty()) throw std::invalid_argument("select_target: empty future window");
    return select_target(stay_segments(future, m), current, criterion);
}

const std::vector<LabeledQuery>& LabeledDataset::cell(const TargetCriterion& c,
                                                      std::int32_t m) const {
    const auto it = cells.find({c, m});
    if (it == cells.end())
        throw std::out_of_range("no labeled cell for " + c.label() + " m=" + std::to_string(m));
    return it->second;
}

const TestingSizeRow* LabeledDataset::testing_size(const TargetCriterion& c,
                                                   std::int32_t m) const {
    for (const auto& row : testing_sizes)
        if (row.criterion == c && row.m == m) return &row;
    return nullptr;
}

LabeledDataset label_dataset(const QueryDataset& dataset,
                             std::span<const TargetCriterion> criteria,
                             std::span<const std::int32_t> m_values) {
    LabeledDataset labeled;
    for (const TargetCriterion& c : criteria)
        for (std::int32_t m : m_values) labeled.cells[{c, m}];

    for (std::uint32_t qi = 0; qi < dataset.queries.size(); ++qi) {
        const Query& q = dataset.queries[qi];
        const auto future = dataset.future(q);
        for (std::int32_t m : m_values) {
            const auto segments = stay_segments(future, m);
            const LocationId current = dataset.current_location(q, m);
            for (const TargetCriterion& c : criteria) {
                const auto selection = select_target(segments, current, c);
                if (selection)
                    labeled.cells[{c, m}].push_back({qi, selection->location,
                                                     selection->stay_seconds});
            }
        }
    }

    for (const TargetCriterion& c : criteria)
        for (std::int32_t m : m_values)
            labeled.testing_sizes.push_back({c, m, labeled.cells[{c, m}].size(), 0});
    return labeled;
}

void SplitFractions::validate() const {
    if (train < 0 || validation < 0 || test < 0)
        throw std::invalid_argument("split fractions must be non-negative");
    if (std::abs(train + validation + test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
}

DatasetSplit grouped_split(const QueryDataset& dataset, const SplitFractions& fractions,
                           Rng& rng) {
    fractions.validate();
    const std::size_t n_traj = dataset.trajectories.size();
    std::vector<std::uint32_t> order(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) order[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(order);

    const auto b1 = static_cast<std::size_t>(static_cast<double>(n_traj) * fractions.train + 1e-9);
    const auto b2 = static_cast<std::size_t>(
        static_cast<double>(n_traj) * (fractions.train + fractions.validation) + 1e-9);

    DatasetSplit split;
    split.fractions = fractions;
    split.trajectory_partition.assign(n_traj, Partition::Test);
    for (std::size_t i = 0; i < n_traj; ++i) {
        split.trajectory_partition[order[i]] =
            i < b1 ? Partition::Train : (i < b2 ? Partition::Validation : Partition::Test);
    }

    for (std::uint32_t qi = 0; qi < dataset.queries.size(); ++qi) {
        switch (split.trajectory_partition[dataset.queries[qi].trajectory_index]) {
            case Partition::Train: split.train.push_back(qi); break;
            case Partition::Validation: split.validation.push_back(qi); break;
            case Partition::Test: split.test.push_back(qi); break;
        }
    }
    return split;
}

void fill_test_counts(LabeledDataset& labeled, const QueryDataset& dataset,
                      const DatasetSplit& split) {
    for (auto& row : labeled.testing_sizes) {
        std::size_t count = 0;
        for (const LabeledQuery& lq : labeled.cells[{row.criterion, row.m}])
            if (split.query_partition(dataset, lq.query_index) == Partition::Test) ++count;
        row.count_test = count;
    }
}

std::string labeled_queries_csv(const LabeledDataset& labeled, const QueryDataset& dataset) {
    std::string out = "query_id,trajectory_id,split_index,m,criterion,k,target\n";
    for (const auto& [key, rows] : labeled.cells) {
        for (const LabeledQuery& lq : rows) {
            const Query& q = dataset.queries[lq.query_index];
            out += std::to_string(lq.query_index);
            out += ',';
            out += std::to_string(q.trajectory_index);
            out += ',';
            out += std::to_string(q.split_index);
            out += ',';
            out += std::to_string(key.m);
            out += ',';
            out += key.criterion.name();
            out += ',';
            out += std::to_string(key.criterion.k);
            out += ',';
            out += std::to_string(lq.target);
            out += '\n';
        }
    }
    return out;
}

std::string testing_size_csv(const LabeledDataset& labeled) {
    std::string out = "criterion,k,m,count,count_test\n";
    for (const auto& row : labeled.testing_sizes) {
        out += row.criterion.name();
        out += ',';
        out += std::to_string(row.criterion.k);
        out += ',';
        out += std::to_string(row.m);
        out += ',';
        out += std::to_string(row.count_total);
        out += ',';
        out += std::to_string(row.count_test);
        out += '\n';
    }
    return out;
}

std::string splits_csv(const DatasetSplit& split) {
    std::string out = "trajectory_id,partition\n";
    static const char* names[] = {"train", "validation", "test"};
    for (std::size_t i = 0; i < split.trajectory_partition.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += names[static_cast<int>(split.trajectory_partition[i])];
        out += '\n';
    }
    return out;
}

}  // namespace mobility
