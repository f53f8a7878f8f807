#pragma once

#include "mobility/rng.hpp"
#include "mobility/trajectory.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobility {

enum class CriterionKind : std::uint8_t { Successive, ImportantAtK, LongestAtK };

// Target selection criterion: which future location counts as the label.
struct TargetCriterion {
    CriterionKind kind = CriterionKind::Successive;
    std::int32_t k = 0;  // minutes for ImportantAtK, segment count for LongestAtK

    static TargetCriterion successive() { return {CriterionKind::Successive, 0}; }
    static TargetCriterion important_at(std::int32_t minutes);
    static TargetCriterion longest_at(std::int32_t count);
    static TargetCriterion parse(const std::string& text);  // "successive" | "important@5" | ...

    std::string name() const;   // criterion family: "successive" | "important" | "longest"
    std::string label() const;  // family plus K, e.g. "important@5"

    auto operator<=>(const TargetCriterion&) const = default;
};

// The default experiment grid: Successive, Important@{2,5,10}, Longest@{3,5,10}.
std::vector<TargetCriterion> default_criteria();

// A prediction query: trajectory split into a history (model input) and a
// future (label source). split_index is the index of the first future record.
struct Query {
    std::uint32_t trajectory_index = 0;
    std::uint32_t split_index = 0;
};

struct QueryDataset {
    std::vector<Trajectory> trajectories;
    std::vector<Query> queries;

    std::span<const LocationRecord> history(const Query& q) const {
        const auto& r = trajectories[q.trajectory_index].records;
        return {r.data(), q.split_index};
    }
    std::span<const LocationRecord> future(const Query& q) const {
        const auto& r = trajectories[q.trajectory_index].records;
        return {r.data() + q.split_index, r.size() - q.split_index};
    }
    LocationId current_location(const Query& q, std::int32_t m) const {
        return trajectories[q.trajectory_index].records[q.split_index - 1].id_at(m);
    }
};

// Valid split range for a trajectory of n records: both sides must hold at
// least ceil(min_frac * n) records.
struct SplitRange {
    std::uint32_t lo = 0, hi = 0;  // inclusive; empty when lo > hi
    bool empty() const { return lo > hi; }
    std::uint32_t size() const { return empty() ? 0 : hi - lo + 1; }
};
SplitRange valid_split_range(std::size_t n_records, double min_frac);

// Draws up to n_per_traj split indices uniformly without replacement from
// the valid range; when the range is smaller, every index is used. Returned
// queries are sorted by split index.
std::vector<Query> simulate_queries(const Trajectory& traj, std::uint32_t trajectory_index,
                                    int n_per_traj, double min_frac, Rng& rng);

struct TargetSelection {
    LocationId location = 0;
    Timestamp stay_seconds = 0;
};

// Applies a criterion to the stay segments of a future window. Returns
// nothing when the criterion yields no label for this query.
std::optional<TargetSelection> select_target(std::span<const StaySegment> segments,
                                             LocationId current, const TargetCriterion& criterion);
std::optional<TargetSelection> select_target(std::span<const LocationRecord> future,
                                             LocationId current, const TargetCriterion& criterion,
                                             std::int32_t m);

struct LabeledQuery {
    std::uint32_t query_index = 0;
    LocationId target = 0;
    Timestamp target_stay_seconds = 0;
};

struct CellKey {
    TargetCriterion criterion;
    std::int32_t m = 0;
    auto operator<=>(const CellKey&) const = default;
};

struct TestingSizeRow {
    TargetCriterion criterion;
    std::int32_t m = 0;
    std::size_t count_total = 0;  // labeled queries over the whole dataset
    std::size_t count_test = 0;   // labeled queries in the test partition
};

struct LabeledDataset {
    std::map<CellKey, std::vector<LabeledQuery>> cells;
    std::vector<TestingSizeRow> testing_sizes;

    const std::vector<LabeledQuery>& cell(const TargetCriterion& c, std::int32_t m) const;
    const TestingSizeRow* testing_size(const TargetCriterion& c, std::int32_t m) const;
};

// Labels every query under every (criterion, m) combination, dropping
// queries without a label from that cell only.
LabeledDataset label_dataset(const QueryDataset& dataset,
                             std::span<const TargetCriterion> criteria,
                             std::span<const std::int32_t> m_values);

struct SplitFractions {
    double train = 0.7;
    double validation = 0.1;
    double test = 0.2;
    void validate() const;
};

enum class Partition : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

struct DatasetSplit {
    std::vector<std::uint32_t> train, validation, test;  // query indices
    std::vector<Partition> trajectory_partition;         // indexed by trajectory
    SplitFractions fractions;

    Partition query_partition(const QueryDataset& dataset, std::uint32_t query_index) const {
        return trajectory_partition[dataset.queries[query_index].trajectory_index];
    }
};

// Shuffles and partitions trajectories, so all queries simulated from one
// trajectory land in the same partition.
DatasetSplit grouped_split(const QueryDataset& dataset, const SplitFractions& fractions, Rng& rng);

// Fills TestingSizeRow::count_test once a split is known.
void fill_test_counts(LabeledDataset& labeled, const QueryDataset& dataset,
                      const DatasetSplit& split);

std::string labeled_queries_csv(const LabeledDataset& labeled, const QueryDataset& dataset);
std::string testing_size_csv(const LabeledDataset& labeled);
std::string splits_csv(const DatasetSplit& split);

}  // namespace mobility
