#pragma once

#include "mobility/trajectory.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mobility {

struct TransitionMatrix {
    std::int32_t m = 0;
    std::vector<std::int64_t> counts;  // row-major M x M

    std::int64_t& at(LocationId from, LocationId to) { return counts[from * m + to]; }
    std::int64_t at(LocationId from, LocationId to) const { return counts[from * m + to]; }
    std::int64_t row_sum(LocationId from) const;
};

// Counts location-to-location transitions at granularity m over a set of
// trajectories. With zero_diagonal the sequence is run-length deduplicated
// first, so only boundary transitions are counted and the diagonal stays
// structurally zero; without it raw consecutive record pairs are counted,
// self-transitions included.
TransitionMatrix transition_counts(std::span<const Trajectory> trajectories, std::int32_t m,
                                   bool zero_diagonal = true);

// Export rows "m,from,to,count", omitting zero entries and entries below
// min_count_filter. The in-memory matrix keeps the unfiltered counts.
std::string transition_csv(const TransitionMatrix& matrix, std::int64_t min_count_filter = 0);

}  // namespace mobility
