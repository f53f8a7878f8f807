#include "mobility/transition.hpp"

#include <stdexcept>
#include <string>

namespace mobility {

std::int64_t TransitionMatrix::row_sum(LocationId from) const {
    std::int64_t total = 0;
    for (std::int32_t to = 0; to < m; ++to) total += at(from, to);
    return total;
}

TransitionMatrix transition_counts(std::span<const Trajectory> trajectories, std::int32_t m,
                                   bool zero_diagonal) {
    if (m < 1) throw std::invalid_argument("transition_counts: m must be >= 1");
    TransitionMatrix matrix;
    matrix.m = m;
    matrix.counts.assign(static_cast<std::size_t>(m) * m, 0);

    for (const Trajectory& traj : trajectories) {
        if (traj.records.empty()) continue;
        LocationId prev = traj.records.front().id_at(m);
        for (std::size_t i = 1; i < traj.records.size(); ++i) {
            const LocationId cur = traj.records[i].id_at(m);
            if (zero_diagonal) {
                if (cur != prev) {
                    ++matrix.at(prev, cur);
                    prev = cur;
                }
            } else {
                ++matrix.at(prev, cur);
                prev = cur;
            }
        }
    }
    return matrix;
}

std::string transition_csv(const TransitionMatrix& matrix, std::int64_t min_count_filter) {
    std::string out = "m,from,to,count\n";
    for (LocationId from = 0; from < matrix.m; ++from) {
        for (LocationId to = 0; to < matrix.m; ++to) {
            const std::int64_t c = matrix.at(from, to);
            if (c == 0 || c < min_count_filter) continue;
            out += std::to_string(matrix.m);
            out += ',';
            out += std::to_string(from);
            out += ',';
            out += std::to_string(to);
            out += ',';
            out += std::to_string(c);
            out += '\n';
        }
    }
    return out;
}

}  // namespace mobility
