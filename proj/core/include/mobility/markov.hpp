#pragma once

#include "mobility/trajectory.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobility {

// First-order transition model with a structurally zero diagonal: only
// boundary transitions between distinct locations are counted, and the
// prediction never equals the current location.
struct MarkovModel {
    std::int32_t m = 0;
    std::vector<std::int64_t> counts;       // row-major M x M, diagonal always 0
    std::vector<std::int64_t> global_dist;  // run-length occurrences per location

    std::int64_t& at(LocationId from, LocationId to) { return counts[from * m + to]; }
    std::int64_t at(LocationId from, LocationId to) const { return counts[from * m + to]; }
};

MarkovModel markov_init(std::int32_t m);

// Folds one history (raw location sequence, consecutive duplicates allowed)
// into the model.
void markov_add_history(MarkovModel& model, std::span<const LocationId> history);

MarkovModel markov_fit(std::span<const std::vector<LocationId>> histories, std::int32_t m);

// Argmax of the current row, smallest id on ties; unseen rows fall back to
// the global run frequency excluding the current location.
LocationId markov_predict(const MarkovModel& model, LocationId current);

std::string markov_csv(const MarkovModel& model);
MarkovModel markov_from_csv(const std::string& text);

}  // namespace mobility
