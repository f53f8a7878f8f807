#pragma once

#include <boost/container/small_vector.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mobility {

using LocationId = std::int32_t;
using Timestamp = std::int64_t;  // seconds since epoch

// One (granularity -> location id) entry. A record carries the id of the
// same physical point under every configured clustering granularity.
struct GranularityId {
    std::int32_t m;
    LocationId id;
    friend bool operator==(const GranularityId&, const GranularityId&) = default;
};

struct LocationRecord {
    Timestamp timestamp = 0;
    // Sorted by m. Inline capacity covers the default six granularities.
    boost::container::small_vector<GranularityId, 6> location_ids;

    LocationId id_at(std::int32_t m) const;
    bool has_granularity(std::int32_t m) const;

    friend bool operator==(const LocationRecord&, const LocationRecord&) = default;
};

struct Trajectory {
    std::string user_id;
    std::vector<LocationRecord> records;

    Timestamp duration() const {
        return records.empty() ? 0 : records.back().timestamp - records.front().timestamp;
    }
};

struct StaySegment {
    LocationId location = 0;
    Timestamp enter = 0;
    Timestamp leave = 0;
    Timestamp stay_seconds = 0;

    friend bool operator==(const StaySegment&, const StaySegment&) = default;
};

struct ExtractionConfig {
    Timestamp gap_threshold = 300;   // split when the inter-record gap exceeds this
    Timestamp min_duration = 3600;   // discard pieces shorter than this

    void validate() const;
};

// Cuts a user's record stream at every gap strictly larger than
// cfg.gap_threshold and keeps the pieces whose duration is at least
// cfg.min_duration. Records are preserved verbatim, consecutive
// duplicate locations included.
//
// Preconditions: records sorted by timestamp, no duplicate timestamps.
std::vector<Trajectory> extract_trajectories(const std::string& user_id,
                                             std::span<const LocationRecord> records,
                                             const ExtractionConfig& cfg);

std::vector<Trajectory> extract_trajectories(
    const std::map<std::string, std::vector<LocationRecord>>& per_user_records,
    const ExtractionConfig& cfg);

// Run-length stay segments of a record span at granularity m.
// enter = timestamp of the run's first record; leave = timestamp of the
// next run's first record. The final run is closed at the last record,
// so its stay is truncated by the observation window.
std::vector<StaySegment> stay_segments(std::span<const LocationRecord> records, std::int32_t m);

inline std::vector<StaySegment> stay_segments(const Trajectory& traj, std::int32_t m) {
    return stay_segments(std::span<const LocationRecord>(traj.records), m);
}

}  // namespace mobility
