#pragma once

#include "mobility/query.hpp"
#include "mobility/synthgen.hpp"
#include "mobility/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobility {

struct FeatureDimensions {
    std::int32_t n_apps = 655;
    std::int32_t n_sensors = 238;
    std::int32_t n_broadcasts = 82;
};

struct TimeContext {
    std::int32_t begin_hour = 0;  // [0, 24)
    std::int32_t begin_dow = 0;   // [0, 7), 0 = Sunday
    std::int32_t end_hour = 0;
    std::int32_t end_dow = 0;
};

// The four behavioral feature groups computed over a history window.
struct FeatureVector {
    std::vector<std::uint8_t> app;        // used at least once in the window
    std::vector<double> sensor;           // mean reading, 0 when silent
    std::vector<std::uint32_t> broadcast; // occurrence count
    TimeContext time;
};

std::int32_t hour_of_day(Timestamp ts);
std::int32_t day_of_week(Timestamp ts);

// Usage events bucketed per user and sorted by time, for window queries.
class UsageEventIndex {
public:
    UsageEventIndex() = default;
    explicit UsageEventIndex(std::span<const UsageEvent> events);

    // Events of one user with begin <= timestamp <= end.
    std::span<const UsageEvent> window(std::uint32_t user_index, Timestamp begin,
                                       Timestamp end) const;

private:
    std::vector<std::vector<UsageEvent>> per_user_;
};

std::optional<std::uint32_t> parse_user_name(const std::string& name);  // "u12" -> 12

// Aggregates the window [history.front().timestamp, history.back().timestamp].
FeatureVector extract_features(std::span<const LocationRecord> history, std::uint32_t user_index,
                               const UsageEventIndex& events, const FeatureDimensions& dims);

FeatureVector extract_features(const QueryDataset& dataset, const Query& query,
                               const UsageEventIndex& events, const FeatureDimensions& dims);

}  // namespace mobility
