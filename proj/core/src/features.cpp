#include "mobility/features.hpp"

#include <algorithm>
#include <stdexcept>

namespace mobility {

std::int32_t hour_of_day(Timestamp ts) {
    Timestamp sec = ts % 86400;
    if (sec < 0) sec += 86400;
    return static_cast<std::int32_t>(sec / 3600);
}

std::int32_t day_of_week(Timestamp ts) {
    // The epoch fell on a Thursday; 0 means Sunday.
    Timestamp days = ts / 86400;
    if (ts % 86400 < 0) --days;
    Timestamp dow = (days + 4) % 7;
    if (dow < 0) dow += 7;
    return static_cast<std::int32_t>(dow);
}

UsageEventIndex::UsageEventIndex(std::span<const UsageEvent> events) {
    std::uint32_t max_user = 0;
    for (const UsageEvent& e : events) max_user = std::max(max_user, e.user_index);
    per_user_.resize(events.empty() ? 0 : max_user + 1);
    for (const UsageEvent& e : events) per_user_[e.user_index].push_back(e);
    for (auto& v : per_user_)
        std::stable_sort(v.begin(), v.end(), [](const UsageEvent& a, const UsageEvent& b) {
            return a.timestamp < b.timestamp;
        });
}

std::span<const UsageEvent> UsageEventIndex::window(std::uint32_t user_index, Timestamp begin,
                                                    Timestamp end) const {
    if (user_index >= per_user_.size()) return {};
    const auto& v = per_user_[user_index];
    const auto lo = std::lower_bound(v.begin(), v.end(), begin,
                                     [](const UsageEvent& e, Timestamp t) { return e.timestamp < t; });
    const auto hi = std::upper_bound(v.begin(), v.end(), end,
                                     [](Timestamp t, const UsageEvent& e) { return t < e.timestamp; });
    if (lo >= hi) return {};
    return {&*lo, static_cast<std::size_t>(hi - lo)};
}

std::optional<std::uint32_t> parse_user_name(const std::string& name) {
    if (name.size() < 2 || name[0] != 'u') return std::nullopt;
    std::uint32_t value = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
        if (name[i] < '0' || name[i] > '9') return std::nullopt;
        value = value * 10 + static_cast<std::uint32_t>(name[i] - '0');
    }
    return value;
}

FeatureVector extract_features(std::span<const LocationRecord> history, std::uint32_t user_index,
                               const UsageEventIndex& events, const FeatureDimensions& dims) {
    if (history.empty()) throw std::invalid_argument("extract_features: empty history window");
    FeatureVector fv;
    fv.app.assign(dims.n_apps, 0);
    fv.sensor.assign(dims.n_sensors, 0.0);
    fv.broadcast.assign(dims.n_broadcasts, 0);

    const Timestamp begin = history.front().timestamp;
    const Timestamp end = history.back().timestamp;
    fv.time = {hour_of_day(begin), day_of_week(begin), hour_of_day(end), day_of_week(end)};

    std::vector<double> sensor_sum(dims.n_sensors, 0.0);
    std::vector<std::uint32_t> sensor_count(dims.n_sensors, 0);

    for (const UsageEvent& e : events.window(user_index, begin, end)) {
        switch (e.kind) {
            case EventKind::AppUse:
                if (e.index < 0 || e.index >= dims.n_apps)
                    throw std::out_of_range("app index " + std::to_string(e.index) +
                                            " outside configured n_apps");
                fv.app[e.index] = 1;
                break;
            case EventKind::SensorReading:
                if (e.index < 0 || e.index >= dims.n_sensors)
                    throw std::out_of_range("sensor index " + std::to_string(e.index) +
                                            " outside configured n_sensors");
                sensor_sum[e.index] += e.value;
                ++sensor_count[e.index];
                break;
            case EventKind::Broadcast:
                if (e.index < 0 || e.index >= dims.n_broadcasts)
                    throw std::out_of_range("broadcast index " + std::to_string(e.index) +
                                            " outside configured n_broadcasts");
                ++fv.broadcast[e.index];
                break;
        }
    }
    for (std::int32_t j = 0; j < dims.n_sensors; ++j)
        if (sensor_count[j] > 0) fv.sensor[j] = sensor_sum[j] / sensor_count[j];
    return fv;
}

FeatureVector extract_features(const QueryDataset& dataset, const Query& query,
                               const UsageEventIndex& events, const FeatureDimensions& dims) {
    const auto user = parse_user_name(dataset.trajectories[query.trajectory_index].user_id);
    if (!user)
        throw std::invalid_argument("trajectory user id is not in canonical uN form: " +
                                    dataset.trajectories[query.trajectory_index].user_id);
    return extract_features(dataset.history(query), *user, events, dims);
}

}  // namespace mobility
