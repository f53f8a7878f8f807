#include "mobility/trajectory.hpp"

#include <stdexcept>

namespace mobility {

LocationId LocationRecord::id_at(std::int32_t m) const {
    for (const auto& gid : location_ids)
        if (gid.m == m) return gid.id;
    throw std::out_of_range("location record has no granularity m=" + std::to_string(m));
}

bool LocationRecord::has_granularity(std::int32_t m) const {
    for (const auto& gid : location_ids)
        if (gid.m == m) return true;
    return false;
}

void ExtractionConfig::validate() const {
    if (gap_threshold <= 0) throw std::invalid_argument("gap_threshold must be positive");
    if (min_duration <= 0) throw std::invalid_argument("min_duration must be positive");
    if (min_duration < gap_threshold)
        throw std::invalid_argument("min_duration must be >= gap_threshold");
}

std::vector<Trajectory> extract_trajectories(const std::string& user_id,
                                             std::span<const LocationRecord> records,
                                             const ExtractionConfig& cfg) {
    cfg.validate();
    std::vector<Trajectory> out;
    if (records.empty()) return out;

    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].timestamp <= records[i - 1].timestamp)
            throw std::invalid_argument("record stream for user " + user_id +
                                        " is not strictly increasing in time");
    }

    std::size_t begin = 0;
    auto flush = [&](std::size_t end) {  // piece = records[begin, end)
        const Timestamp duration = records[end - 1].timestamp - records[begin].timestamp;
        if (duration >= cfg.min_duration) {
            Trajectory traj;
            traj.user_id = user_id;
            traj.records.assign(records.begin() + begin, records.begin() + end);
            out.push_back(std::move(traj));
        }
        begin = end;
    };

    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].timestamp - records[i - 1].timestamp > cfg.gap_threshold) flush(i);
    }
    flush(records.size());
    return out;
}

std::vector<Trajectory> extract_trajectories(
    const std::map<std::string, std::vector<LocationRecord>>& per_user_records,
    const ExtractionConfig& cfg) {
    std::vector<Trajectory> out;
    for (const auto& [user, records] : per_user_records) {
        auto pieces = extract_trajectories(user, records, cfg);
        for (auto& p : pieces) out.push_back(std::move(p));
    }
    return out;
}

std::vector<StaySegment> stay_segments(std::span<const LocationRecord> records, std::int32_t m) {
    if (records.empty()) throw std::invalid_argument("stay_segments: empty record span");
    std::vector<StaySegment> out;
    LocationId run_loc = records.front().id_at(m);
    Timestamp run_enter = records.front().timestamp;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const LocationId loc = records[i].id_at(m);
        if (loc != run_loc) {
            const Timestamp t = records[i].timestamp;
            out.push_back({run_loc, run_enter, t, t - run_enter});
            run_loc = loc;
            run_enter = t;
        }
    }
    const Timestamp last = records.back().timestamp;
    out.push_back({run_loc, run_enter, last, last - run_enter});
    return out;
}

}  // namespace mobility
