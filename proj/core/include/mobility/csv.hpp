#pragma once

#include "mobility/geometry.hpp"
#include "mobility/kmeans.hpp"
#include "mobility/synthgen.hpp"
#include "mobility/trajectory.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mobility {

std::vector<GeoRecord> read_geo_csv(const std::string& text);
std::vector<UsageEvent> read_events_csv(const std::string& text);

// Record stream: user_id,timestamp,loc_m5,... with one column per
// configured granularity.
std::string records_csv(const std::map<std::string, std::vector<LocationRecord>>& streams,
                        std::span<const std::int32_t> m_values);
std::map<std::string, std::vector<LocationRecord>> read_records_csv(const std::string& text);

// Same columns plus a leading trajectory_id.
std::string trajectories_csv(std::span<const Trajectory> trajectories,
                             std::span<const std::int32_t> m_values);
std::vector<Trajectory> read_trajectories_csv(const std::string& text);

std::string centroids_csv(const std::map<std::int32_t, KMeansModel>& models);

}  // namespace mobility
