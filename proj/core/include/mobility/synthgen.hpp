#pragma once

#include "mobility/geometry.hpp"
#include "mobility/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mobility {

struct WorldConfig {
    int n_users = 50;
    int n_anchors_per_user = 8;
    int sim_days = 30;
    std::int64_t record_cadence = 60;   // seconds between geo records
    double dwell_lognormal_mu = 7.0;    // ln-seconds, median stay ~18 min
    double dwell_lognormal_sigma = 0.6;
    double dwell_sigma_user_jitter = 0.1;  // per-user spread of (mu, sigma)
    int n_apps = 655;
    int n_sensors = 238;
    int n_broadcasts = 82;
    double feature_signal_strength = 0.9;  // P(dwell app encodes the next anchor)
    std::uint64_t rng_seed = 1;

    void validate() const;
    std::int64_t horizon_seconds() const { return static_cast<std::int64_t>(sim_days) * 86400; }
};

enum class EventKind : std::uint8_t { AppUse, SensorReading, Broadcast };

struct UsageEvent {
    std::uint32_t user_index = 0;
    std::int64_t timestamp = 0;
    EventKind kind = EventKind::AppUse;
    std::int32_t index = 0;  // app / sensor / broadcast index
    double value = 0.0;      // sensor reading, 0 otherwise
};

// Ground truth of one planned stay, kept for oracle tests. Not exported.
struct DwellTruth {
    std::uint32_t user_index = 0;
    std::int32_t anchor = 0;       // global anchor index
    std::int32_t next_anchor = 0;  // global anchor index
    double planned_stay_seconds = 0.0;  // lognormal draw before quantization
    std::int32_t app = 0;          // app emitted during this dwell
    bool signal = false;           // app encoded the next anchor
};

struct World {
    std::vector<GeoRecord> geo;      // user-major, time-ordered within a user
    std::vector<UsageEvent> events;  // same ordering
    std::vector<GeoPoint> anchors;   // global anchor table
    std::vector<DwellTruth> dwells;
};

// Simulates every user moving among personal and shared anchor points with
// lognormal dwells and straight-line transits, emitting geo records on the
// cadence grid plus app / sensor / broadcast usage events. All randomness
// derives from cfg.rng_seed, with one child stream per user.
World generate_world(const WorldConfig& cfg);

struct GapConfig {
    double gap_rate = 0.0;           // per-record probability that a gap starts
    std::int64_t min_seconds = 600;  // gap length drawn uniformly from this range
    std::int64_t max_seconds = 7200;

    void validate() const;
};

// Deletes contiguous spans from the geo stream to simulate device-off
// periods. Gaps are drawn independently per user.
std::vector<GeoRecord> inject_gaps(std::span<const GeoRecord> stream, const GapConfig& cfg,
                                   Rng& rng);

std::string geo_csv(std::span<const GeoRecord> stream);
std::string events_csv(std::span<const UsageEvent> events);

}  // namespace mobility
