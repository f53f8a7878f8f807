#include "mobility/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace mobility {
namespace {

constexpr double kWorldExtent = 1000.0;
constexpr int kPublicAnchors = 8;
constexpr double kTransitSpeed = 3.0;        // plane units per second
constexpr std::int64_t kAppReemitPeriod = 300;
constexpr std::int64_t kSensorPeriod = 180;
constexpr std::int64_t kMaxDwellSeconds = 14400;
constexpr double kNoiseAppPerDwell = 0.5;    // extra random-app events
constexpr double kNoiseBroadcastPerDwell = 0.3;

// Informative sensor channels. Everything else stays silent, which the
// feature extractor reads as a 0.0 mean.
constexpr std::int32_t kSensorSpeed = 0;
constexpr std::int32_t kSensorMotion = 1;
constexpr std::int32_t kSensorAccel = 2;

struct Phase {
    bool dwelling = true;
    std::int32_t from_anchor = 0;  // anchor while dwelling, source while in transit
    std::int32_t to_anchor = 0;
    double t_start = 0.0;
    double t_end = 0.0;
};

char* append_double(char* p, double v) {
    return p + std::snprintf(p, 40, "%.17g", v);
}

}  // namespace

void WorldConfig::validate() const {
    if (n_users < 1) throw std::invalid_argument("n_users must be >= 1");
    if (n_anchors_per_user < 1) throw std::invalid_argument("n_anchors_per_user must be >= 1");
    if (sim_days < 1) throw std::invalid_argument("sim_days must be >= 1");
    if (record_cadence < 1) throw std::invalid_argument("record_cadence must be >= 1");
    if (n_apps < 1 || n_sensors < 1 || n_broadcasts < 1)
        throw std::invalid_argument("feature dimensions must be >= 1");
    if (feature_signal_strength < 0.0 || feature_signal_strength > 1.0)
        throw std::invalid_argument("feature_signal_strength must be in [0,1]");
    if (dwell_lognormal_sigma <= 0.0) throw std::invalid_argument("dwell sigma must be > 0");
    if (dwell_sigma_user_jitter < 0.0) throw std::invalid_argument("dwell jitter must be >= 0");
}

void GapConfig::validate() const {
    if (gap_rate < 0.0 || gap_rate > 1.0) throw std::invalid_argument("gap_rate must be in [0,1]");
    if (min_seconds < 1 || max_seconds < min_seconds)
        throw std::invalid_argument("gap length range is invalid");
}

World generate_world(const WorldConfig& cfg) {
    cfg.validate();
    const Rng root(cfg.rng_seed);
    World world;

    // Global anchor table: per-user personal anchors first, shared ones last.
    const std::int32_t anchors_total = cfg.n_users * cfg.n_anchors_per_user + kPublicAnchors;
    world.anchors.resize(anchors_total);
    {
        Rng anchor_rng = root.derive(0xA17C0ULL);
        for (auto& a : world.anchors)
            a = {anchor_rng.uniform(0.0, kWorldExtent), anchor_rng.uniform(0.0, kWorldExtent)};
    }

    const std::int64_t horizon = cfg.horizon_seconds();
    const int candidates = cfg.n_anchors_per_user + kPublicAnchors;

    for (int u = 0; u < cfg.n_users; ++u) {
        Rng rng = root.derive(0x05e7ULL, static_cast<std::uint64_t>(u));

        // Global indices of this user's candidate anchors.
        std::vector<std::int32_t> local_to_global(candidates);
        for (int j = 0; j < cfg.n_anchors_per_user; ++j)
            local_to_global[j] = u * cfg.n_anchors_per_user + j;
        for (int p = 0; p < kPublicAnchors; ++p)
            local_to_global[cfg.n_anchors_per_user + p] =
                cfg.n_users * cfg.n_anchors_per_user + p;

        // Per-user movement preferences. Cubing the uniform draw makes a few
        // transitions dominate, giving history some predictive structure.
        std::vector<double> pref(static_cast<std::size_t>(candidates) * candidates, 0.0);
        for (int i = 0; i < candidates; ++i) {
            for (int j = 0; j < candidates; ++j) {
                if (i == j) continue;
                const double w = rng.uniform01();
                pref[i * candidates + j] = w * w * w + 1e-4;
            }
        }

        const double mu_u = cfg.dwell_lognormal_mu + cfg.dwell_sigma_user_jitter * rng.normal();
        const double sigma_u =
            std::max(0.05, cfg.dwell_lognormal_sigma + 0.5 * cfg.dwell_sigma_user_jitter * rng.normal());

        // Itinerary: alternating dwell and transit phases until the horizon.
        std::vector<Phase> phases;
        int cur = static_cast<int>(rng.uniform_index(candidates));
        double t = 0.0;
        while (t < static_cast<double>(horizon)) {
            const double planned = rng.lognormal(mu_u, sigma_u);
            const double stay = std::clamp(planned, 2.0 * static_cast<double>(cfg.record_cadence),
                                           static_cast<double>(kMaxDwellSeconds));
            const int next = static_cast<int>(rng.weighted_index(
                std::span<const double>(pref.data() + cur * candidates, candidates)));

            Phase dwell;
            dwell.dwelling = true;
            dwell.from_anchor = local_to_global[cur];
            dwell.to_anchor = local_to_global[next];
            dwell.t_start = t;
            dwell.t_end = t + stay;
            phases.push_back(dwell);

            world.dwells.push_back({static_cast<std::uint32_t>(u), local_to_global[cur],
                                    local_to_global[next], planned, 0, false});

            const double dist = distance(world.anchors[local_to_global[cur]],
                                         world.anchors[local_to_global[next]]);
            Phase transit;
            transit.dwelling = false;
            transit.from_anchor = local_to_global[cur];
            transit.to_anchor = local_to_global[next];
            transit.t_start = dwell.t_end;
            transit.t_end = dwell.t_end + dist / kTransitSpeed;
            phases.push_back(transit);

            t = transit.t_end;
            cur = next;
        }

        // App and broadcast events per dwell.
        const std::size_t dwell_base = world.dwells.size() - phases.size() / 2;
        std::vector<UsageEvent> events;
        for (std::size_t pi = 0; pi < phases.size(); pi += 2) {
            Phase& dwell = phases[pi];
            DwellTruth& truth = world.dwells[dwell_base + pi / 2];

            const bool signal = rng.bernoulli(cfg.feature_signal_strength);
            const std::int32_t app = signal
                                         ? truth.next_anchor % cfg.n_apps
                                         : static_cast<std::int32_t>(rng.uniform_index(cfg.n_apps));
            truth.app = app;
            truth.signal = signal;

            const auto start = static_cast<std::int64_t>(std::ceil(dwell.t_start));
            for (std::int64_t ts = start; ts < static_cast<double>(dwell.t_end) && ts < horizon;
                 ts += kAppReemitPeriod)
                events.push_back({static_cast<std::uint32_t>(u), ts, EventKind::AppUse, app, 0.0});

            if (start < horizon)
                events.push_back({static_cast<std::uint32_t>(u), start, EventKind::Broadcast,
                                  1 % cfg.n_broadcasts, 0.0});
            const auto depart = static_cast<std::int64_t>(dwell.t_end);
            if (depart < horizon)
                events.push_back(
                    {static_cast<std::uint32_t>(u), depart, EventKind::Broadcast, 0, 0.0});

            if (rng.bernoulli(kNoiseAppPerDwell)) {
                const auto ts = static_cast<std::int64_t>(
                    rng.uniform(dwell.t_start, std::max(dwell.t_start + 1.0, dwell.t_end)));
                const auto app_noise = static_cast<std::int32_t>(rng.uniform_index(cfg.n_apps));
                if (ts < horizon)
                    events.push_back(
                        {static_cast<std::uint32_t>(u), ts, EventKind::AppUse, app_noise, 0.0});
            }
            if (rng.bernoulli(kNoiseBroadcastPerDwell)) {
                const auto ts = static_cast<std::int64_t>(
                    rng.uniform(dwell.t_start, std::max(dwell.t_start + 1.0, dwell.t_end)));
                const auto b = static_cast<std::int32_t>(rng.uniform_index(cfg.n_broadcasts));
                if (ts < horizon)
                    events.push_back(
                        {static_cast<std::uint32_t>(u), ts, EventKind::Broadcast, b, 0.0});
            }
        }

        // Geo records on the cadence grid plus movement-state sensors.
        std::size_t phase_idx = 0;
        auto position_at = [&](double when) -> GeoPoint {
            while (phase_idx + 1 < phases.size() && when >= phases[phase_idx].t_end) ++phase_idx;
            const Phase& ph = phases[phase_idx];
            if (ph.dwelling) return world.anchors[ph.from_anchor];
            const double span = ph.t_end - ph.t_start;
            const double frac = span <= 0.0 ? 1.0 : std::clamp((when - ph.t_start) / span, 0.0, 1.0);
            const GeoPoint& a = world.anchors[ph.from_anchor];
            const GeoPoint& b = world.anchors[ph.to_anchor];
            return {a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y)};
        };
        auto moving_now = [&]() -> bool {
            // phase_idx was advanced by position_at for this timestamp
            return !phases[phase_idx].dwelling;
        };

        for (std::int64_t ts = 0; ts < horizon; ts += cfg.record_cadence) {
            world.geo.push_back(
                {static_cast<std::uint32_t>(u), ts, position_at(static_cast<double>(ts))});
        }

        phase_idx = 0;
        for (std::int64_t ts = 0; ts < horizon; ts += kSensorPeriod) {
            position_at(static_cast<double>(ts));
            const bool moving = moving_now();
            const double speed = moving ? kTransitSpeed : 0.0;
            events.push_back({static_cast<std::uint32_t>(u), ts, EventKind::SensorReading,
                              kSensorSpeed, speed + rng.normal(0.0, 0.05)});
            if (kSensorMotion < cfg.n_sensors)
                events.push_back({static_cast<std::uint32_t>(u), ts, EventKind::SensorReading,
                                  kSensorMotion, (moving ? 1.0 : 0.0) + rng.normal(0.0, 0.02)});
            if (kSensorAccel < cfg.n_sensors)
                events.push_back({static_cast<std::uint32_t>(u), ts, EventKind::SensorReading,
                                  kSensorAccel, rng.normal(0.0, moving ? 2.0 : 0.3)});
        }

        std::stable_sort(events.begin(), events.end(),
                         [](const UsageEvent& a, const UsageEvent& b) {
                             return a.timestamp < b.timestamp;
                         });
        world.events.insert(world.events.end(), events.begin(), events.end());
    }
    return world;
}

std::vector<GeoRecord> inject_gaps(std::span<const GeoRecord> stream, const GapConfig& cfg,
                                   Rng& rng) {
    cfg.validate();
    std::vector<GeoRecord> out;
    out.reserve(stream.size());
    if (cfg.gap_rate == 0.0) {
        out.assign(stream.begin(), stream.end());
        return out;
    }

    std::uint32_t cur_user = 0;
    bool have_user = false;
    Rng user_rng(0);
    std::int64_t skip_until = 0;

    for (const GeoRecord& rec : stream) {
        if (!have_user || rec.user_index != cur_user) {
            cur_user = rec.user_index;
            have_user = true;
            user_rng = rng.derive(0x9a95ULL, cur_user);
            skip_until = std::numeric_limits<std::int64_t>::min();
        }
        if (rec.timestamp < skip_until) continue;
        if (user_rng.bernoulli(cfg.gap_rate)) {
            const std::int64_t len = user_rng.uniform_int(cfg.min_seconds, cfg.max_seconds);
            skip_until = rec.timestamp + len;
            continue;  // the gap swallows this record too
        }
        out.push_back(rec);
    }
    return out;
}

std::string geo_csv(std::span<const GeoRecord> stream) {
    std::string out = "user_id,timestamp,x,y\n";
    char buf[128];
    for (const GeoRecord& r : stream) {
        char* p = buf;
        p += std::snprintf(p, 48, "%s,%lld,", user_name(r.user_index).c_str(),
                           static_cast<long long>(r.timestamp));
        p = append_double(p, r.position.x);
        *p++ = ',';
        p = append_double(p, r.position.y);
        *p++ = '\n';
        out.append(buf, p - buf);
    }
    return out;
}

std::string events_csv(std::span<const UsageEvent> events) {
    std::string out = "user_id,timestamp,kind,index,value\n";
    char buf[160];
    for (const UsageEvent& e : events) {
        const char* kind = e.kind == EventKind::AppUse ? "app"
                           : e.kind == EventKind::SensorReading ? "sensor"
                                                                : "broadcast";
        char* p = buf;
        p += std::snprintf(p, 96, "%s,%lld,%s,%d,", user_name(e.user_index).c_str(),
                           static_cast<long long>(e.timestamp), kind, e.index);
        if (e.kind == EventKind::SensorReading)
            p = append_double(p, e.value);
        *p++ = '\n';
        out.append(buf, p - buf);
    }
    return out;
}

}  // namespace mobility
