#include "mobility/synthgen.hpp"

#include "stats_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace mobility;

namespace {

WorldConfig tiny_world() {
    WorldConfig cfg;
    cfg.n_users = 1;
    cfg.n_anchors_per_user = 4;
    cfg.sim_days = 1;
    cfg.n_apps = 20;
    cfg.n_sensors = 8;
    cfg.n_broadcasts = 6;
    cfg.rng_seed = 1234;
    return cfg;
}

}  // namespace

TEST_CASE("one user for one day at 60 s cadence gives exactly 1440 geo points") {
    const World world = generate_world(tiny_world());
    CHECK(world.geo.size() == 1440);
    for (std::size_t i = 1; i < world.geo.size(); ++i)
        CHECK(world.geo[i].timestamp - world.geo[i - 1].timestamp == 60);
}

TEST_CASE("same seed twice gives byte-identical csv output") {
    const WorldConfig cfg = tiny_world();
    const World w1 = generate_world(cfg);
    const World w2 = generate_world(cfg);
    CHECK(geo_csv(w1.geo) == geo_csv(w2.geo));
    CHECK(events_csv(w1.events) == events_csv(w2.events));
}

TEST_CASE("different seeds give different worlds") {
    WorldConfig cfg = tiny_world();
    const World w1 = generate_world(cfg);
    cfg.rng_seed = 999;
    const World w2 = generate_world(cfg);
    CHECK(geo_csv(w1.geo) != geo_csv(w2.geo));
}

TEST_CASE("zero signal strength decouples dwell apps from the next anchor") {
    WorldConfig cfg = tiny_world();
    cfg.n_users = 6;
    cfg.n_anchors_per_user = 5;
    cfg.sim_days = 45;  // plenty of dwells
    cfg.feature_signal_strength = 0.0;
    const World world = generate_world(cfg);
    REQUIRE(world.dwells.size() >= 10000);

    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    pairs.reserve(10000);
    for (std::size_t i = 0; i < 10000; ++i)
        pairs.push_back({world.dwells[i].app, world.dwells[i].next_anchor});
    const double p = testsupport::chi_square_independence_pvalue(pairs);
    CHECK(p > 0.01);
}

TEST_CASE("full signal strength pins the dwell app to the next anchor") {
    WorldConfig cfg = tiny_world();
    cfg.sim_days = 10;
    cfg.feature_signal_strength = 1.0;
    const World world = generate_world(cfg);
    for (const DwellTruth& d : world.dwells) {
        CHECK(d.signal);
        CHECK(d.app == d.next_anchor % cfg.n_apps);
    }
}

TEST_CASE("planned dwells follow the configured lognormal") {
    WorldConfig cfg = tiny_world();
    cfg.sim_days = 300;  // one user, many dwells
    cfg.dwell_sigma_user_jitter = 0.0;
    const World world = generate_world(cfg);
    REQUIRE(world.dwells.size() >= 10000);

    std::vector<double> sample;
    sample.reserve(10000);
    for (std::size_t i = 0; i < 10000; ++i)
        sample.push_back(world.dwells[i].planned_stay_seconds);
    const double d = testsupport::ks_statistic(sample, [&](double x) {
        return testsupport::lognormal_cdf(x, cfg.dwell_lognormal_mu, cfg.dwell_lognormal_sigma);
    });
    CHECK(d < 0.05);
}

TEST_CASE("all event indices respect the configured dimensions") {
    WorldConfig cfg = tiny_world();
    cfg.sim_days = 3;
    const World world = generate_world(cfg);
    CHECK(!world.events.empty());
    for (const UsageEvent& e : world.events) {
        switch (e.kind) {
            case EventKind::AppUse: CHECK(e.index < cfg.n_apps); break;
            case EventKind::SensorReading: CHECK(e.index < cfg.n_sensors); break;
            case EventKind::Broadcast: CHECK(e.index < cfg.n_broadcasts); break;
        }
        CHECK(e.index >= 0);
    }
}

TEST_CASE("events are time-ordered within each user") {
    WorldConfig cfg = tiny_world();
    cfg.n_users = 3;
    const World world = generate_world(cfg);
    std::map<std::uint32_t, std::int64_t> last;
    for (const UsageEvent& e : world.events) {
        const auto it = last.find(e.user_index);
        if (it != last.end()) CHECK(e.timestamp >= it->second);
        last[e.user_index] = e.timestamp;
    }
}

TEST_CASE("gap injection with rate zero is the identity") {
    const World world = generate_world(tiny_world());
    Rng rng(5);
    GapConfig cfg;
    cfg.gap_rate = 0.0;
    const auto out = inject_gaps(world.geo, cfg, rng);
    REQUIRE(out.size() == world.geo.size());
    CHECK(geo_csv(out) == geo_csv(world.geo));
}

TEST_CASE("gap covering the whole stream deletes everything") {
    const World world = generate_world(tiny_world());
    Rng rng(5);
    GapConfig cfg;
    cfg.gap_rate = 1.0;
    cfg.min_seconds = 90000;  // longer than the simulated day
    cfg.max_seconds = 90000;
    const auto out = inject_gaps(world.geo, cfg, rng);
    CHECK(out.empty());
}

TEST_CASE("deleted fraction approaches the renewal-process expectation") {
    WorldConfig wcfg = tiny_world();
    wcfg.sim_days = 5;
    const World world = generate_world(wcfg);

    GapConfig cfg;
    cfg.gap_rate = 0.01;
    cfg.min_seconds = 300;
    cfg.max_seconds = 3000;

    // E[deleted per gap]: records on the cadence grid inside [t, t+L) with L
    // uniform over integers [a, b]. E[kept before a gap] = (1-p)/p.
    const double cadence = static_cast<double>(wcfg.record_cadence);
    double expected_deleted = 0.0;
    for (std::int64_t len = cfg.min_seconds; len <= cfg.max_seconds; ++len)
        expected_deleted += std::ceil(static_cast<double>(len) / cadence);
    expected_deleted /= static_cast<double>(cfg.max_seconds - cfg.min_seconds + 1);
    const double expected_kept = (1.0 - cfg.gap_rate) / cfg.gap_rate;
    const double expected_fraction = expected_deleted / (expected_deleted + expected_kept);

    double total_fraction = 0.0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const auto out = inject_gaps(world.geo, cfg, rng);
        total_fraction +=
            1.0 - static_cast<double>(out.size()) / static_cast<double>(world.geo.size());
    }
    const double mean_fraction = total_fraction / 100.0;
    CHECK(mean_fraction == doctest::Approx(expected_fraction).epsilon(0.10));
}

TEST_CASE("invalid configs are rejected") {
    WorldConfig cfg = tiny_world();
    cfg.feature_signal_strength = 1.5;
    CHECK_THROWS_AS(generate_world(cfg), std::invalid_argument);
    GapConfig gaps;
    gaps.gap_rate = -0.1;
    Rng rng(1);
    CHECK_THROWS_AS(inject_gaps(std::vector<GeoRecord>{}, gaps, rng), std::invalid_argument);
}
