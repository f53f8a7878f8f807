#include "mobility/features.hpp"

#include <doctest.h>

using namespace mobility;

namespace {

const FeatureDimensions kDims{10, 4, 6};

std::vector<LocationRecord> window(Timestamp begin, Timestamp end) {
    std::vector<LocationRecord> out;
    for (Timestamp t = begin; t <= end; t += 60) {
        LocationRecord r;
        r.timestamp = t;
        r.location_ids.push_back({5, 0});
        out.push_back(r);
    }
    return out;
}

UsageEvent app(std::uint32_t user, Timestamp ts, std::int32_t index) {
    return {user, ts, EventKind::AppUse, index, 0.0};
}
UsageEvent sensor(std::uint32_t user, Timestamp ts, std::int32_t index, double value) {
    return {user, ts, EventKind::SensorReading, index, value};
}
UsageEvent broadcast(std::uint32_t user, Timestamp ts, std::int32_t index) {
    return {user, ts, EventKind::Broadcast, index, 0.0};
}

}  // namespace

TEST_CASE("empty event window still populates the time fields") {
    const UsageEventIndex index(std::vector<UsageEvent>{});
    const auto history = window(3600, 7200);
    const auto fv = extract_features(history, 0, index, kDims);
    for (const auto v : fv.app) CHECK(v == 0);
    for (const auto v : fv.sensor) CHECK(v == 0.0);
    for (const auto v : fv.broadcast) CHECK(v == 0u);
    CHECK(fv.time.begin_hour == 1);
    CHECK(fv.time.end_hour == 2);
    CHECK(fv.time.begin_dow == 4);  // epoch day is a Thursday
}

TEST_CASE("a single app event sets exactly one bit") {
    const UsageEventIndex index(std::vector<UsageEvent>{app(0, 3700, 3)});
    const auto fv = extract_features(window(3600, 7200), 0, index, kDims);
    for (std::int32_t i = 0; i < kDims.n_apps; ++i) CHECK(fv.app[i] == (i == 3 ? 1 : 0));
}

TEST_CASE("sensor means average the readings inside the window") {
    const UsageEventIndex index(std::vector<UsageEvent>{
        sensor(0, 3700, 2, 1.0), sensor(0, 3800, 2, 3.0), sensor(0, 9000, 2, 100.0)});
    const auto fv = extract_features(window(3600, 7200), 0, index, kDims);
    CHECK(fv.sensor[2] == doctest::Approx(2.0));
    CHECK(fv.sensor[0] == 0.0);
}

TEST_CASE("sensor means match a naive full-scan oracle on random windows") {
    Rng rng(3);
    std::vector<UsageEvent> events;
    for (int i = 0; i < 3000; ++i)
        events.push_back(sensor(0, static_cast<Timestamp>(rng.uniform_index(50000)),
                                static_cast<std::int32_t>(rng.uniform_index(kDims.n_sensors)),
                                rng.normal()));
    const UsageEventIndex index(events);

    for (int trial = 0; trial < 20; ++trial) {
        const Timestamp begin = static_cast<Timestamp>(rng.uniform_index(40000));
        const Timestamp end = begin + 60 * (1 + static_cast<Timestamp>(rng.uniform_index(100)));
        const auto fv = extract_features(window(begin, end), 0, index, kDims);

        for (std::int32_t j = 0; j < kDims.n_sensors; ++j) {
            double sum = 0.0;
            int count = 0;
            for (const UsageEvent& e : events) {
                if (e.index != j) continue;
                if (e.timestamp < begin || e.timestamp > window(begin, end).back().timestamp)
                    continue;
                sum += e.value;
                ++count;
            }
            const double expected = count == 0 ? 0.0 : sum / count;
            CHECK(fv.sensor[j] == doctest::Approx(expected));
        }
    }
}

TEST_CASE("broadcast counts add over a window partition") {
    Rng rng(7);
    std::vector<UsageEvent> events;
    for (int i = 0; i < 2000; ++i)
        events.push_back(broadcast(0, static_cast<Timestamp>(rng.uniform_index(86400)),
                                   static_cast<std::int32_t>(rng.uniform_index(kDims.n_broadcasts))));
    const UsageEventIndex index(events);

    // split [0, 36000] at a record boundary: [0, 18000] and [18060, 36000]
    const auto whole = extract_features(window(0, 36000), 0, index, kDims);
    const auto left = extract_features(window(0, 18000), 0, index, kDims);
    const auto right = extract_features(window(18060, 36000), 0, index, kDims);
    for (std::int32_t b = 0; b < kDims.n_broadcasts; ++b)
        CHECK(whole.broadcast[b] == left.broadcast[b] + right.broadcast[b]);
}

TEST_CASE("duplicating an app event never changes the app vector") {
    std::vector<UsageEvent> events = {app(0, 100, 5), app(0, 200, 7)};
    const UsageEventIndex once(events);
    events.push_back(app(0, 150, 5));
    const UsageEventIndex twice(events);
    const auto a = extract_features(window(0, 600), 0, once, kDims);
    const auto b = extract_features(window(0, 600), 0, twice, kDims);
    CHECK(a.app == b.app);
}

TEST_CASE("events outside the window never affect the output") {
    std::vector<UsageEvent> events = {app(0, 100, 1), sensor(0, 200, 1, 5.0), broadcast(0, 90, 2)};
    const UsageEventIndex base(events);
    const auto before = extract_features(window(3600, 7200), 0, base, kDims);

    events.push_back(app(0, 3599, 2));        // one second before the window
    events.push_back(app(0, 7201, 3));        // one second after
    events.push_back(sensor(0, 99999, 0, 9)); // far outside
    const UsageEventIndex perturbed(events);
    const auto after = extract_features(window(3600, 7200), 0, perturbed, kDims);
    CHECK(before.app == after.app);
    CHECK(before.sensor == after.sensor);
    CHECK(before.broadcast == after.broadcast);
}

TEST_CASE("another user's events are invisible") {
    const UsageEventIndex index(std::vector<UsageEvent>{app(1, 3700, 3)});
    const auto fv = extract_features(window(3600, 7200), 0, index, kDims);
    CHECK(fv.app[3] == 0);
}

TEST_CASE("out-of-range event indices are rejected by name") {
    const UsageEventIndex index(std::vector<UsageEvent>{app(0, 3700, 99)});
    CHECK_THROWS_AS(extract_features(window(3600, 7200), 0, index, kDims), std::out_of_range);
}

TEST_CASE("window boundaries are inclusive on both ends") {
    const UsageEventIndex index(
        std::vector<UsageEvent>{app(0, 3600, 1), app(0, 7200, 2)});
    const auto fv = extract_features(window(3600, 7200), 0, index, kDims);
    CHECK(fv.app[1] == 1);
    CHECK(fv.app[2] == 1);
}
