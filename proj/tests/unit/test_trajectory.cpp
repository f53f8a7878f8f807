#include "mobility/trajectory.hpp"

#include "mobility/rng.hpp"

#include <doctest.h>

#include <vector>

using namespace mobility;

namespace {

LocationRecord rec(Timestamp ts, LocationId id, std::int32_t m = 5) {
    LocationRecord r;
    r.timestamp = ts;
    r.location_ids.push_back({m, id});
    return r;
}

std::vector<LocationRecord> records_at(const std::vector<Timestamp>& times) {
    std::vector<LocationRecord> out;
    for (const Timestamp t : times) out.push_back(rec(t, 0));
    return out;
}

}  // namespace

TEST_CASE("gap cut plus duration filter can drop everything") {
    const auto records = records_at({0, 60, 120, 600, 660});
    const auto trajs = extract_trajectories("u0", records, {});
    CHECK(trajs.empty());  // pieces of 120 s and 60 s, both under an hour
}

TEST_CASE("an unbroken cadence stream long enough survives as one trajectory") {
    std::vector<LocationRecord> records;
    for (int i = 0; i < 70; ++i) records.push_back(rec(i * 60, 0));
    const auto trajs = extract_trajectories("u0", records, {});
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].records.size() == 70);
    CHECK(trajs[0].duration() == 4140);
}

TEST_CASE("gap exactly at the threshold does not split") {
    std::vector<LocationRecord> records;
    Timestamp t = 0;
    for (int i = 0; i < 100; ++i) {
        records.push_back(rec(t, 0));
        t += (i == 50) ? 300 : 60;  // one gap equal to the threshold
    }
    const auto trajs = extract_trajectories("u0", records, {});
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].records.size() == 100);
}

TEST_CASE("piece count equals one plus the number of over-threshold gaps") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<LocationRecord> records;
        Timestamp t = 0;
        const int n = 20 + static_cast<int>(rng.uniform_index(200));
        for (int i = 0; i < n; ++i) {
            records.push_back(rec(t, 0));
            t += rng.bernoulli(0.1) ? 301 + static_cast<Timestamp>(rng.uniform_index(1000))
                                    : 1 + static_cast<Timestamp>(rng.uniform_index(300));
        }

        // Independent gap scan over the same stream: pieces before duration
        // filtering, and the survivors at the configured minimum.
        ExtractionConfig cfg;
        cfg.gap_threshold = 300;
        cfg.min_duration = 300;

        std::size_t gaps = 0, pieces = 0, survivors = 0;
        std::size_t begin = 0;
        for (std::size_t i = 1; i <= records.size(); ++i) {
            if (i == records.size() || records[i].timestamp - records[i - 1].timestamp > 300) {
                if (i < records.size()) ++gaps;
                ++pieces;
                if (records[i - 1].timestamp - records[begin].timestamp >= cfg.min_duration)
                    ++survivors;
                begin = i;
            }
        }
        CHECK(pieces == gaps + 1);

        const auto trajs = extract_trajectories("u0", records, cfg);
        CHECK(trajs.size() == survivors);
    }
}

TEST_CASE("record count is conserved between kept and dropped pieces") {
    Rng rng(123);
    std::vector<LocationRecord> records;
    Timestamp t = 0;
    for (int i = 0; i < 500; ++i) {
        records.push_back(rec(t, 0));
        t += rng.bernoulli(0.05) ? 1000 : 60;
    }
    ExtractionConfig cfg;
    cfg.min_duration = 1800;
    const auto trajs = extract_trajectories("u0", records, cfg);

    std::size_t kept = 0;
    for (const auto& traj : trajs) kept += traj.records.size();

    std::size_t dropped = 0;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= records.size(); ++i) {
        if (i == records.size() || records[i].timestamp - records[i - 1].timestamp > 300) {
            const Timestamp dur = records[i - 1].timestamp - records[begin].timestamp;
            if (dur < cfg.min_duration) dropped += i - begin;
            begin = i;
        }
    }
    CHECK(kept + dropped == records.size());
}

TEST_CASE("extraction is idempotent") {
    Rng rng(7);
    std::vector<LocationRecord> records;
    Timestamp t = 0;
    for (int i = 0; i < 400; ++i) {
        records.push_back(rec(t, 0));
        t += rng.bernoulli(0.03) ? 2000 : 60;
    }
    const auto first = extract_trajectories("u0", records, {});
    for (const auto& traj : first) {
        const auto again = extract_trajectories(traj.user_id, traj.records, {});
        REQUIRE(again.size() == 1);
        CHECK(again[0].records == traj.records);
    }
}

TEST_CASE("empty input gives empty output") {
    CHECK(extract_trajectories("u0", std::vector<LocationRecord>{}, {}).empty());
}

TEST_CASE("unsorted input is rejected") {
    auto records = records_at({0, 120, 60});
    CHECK_THROWS_AS(extract_trajectories("u0", records, {}), std::invalid_argument);
}

TEST_CASE("stay segments of (A,A,B)") {
    std::vector<LocationRecord> records = {rec(0, 'A'), rec(60, 'A'), rec(120, 'B')};
    const auto segs = stay_segments(records, 5);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0] == StaySegment{'A', 0, 120, 120});
    CHECK(segs[1] == StaySegment{'B', 120, 120, 0});
}

TEST_CASE("stay segments of (A,A,B,B,C,A) at one-minute cadence") {
    std::vector<LocationRecord> records = {rec(0, 'A'),   rec(60, 'A'),  rec(120, 'B'),
                                           rec(180, 'B'), rec(240, 'C'), rec(300, 'A')};
    const auto segs = stay_segments(records, 5);
    REQUIRE(segs.size() == 4);
    CHECK(segs[0] == StaySegment{'A', 0, 120, 120});
    CHECK(segs[1] == StaySegment{'B', 120, 240, 120});
    CHECK(segs[2] == StaySegment{'C', 240, 300, 60});
    CHECK(segs[3] == StaySegment{'A', 300, 300, 0});
}

TEST_CASE("stays sum to the trajectory duration") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<LocationRecord> records;
        Timestamp t = 0;
        for (int i = 0; i < 200; ++i) {
            records.push_back(rec(t, static_cast<LocationId>(rng.uniform_index(4))));
            t += 30 + static_cast<Timestamp>(rng.uniform_index(90));
        }
        const auto segs = stay_segments(records, 5);
        Timestamp total = 0;
        for (const auto& s : segs) {
            CHECK(s.stay_seconds >= 0);
            total += s.stay_seconds;
        }
        CHECK(total == records.back().timestamp - records.front().timestamp);
    }
}

TEST_CASE("segment round trip reproduces the deduplicated sequence") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<LocationRecord> records;
        Timestamp t = 0;
        for (int i = 0; i < 150; ++i) {
            records.push_back(rec(t, static_cast<LocationId>(rng.uniform_index(3))));
            t += 60;
        }
        std::vector<LocationId> dedup;
        for (const auto& r : records) {
            const LocationId id = r.id_at(5);
            if (dedup.empty() || dedup.back() != id) dedup.push_back(id);
        }
        const auto segs = stay_segments(records, 5);
        REQUIRE(segs.size() == dedup.size());
        for (std::size_t i = 0; i < segs.size(); ++i) CHECK(segs[i].location == dedup[i]);
        for (std::size_t i = 1; i < segs.size(); ++i)
            CHECK(segs[i].location != segs[i - 1].location);
    }
}

TEST_CASE("missing granularity key is reported by name") {
    std::vector<LocationRecord> records = {rec(0, 1, 5)};
    CHECK_THROWS_WITH_AS(stay_segments(records, 25),
                         "location record has no granularity m=25", std::out_of_range);
}

TEST_CASE("extraction config is validated") {
    ExtractionConfig bad;
    bad.min_duration = 100;  // below gap_threshold
    CHECK_THROWS_AS(extract_trajectories("u0", records_at({0, 60}), bad), std::invalid_argument);
}
