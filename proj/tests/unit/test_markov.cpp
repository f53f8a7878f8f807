#include "mobility/markov.hpp"

#include "mobility/rng.hpp"

#include <doctest.h>

#include <vector>

using namespace mobility;

namespace {

// Brute-force oracle: count boundary transitions with an explicit pairwise
// scan over the deduplicated sequence.
MarkovModel oracle_fit(const std::vector<std::vector<LocationId>>& histories, std::int32_t m) {
    MarkovModel model = markov_init(m);
    for (const auto& h : histories) {
        std::vector<LocationId> dedup;
        for (const LocationId loc : h)
            if (dedup.empty() || dedup.back() != loc) dedup.push_back(loc);
        for (const LocationId loc : dedup) ++model.global_dist[loc];
        for (std::size_t i = 1; i < dedup.size(); ++i) ++model.at(dedup[i - 1], dedup[i]);
    }
    return model;
}

LocationId oracle_predict(const MarkovModel& model, LocationId current) {
    LocationId best = -1;
    std::int64_t best_count = 0;
    for (LocationId to = 0; to < model.m; ++to)
        if (model.at(current, to) > best_count) {
            best_count = model.at(current, to);
            best = to;
        }
    if (best >= 0) return best;
    best = -1;
    best_count = -1;
    for (LocationId loc = 0; loc < model.m; ++loc) {
        if (loc == current) continue;
        if (model.global_dist[loc] > best_count) {
            best_count = model.global_dist[loc];
            best = loc;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("single history (A,B,A) counts both directions once") {
    const std::vector<std::vector<LocationId>> histories = {{0, 1, 0}};
    const auto model = markov_fit(histories, 3);
    CHECK(model.at(0, 1) == 1);
    CHECK(model.at(1, 0) == 1);
    CHECK(model.global_dist[0] == 2);
    CHECK(model.global_dist[1] == 1);
}

TEST_CASE("constant history contributes no transitions but one run") {
    const std::vector<std::vector<LocationId>> histories = {{2, 2, 2}};
    const auto model = markov_fit(histories, 3);
    for (const std::int64_t c : model.counts) CHECK(c == 0);
    CHECK(model.global_dist[2] == 1);
}

TEST_CASE("predict picks the modal next location") {
    auto model = markov_init(4);
    model.at(0, 1) = 3;
    model.at(0, 2) = 1;
    CHECK(markov_predict(model, 0) == 1);
}

TEST_CASE("ties break to the smallest location id") {
    auto model = markov_init(4);
    model.at(0, 3) = 2;
    model.at(0, 1) = 2;
    CHECK(markov_predict(model, 0) == 1);
}

TEST_CASE("unseen state falls back to global frequency excluding current") {
    auto model = markov_init(4);
    model.global_dist = {1, 5, 2, 9};
    CHECK(markov_predict(model, 0) == 3);
    CHECK(markov_predict(model, 3) == 1);  // 3 itself is the global mode
}

TEST_CASE("prediction never equals the current location") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int32_t m = 2 + static_cast<std::int32_t>(rng.uniform_index(20));
        auto model = markov_init(m);
        for (int i = 0; i < 30; ++i) {
            const auto from = static_cast<LocationId>(rng.uniform_index(m));
            const auto to = static_cast<LocationId>(rng.uniform_index(m));
            if (from != to) model.at(from, to) += rng.uniform_index(5);
        }
        for (LocationId loc = 0; loc < m; ++loc)
            model.global_dist[loc] = static_cast<std::int64_t>(rng.uniform_index(10));
        for (LocationId current = 0; current < m; ++current)
            CHECK(markov_predict(model, current) != current);
    }
}

TEST_CASE("fit equals the brute-force pairwise scan on random histories") {
    Rng rng(7);
    for (const std::int32_t m : {5, 10, 25}) {
        std::vector<std::vector<LocationId>> histories;
        for (int h = 0; h < 300; ++h) {
            std::vector<LocationId> seq;
            const int n = 1 + static_cast<int>(rng.uniform_index(60));
            for (int i = 0; i < n; ++i)
                seq.push_back(static_cast<LocationId>(rng.uniform_index(m)));
            histories.push_back(std::move(seq));
        }
        const auto model = markov_fit(histories, m);
        const auto oracle = oracle_fit(histories, m);
        CHECK(model.counts == oracle.counts);
        CHECK(model.global_dist == oracle.global_dist);
        for (LocationId i = 0; i < m; ++i) CHECK(model.at(i, i) == 0);
        for (LocationId current = 0; current < m; ++current)
            CHECK(markov_predict(model, current) == oracle_predict(oracle, current));
    }
}

TEST_CASE("count monotonicity: adding a history never decreases a seen count") {
    auto model = markov_init(3);
    markov_add_history(model, std::vector<LocationId>{0, 1});
    const std::int64_t before = model.at(0, 1);
    markov_add_history(model, std::vector<LocationId>{0, 1, 2});
    CHECK(model.at(0, 1) == before + 1);
}

TEST_CASE("scaling all counts leaves every prediction unchanged") {
    Rng rng(11);
    auto model = markov_init(6);
    for (int i = 0; i < 40; ++i) {
        const auto from = static_cast<LocationId>(rng.uniform_index(6));
        const auto to = static_cast<LocationId>(rng.uniform_index(6));
        if (from != to) model.at(from, to) += 1 + rng.uniform_index(4);
    }
    auto scaled = model;
    for (auto& c : scaled.counts) c *= 7;
    for (auto& c : scaled.global_dist) c *= 7;
    for (LocationId current = 0; current < 6; ++current)
        CHECK(markov_predict(model, current) == markov_predict(scaled, current));
}

TEST_CASE("markov csv round-trips counts and the global distribution") {
    auto model = markov_init(4);
    model.at(0, 1) = 5;
    model.at(2, 3) = 2;
    model.global_dist = {4, 3, 2, 1};
    const auto restored = markov_from_csv(markov_csv(model));
    CHECK(restored.m == model.m);
    CHECK(restored.counts == model.counts);
    CHECK(restored.global_dist == model.global_dist);
}

TEST_CASE("out-of-range locations are rejected") {
    auto model = markov_init(3);
    CHECK_THROWS_AS(markov_add_history(model, std::vector<LocationId>{0, 5}), std::out_of_range);
    CHECK_THROWS_AS(markov_predict(model, 3), std::out_of_range);
}
