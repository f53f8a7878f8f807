#include "mobility/config.hpp"
#include "mobility/csv.hpp"
#include "mobility/io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace mobility;

TEST_CASE("key value parsing handles comments, blanks and whitespace") {
    const auto kv = KeyValueConfig::parse(
        "# a comment\n"
        "\n"
        "  world.n_users = 7 \n"
        "world.feature_signal_strength=0.5\n");
    CHECK(kv.get_int("world.n_users", 0) == 7);
    CHECK(kv.get_double("world.feature_signal_strength", 0.0) == doctest::Approx(0.5));
}

TEST_CASE("duplicate and malformed keys are rejected") {
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), std::invalid_argument);
    CHECK_THROWS_AS(KeyValueConfig::parse("just some text\n"), std::invalid_argument);
    CHECK_THROWS_AS(KeyValueConfig::parse(" = 3\n"), std::invalid_argument);
}

TEST_CASE("unknown keys are caught after consumption") {
    const auto kv = KeyValueConfig::parse("world.n_users = 2\nworld.n_userz = 3\n");
    CHECK_THROWS_WITH_AS(RunConfig::from_kv(kv), doctest::Contains("world.n_userz"),
                         std::invalid_argument);
}

TEST_CASE("run config round-trips through its echo") {
    const auto kv = KeyValueConfig::parse(
        "world.n_users = 4\n"
        "world.sim_days = 2\n"
        "granularity.m_values = 3, 6\n"
        "query.criteria = successive, important@5\n"
        "sweep.models = markov, lstm\n"
        "sweep.groups = app, app+sensor\n"
        "fusion.variant = forest_over_logits\n");
    const RunConfig cfg = RunConfig::from_kv(kv);
    CHECK(cfg.world.n_users == 4);
    CHECK(cfg.granularity.m_values == std::vector<std::int32_t>{3, 6});
    REQUIRE(cfg.criteria.size() == 2);
    CHECK(cfg.criteria[1] == TargetCriterion::important_at(5));
    REQUIRE(cfg.sweep_groups.size() == 2);
    CHECK(cfg.sweep_groups[1].label() == "app,sensor");

    // echo -> parse -> echo is a fixed point
    const RunConfig again = RunConfig::from_kv(KeyValueConfig::parse(cfg.echo()));
    CHECK(again.echo() == cfg.echo());
}

TEST_CASE("bad typed values raise with the key name") {
    const auto kv = KeyValueConfig::parse("train.batch_size = many\n");
    CHECK_THROWS_WITH_AS(RunConfig::from_kv(kv), doctest::Contains("train.batch_size"),
                         std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent values") {
    auto cfg = RunConfig{};
    cfg.split.train = 0.9;  // now sums to 1.2
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    auto cfg2 = RunConfig{};
    cfg2.granularity.m_values = {10, 5};
    CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);
}

TEST_CASE("geo csv round-trips") {
    WorldConfig wcfg;
    wcfg.n_users = 2;
    wcfg.n_anchors_per_user = 3;
    wcfg.sim_days = 1;
    wcfg.n_apps = 10;
    wcfg.n_sensors = 5;
    wcfg.n_broadcasts = 4;
    const World world = generate_world(wcfg);
    const std::string text = geo_csv(world.geo);
    const auto parsed = read_geo_csv(text);
    REQUIRE(parsed.size() == world.geo.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].user_index == world.geo[i].user_index);
        CHECK(parsed[i].timestamp == world.geo[i].timestamp);
        CHECK(parsed[i].position == world.geo[i].position);  // %.17g is lossless
    }
}

TEST_CASE("events csv round-trips") {
    WorldConfig wcfg;
    wcfg.n_users = 1;
    wcfg.n_anchors_per_user = 3;
    wcfg.sim_days = 1;
    wcfg.n_apps = 10;
    wcfg.n_sensors = 5;
    wcfg.n_broadcasts = 4;
    const World world = generate_world(wcfg);
    const auto parsed = read_events_csv(events_csv(world.events));
    REQUIRE(parsed.size() == world.events.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].kind == world.events[i].kind);
        CHECK(parsed[i].index == world.events[i].index);
        CHECK(parsed[i].timestamp == world.events[i].timestamp);
        if (parsed[i].kind == EventKind::SensorReading)
            CHECK(parsed[i].value == world.events[i].value);
    }
}

TEST_CASE("record stream csv round-trips with granularity columns") {
    std::map<std::string, std::vector<LocationRecord>> streams;
    for (int u = 0; u < 2; ++u) {
        for (int i = 0; i < 5; ++i) {
            LocationRecord rec;
            rec.timestamp = i * 60;
            rec.location_ids.push_back({5, static_cast<LocationId>(i % 5)});
            rec.location_ids.push_back({10, static_cast<LocationId>(i % 10)});
            streams["u" + std::to_string(u)].push_back(rec);
        }
    }
    const std::vector<std::int32_t> ms = {5, 10};
    const std::string text = records_csv(streams, ms);
    CHECK(text.rfind("user_id,timestamp,loc_m5,loc_m10\n", 0) == 0);
    const auto parsed = read_records_csv(text);
    CHECK(parsed == streams);
}

TEST_CASE("trajectories csv round-trips ids and order") {
    std::vector<Trajectory> trajs;
    for (int t = 0; t < 3; ++t) {
        Trajectory traj;
        traj.user_id = "u" + std::to_string(t % 2);
        for (int i = 0; i < 4; ++i) {
            LocationRecord rec;
            rec.timestamp = i * 60;
            rec.location_ids.push_back({5, static_cast<LocationId>((t + i) % 5)});
            traj.records.push_back(rec);
        }
        trajs.push_back(traj);
    }
    const std::vector<std::int32_t> ms = {5};
    const auto parsed = read_trajectories_csv(trajectories_csv(trajs, ms));
    REQUIRE(parsed.size() == trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        CHECK(parsed[i].user_id == trajs[i].user_id);
        CHECK(parsed[i].records == trajs[i].records);
    }
}

TEST_CASE("malformed csv inputs raise") {
    CHECK_THROWS_AS(read_geo_csv("wrong,header\n"), std::invalid_argument);
    CHECK_THROWS_AS(read_geo_csv("user_id,timestamp,x,y\nu0,notanumber,0,0\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(read_events_csv("user_id,timestamp,kind,index,value\nu0,1,poke,0,\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(read_records_csv("user_id,timestamp,bogus\n"), std::invalid_argument);
}

TEST_CASE("atomic writes land complete and hash helpers agree") {
    const auto dir = std::filesystem::temp_directory_path() / "mobility_io_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "sample.txt";
    atomic_write_file(path, "hello world\n");
    CHECK(read_file(path) == "hello world\n");
    CHECK(file_hash(path) == content_hash("hello world\n"));
    CHECK(hash_hex(content_hash("")) == "cbf29ce484222325");
    std::filesystem::remove_all(dir);
}
