#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pedflow/sweep.hpp"

using namespace pedflow;

namespace {

SweepSpec quick_spec() {
    SweepSpec spec;
    spec.base = preset_scenario("corridor_A");
    spec.base.steps = 120;
    spec.density_levels = {0.75, 1.5};
    spec.min_reps = 2;
    spec.max_reps = 3;
    spec.cv_threshold = 0.05;
    spec.seed_base = 10;
    spec.warmup_steps = 60;
    spec.window_steps = 30;
    return spec;
}

std::string serialized(const TrajectoryLog& log) {
    std::ostringstream os;
    write_trajectory(os, log);
    return os.str();
}

void check_levels_equal(const SweepResult& a, const SweepResult& b) {
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
        CHECK(a.levels[i].density_level == b.levels[i].density_level);
        CHECK(a.levels[i].reps == b.levels[i].reps);
        CHECK(a.levels[i].failed_reps == b.levels[i].failed_reps);
        CHECK(a.levels[i].mean_density == b.levels[i].mean_density);
        CHECK(a.levels[i].mean_speed == b.levels[i].mean_speed);
        CHECK(a.levels[i].mean_flow == b.levels[i].mean_flow);
        CHECK(a.levels[i].rep_flows == b.levels[i].rep_flows);
        CHECK(a.levels[i].speed_by_size == b.levels[i].speed_by_size);
        CHECK(a.levels[i].dispersion_by_size == b.levels[i].dispersion_by_size);
    }
    CHECK(a.critical_density == b.critical_density);
    CHECK(a.peak_flow == b.peak_flow);
}

}  // namespace

TEST_CASE("sweep specs validate their shape") {
    SweepSpec spec = quick_spec();
    CHECK_NOTHROW(spec.validate());

    SECTION("levels") {
        spec.density_levels.clear();
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.density_levels = {0.5, -0.1};
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SECTION("repetition bounds") {
        spec.min_reps = 0;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.min_reps = 4;  // above max_reps
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
    SECTION("threshold and windows") {
        spec.cv_threshold = -0.01;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.cv_threshold = 0.05;
        spec.warmup_steps = -1;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.warmup_steps = spec.base.steps;  // nothing left to measure
        CHECK_THROWS_AS(spec.validate(), ValidationError);
        spec.warmup_steps = 60;
        spec.window_steps = 0;
        CHECK_THROWS_AS(spec.validate(), ValidationError);
    }
}

TEST_CASE("adaptive repetitions stay within the configured bounds") {
    SweepSpec spec = quick_spec();
    spec.density_levels = {0.75};
    spec.min_reps = 2;
    spec.max_reps = 4;

    SECTION("a generous threshold stops at the minimum") {
        spec.cv_threshold = 1e9;
        const SweepResult res = run_sweep(spec);
        REQUIRE(res.levels.size() == 1);
        CHECK(res.levels[0].reps == 2);
        CHECK(res.levels[0].failed_reps == 0);
        CHECK(res.levels[0].rep_flows.size() == 2);
    }
    SECTION("an unreachable threshold runs out the maximum") {
        spec.cv_threshold = 0.0;
        const SweepResult res = run_sweep(spec);
        REQUIRE(res.levels.size() == 1);
        CHECK(res.levels[0].reps == 4);
        CHECK(res.levels[0].rep_flows.size() == 4);
        CHECK(res.levels[0].flow_cv > 0.0);
    }
}

TEST_CASE("sweeps replay identically") {
    const SweepSpec spec = quick_spec();
    const SweepResult a = run_sweep(spec);
    const SweepResult b = run_sweep(spec);
    check_levels_equal(a, b);

    // The peak bookkeeping matches the level table.
    double best = 0.0;
    double best_level = 0.0;
    for (const LevelResult& lr : a.levels) {
        if (lr.mean_flow > best) {
            best = lr.mean_flow;
            best_level = lr.density_level;
        }
    }
    CHECK(a.peak_flow == best);
    CHECK(a.critical_density == best_level);
    CHECK(a.peak_flow > 0.0);
}

TEST_CASE("parallel sweeps match serial ones exactly") {
    SweepSpec spec = quick_spec();
    spec.density_levels = {0.5, 1.25};
    spec.min_reps = 2;
    spec.max_reps = 2;  // a single batch per level exercises the fan-out
    const SweepResult serial = run_sweep(spec);
    spec.parallel = true;
    const SweepResult parallel = run_sweep(spec);
    check_levels_equal(serial, parallel);
}

TEST_CASE("rep seeds depend only on level and rep indices") {
    SweepSpec spec = quick_spec();
    spec.density_levels = {0.5, 1.0};
    spec.min_reps = 2;
    spec.max_reps = 2;
    spec.seed_base = 100;

    std::map<std::pair<std::size_t, int>, std::string> captured;
    run_sweep(spec, [&](std::size_t li, int rep, const RunResult& rr) {
        captured[{li, rep}] = serialized(rr.log);
    });
    REQUIRE(captured.size() == 4);

    for (const auto& [key, log_text] : captured) {
        const auto [li, rep] = key;
        Scenario sc = spec.base;
        sc.population.mode = GenerationMode::EnBloc;
        sc.population.total.reset();
        sc.population.density_ped_m2 = spec.density_levels[li];
        const std::uint64_t seed =
            spec.seed_base + li * static_cast<std::uint64_t>(spec.max_reps) +
            static_cast<std::uint64_t>(rep);
        const RunResult direct = run_scenario(std::move(sc), seed);
        CHECK(serialized(direct.log) == log_text);
    }
}

TEST_CASE("failing repetitions are counted instead of aborting the sweep") {
    SweepSpec spec = quick_spec();
    spec.density_levels = {0.5};
    spec.base.delta = 0.0;  // every run refuses to build
    const SweepResult res = run_sweep(spec);
    REQUIRE(res.levels.size() == 1);
    CHECK(res.levels[0].reps == 0);
    CHECK(res.levels[0].failed_reps == spec.max_reps);
    CHECK(res.levels[0].mean_flow == 0.0);
    CHECK(res.levels[0].rep_flows.empty());
    CHECK(std::isinf(res.levels[0].flow_cv));
    CHECK(res.peak_flow == 0.0);
    CHECK(res.critical_density == 0.0);
}

TEST_CASE("run measurement trims the warmup and aggregates cohorts") {
    TrajectoryLog log;
    log.meta.rows = 1;
    log.meta.cols = 12;
    for (int s = 0; s <= 9; ++s) {
        log.records.push_back(
            {s, 0, -1, 0, s, s ? Action::E : Action::X});  // loner
        log.records.push_back({s, 1, 0, 0, s, s ? Action::E : Action::X});
        log.records.push_back({s, 2, 0, 0, s + 1, s ? Action::E : Action::X});
    }

    const RepMeasure m = measure_run(log, 5, 5);
    // Steps 5..9 survive: one 5-step window, 15 sightings over 1.92 m^2.
    CHECK(m.mean_density == Catch::Approx(15.0 / 5.0 / 1.92));
    CHECK(m.mean_speed == Catch::Approx(0.4 / 0.33));
    CHECK(m.mean_flow == Catch::Approx(m.mean_density * m.mean_speed));
    REQUIRE(m.speed_by_size.count(1) == 1);
    REQUIRE(m.speed_by_size.count(2) == 1);
    CHECK(m.speed_by_size.at(2) == Catch::Approx(0.4 / 0.33));
    REQUIRE(m.dispersion_by_size.count(2) == 1);
    CHECK(m.dispersion_by_size.at(2) == Catch::Approx(1.0));  // adjacent pair

    SECTION("a warmup past the last record leaves nothing") {
        const RepMeasure empty = measure_run(log, 20, 5);
        CHECK(empty.mean_flow == 0.0);
        CHECK(empty.speed_by_size.empty());
        CHECK(empty.dispersion_by_size.empty());
    }
}

TEST_CASE("sweep tables serialise with their peak line") {
    SweepResult res;
    LevelResult a;
    a.density_level = 0.5;
    a.reps = 3;
    a.mean_density = 0.48;
    a.mean_speed = 1.1;
    a.mean_flow = 0.528;
    a.flow_cv = 0.02;
    LevelResult b = a;
    b.density_level = 1.5;
    b.mean_flow = 0.8;
    res.levels = {a, b};
    res.critical_density = 1.5;
    res.peak_flow = 0.8;

    std::ostringstream os;
    write_sweep(os, res);
    const std::string text = os.str();
    CHECK(text.rfind("level\treps\tdensity\tspeed\tflow\tflow_cv\n", 0) == 0);
    CHECK(text.find("critical_density=1.5\n") != std::string::npos);
    CHECK(text.find("peak_flow=0.8\n") != std::string::npos);
    CHECK(text.find("0.528") != std::string::npos);
}
