#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pedflow/behavior.hpp"

using namespace pedflow;

namespace {

// Frozen anchors, computed independently to full double precision.
constexpr double kTanh24 = 0.9836748576936802;   // tanh(2.4)
constexpr double kTanh10 = 0.7615941559557649;   // tanh(1.0)
constexpr double kTanh04 = 0.3799489622552249;   // tanh(0.4)

struct MiniWorld {
    Grid grid{3, 3, false, /*boundary_walls=*/false};
    Population pop;
    FieldLayer path;

    explicit MiniWorld(CellIndex dest = {1, 2}) {
        Marker m;
        m.kind = MarkerKind::DestinationArea;
        m.cells = {dest};
        m.destination_id = 0;
        grid.attach_markers({m});
        path = compute_path_field(grid, grid.markers()[0]);
    }

    int add(CellIndex pos, int group = -1) {
        const int id = pop.add_pedestrian(pos, 0, group);
        grid.add_occupant(pos, id);
        return id;
    }

    DecisionInputs inputs() const {
        DecisionInputs in;
        in.grid = &grid;
        in.population = &pop;
        in.path = &path;
        return in;
    }
};

}  // namespace

TEST_CASE("dispersion balance saturates along tanh") {
    CHECK(disp_balance(0.0, 2.5) == 0.0);
    CHECK(disp_balance(2.5, 2.5) == Catch::Approx(kTanh10).epsilon(1e-9));
    CHECK(disp_balance(6.0, 2.5) == Catch::Approx(kTanh24).epsilon(1e-9));
    CHECK(disp_balance(1.0, 2.5) == Catch::Approx(kTanh04).epsilon(1e-9));
    CHECK(disp_balance(1e9, 2.5) == Catch::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(disp_balance(1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(disp_balance(1.0, -2.0), ValidationError);
}

TEST_CASE("weight balancing trades cohesion against goal seeking") {
    const double k = 30.0;
    SECTION("a compact group stays goal driven") {
        CHECK(balance(k, BalanceKind::Cohesion, 0.0) == Catch::Approx(k / 3.0));
        CHECK(balance(k, BalanceKind::Goal, 0.0) == Catch::Approx(k));
        CHECK(balance(k, BalanceKind::Structured, 0.0) == Catch::Approx(k));
    }
    SECTION("a fully dispersed group turns to cohesion") {
        CHECK(balance(k, BalanceKind::Cohesion, 1.0) == Catch::Approx(k));
        CHECK(balance(k, BalanceKind::Goal, 1.0) == Catch::Approx(k / 3.0));
        CHECK(balance(k, BalanceKind::Structured, 1.0) == Catch::Approx(k / 3.0));
    }
    SECTION("unbalanced weights pass through") {
        CHECK(balance(k, BalanceKind::Other, 0.0) == k);
        CHECK(balance(k, BalanceKind::Other, 0.73) == k);
        CHECK(balance(k, BalanceKind::Other, 1.0) == k);
    }
    SECTION("the opposing pair preserves 4k/3 at every balance point") {
        for (double db : {0.0, 0.2, 0.5, 0.77, 1.0}) {
            const double sum = balance(k, BalanceKind::Cohesion, db) +
                               balance(k, BalanceKind::Goal, db);
            CHECK(sum == Catch::Approx(4.0 * k / 3.0).epsilon(1e-12));
        }
    }
    SECTION("balance is linear in the weight") {
        CHECK(balance(2.0 * k, BalanceKind::Cohesion, 0.4) ==
              Catch::Approx(2.0 * balance(k, BalanceKind::Cohesion, 0.4)));
    }
}

TEST_CASE("effective weights leave individuals untouched") {
    MiniWorld world;
    const int id = world.add({1, 1});
    UtilityWeights base;
    const UtilityWeights w = effective_weights(world.pop.ped(id), base, world.pop);
    CHECK(w.kappa_g == base.kappa_g);
    CHECK(w.kappa_c == base.kappa_c);
    CHECK(w.kappa_i == base.kappa_i);
    CHECK(w.kappa_ov == base.kappa_ov);
}

TEST_CASE("effective weights adapt to the group's spread") {
    MiniWorld world;
    const int a = world.add({1, 0});
    const int b = world.add({1, 1});
    const int gid = world.pop.forest().add_simple({a, b});
    world.pop.ped(a).group_id = gid;
    world.pop.ped(b).group_id = gid;

    UtilityWeights base;  // kappa_g 60, kappa_c 30, kappa_i 10
    const UtilityWeights w =
        effective_weights(world.pop.ped(a), base, world.pop, 2.5);
    // An adjacent pair spans one cell per member, so db = tanh(1/2.5).
    const double db = kTanh04;
    CHECK(w.kappa_c == Catch::Approx(10.0 + 20.0 * db).epsilon(1e-9));
    CHECK(w.kappa_g == Catch::Approx(20.0 + 40.0 * (1.0 - db)).epsilon(1e-9));
    CHECK(w.kappa_i ==
          Catch::Approx(10.0 / 3.0 + 20.0 / 3.0 * (1.0 - db)).epsilon(1e-9));
    // Non-balanced weights pass through unchanged.
    CHECK(w.kappa_ob == base.kappa_ob);
    CHECK(w.kappa_s == base.kappa_s);
    CHECK(w.kappa_d == base.kappa_d);
    CHECK(w.kappa_ov == base.kappa_ov);
}

TEST_CASE("weight bounds are enforced") {
    UtilityWeights w;
    CHECK_NOTHROW(w.validate());
    w.kappa_g = 150.0;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    w.kappa_g = -1.0;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    w.kappa_g = 100.0;
    CHECK_NOTHROW(w.validate());
}

TEST_CASE("utility combines weighted components over the step distance") {
    ComponentValues v;
    v.goal = 1.0;
    v.overlap = -1.0;
    UtilityWeights w;
    w.kappa_g = 60.0;
    w.kappa_ov = 80.0;
    CHECK(compute_utility(v, w, false) == Catch::Approx(-20.0).epsilon(1e-12));
    CHECK(compute_utility(v, w, true) ==
          Catch::Approx(-20.0 / std::sqrt(2.0)).epsilon(1e-12));

    std::mt19937 gen(17);
    for (int trial = 0; trial < 50; ++trial) {
        ComponentValues r;
        auto u = [&] { return (static_cast<double>(gen() % 2001) - 1000.0) / 1000.0; };
        r.goal = u();
        r.obstacle = -std::abs(u());
        r.separation = -std::abs(u());
        r.direction = std::abs(u());
        r.overlap = u() < 0 ? -1.0 : 0.0;
        r.cohesion = u();
        r.inter = u();
        const double straight = compute_utility(r, w, false);
        CHECK(compute_utility(r, w, true) ==
              Catch::Approx(straight / std::sqrt(2.0)).margin(1e-12));
    }
}

TEST_CASE("softmax spreads probability over admissible actions") {
    std::array<bool, 9> adm{};
    std::array<double, 9> util{};

    SECTION("equal utilities make a uniform law") {
        adm.fill(true);
        util.fill(3.7);
        const ActionDistribution dist = action_probabilities(adm, util);
        double sum = 0.0;
        for (double p : dist.p) {
            CHECK(p == Catch::Approx(1.0 / 9.0).epsilon(1e-12));
            sum += p;
        }
        CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("a log-two gap splits one third to two thirds") {
        adm[0] = adm[2] = true;
        util[0] = 0.0;
        util[2] = 0.6931471805599453;  // ln 2
        const ActionDistribution dist = action_probabilities(adm, util);
        CHECK(dist.p[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(dist.p[2] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(dist.of(Action::N) == dist.p[0]);
        CHECK(dist.of(Action::E) == dist.p[2]);
        CHECK(dist.of(Action::S) == 0.0);
    }
    SECTION("standing alone is certain") {
        adm[8] = true;
        util[8] = -123.0;
        const ActionDistribution dist = action_probabilities(adm, util);
        CHECK(dist.p[8] == 1.0);
    }
    SECTION("shifting every utility leaves the law unchanged") {
        adm[0] = adm[3] = adm[8] = true;
        util[0] = 0.4;
        util[3] = -1.2;
        util[8] = 2.0;
        const ActionDistribution base = action_probabilities(adm, util);
        for (double& u : util) u += 57.5;
        const ActionDistribution shifted = action_probabilities(adm, util);
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(shifted.p[i] == Catch::Approx(base.p[i]).margin(1e-12));
        }
    }
    SECTION("inadmissible actions carry exactly zero") {
        adm[1] = true;
        util[1] = 5.0;
        util[5] = 50.0;  // high utility but not admissible
        const ActionDistribution dist = action_probabilities(adm, util);
        CHECK(dist.p[5] == 0.0);
        CHECK(dist.p[1] == 1.0);
    }
    SECTION("an empty admissible set is a domain error") {
        CHECK_THROWS_AS(action_probabilities(adm, util), DomainError);
    }
}

TEST_CASE("inverse-CDF sampling walks the fixed action order") {
    ActionDistribution dist;
    dist.p[0] = 0.3;  // N
    dist.p[8] = 0.7;  // X
    RandomStream pick(321);
    RandomStream probe(321);
    const double u = probe.next_unit();
    const Action chosen = choose_action(dist, pick);
    CHECK(chosen == (u < 0.3 ? Action::N : Action::X));
}

TEST_CASE("sampling frequencies match the law") {
    std::array<bool, 9> adm{};
    std::array<double, 9> util{};
    adm.fill(true);
    const ActionDistribution dist = action_probabilities(adm, util);
    RandomStream rng(2024);
    std::array<long, 9> counts{};
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        ++counts[static_cast<std::size_t>(choose_action(dist, rng))];
    }
    double chi2 = 0.0;
    const double expect = draws / 9.0;
    for (long c : counts) {
        chi2 += (c - expect) * (c - expect) / expect;
    }
    // 8 degrees of freedom; 26.12 is the 0.1% tail.
    CHECK(chi2 < 26.12);
}

TEST_CASE("admissibility excludes walls, full cells and unreachable space") {
    Grid grid(3, 3, false, false);
    Marker wall;
    wall.kind = MarkerKind::Obstacle;
    wall.cells = {{0, 1}};
    Marker dest;
    dest.kind = MarkerKind::DestinationArea;
    dest.cells = {{1, 2}};
    dest.destination_id = 0;
    grid.attach_markers({wall, dest});
    const FieldLayer path = compute_path_field(grid, grid.markers()[1]);

    Population pop;
    const int me = pop.add_pedestrian({1, 1}, 0);
    grid.add_occupant({1, 1}, me);
    grid.add_occupant({1, 2}, pop.add_pedestrian({1, 2}, 0));
    grid.add_occupant({1, 2}, pop.add_pedestrian({1, 2}, 0));

    const AdmissibleSet adm = admissible_targets(grid, path, pop.ped(me));
    CHECK_FALSE(adm.target[0]);  // N is a wall
    CHECK_FALSE(adm.target[2]);  // E is at the occupancy cap
    CHECK(adm.target[1]);        // NE
    CHECK(adm.target[4]);        // S
    REQUIRE(adm.target[8]);      // standing still is always on the table
    CHECK(*adm.target[8] == CellIndex{1, 1});
    // The path-field range spans the admissible neighborhood including the
    // own cell: minimum one step from the goal, maximum at the far corners.
    CHECK(adm.pf_min == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(adm.pf_max == Catch::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("goal component rewards descending the path field") {
    MiniWorld world;  // destination at (1,2)
    const int me = world.add({1, 1});
    UtilityWeights only_goal;
    only_goal.kappa_g = 1.0;
    only_goal.kappa_ob = only_goal.kappa_s = only_goal.kappa_d =
        only_goal.kappa_ov = only_goal.kappa_c = only_goal.kappa_i = 0.0;
    const Decision d = evaluate_agent(world.pop.ped(me), world.inputs(), only_goal);
    // Neighborhood range: pf_min = 0 on the goal cell (E), pf_max = 1 + sqrt(2)
    // at the far corners (NW/SW).
    CHECK(d.utility[2] == Catch::Approx(1.0).epsilon(1e-12));  // E: at pf_min
    CHECK(d.utility[7] == Catch::Approx(0.0).margin(1e-12));   // NW: at pf_max
    CHECK(d.utility[8] ==
          Catch::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-9));  // own cell, pf 1
    // Equal-field neighborhoods yield a flat goal term: a destination
    // covering the whole grid makes the path field constant zero.
    Grid g(1, 2, false, false);
    Marker everywhere;
    everywhere.kind = MarkerKind::DestinationArea;
    everywhere.cells = {{0, 0}, {0, 1}};
    everywhere.destination_id = 0;
    g.attach_markers({everywhere});
    const FieldLayer pf = compute_path_field(g, g.markers()[0]);
    Population pop;
    const int id = pop.add_pedestrian({0, 0}, 0);
    g.add_occupant({0, 0}, id);
    DecisionInputs in;
    in.grid = &g;
    in.population = &pop;
    in.path = &pf;
    const Decision flat_d = evaluate_agent(pop.ped(id), in, only_goal);
    CHECK(flat_d.utility[2] == 0.0);
    CHECK(flat_d.utility[8] == 0.0);
}

TEST_CASE("separation component counts strangers around the target") {
    MiniWorld world;
    const int me = world.add({1, 1});
    world.add({0, 0});  // a stranger in the Moore ring of every central target
    UtilityWeights only_sep;
    only_sep.kappa_g = only_sep.kappa_ob = only_sep.kappa_d = only_sep.kappa_ov =
        only_sep.kappa_c = only_sep.kappa_i = 0.0;
    only_sep.kappa_s = 8.0;

    const Decision d = evaluate_agent(world.pop.ped(me), world.inputs(), only_sep);
    // Standing keeps the stranger at (0,0) inside the own-cell Moore ring.
    CHECK(d.utility[8] == Catch::Approx(-1.0).epsilon(1e-12));
    // Moving SE leaves the stranger outside the ring of (2,2).
    CHECK(d.utility[3] == Catch::Approx(0.0).margin(1e-12));

    // The same neighbour in the same group does not separate.
    MiniWorld together;
    const int a = together.add({1, 1});
    const int b = together.add({0, 0});
    const int gid = together.pop.forest().add_simple({a, b});
    together.pop.ped(a).group_id = gid;
    together.pop.ped(b).group_id = gid;
    const Decision d2 =
        evaluate_agent(together.pop.ped(a), together.inputs(), only_sep);
    CHECK(d2.utility[8] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("direction component scores heading continuity") {
    MiniWorld world;
    const int me = world.add({1, 1});
    world.pop.ped(me).prev_direction = Action::E;
    UtilityWeights only_dir;
    only_dir.kappa_g = only_dir.kappa_ob = only_dir.kappa_s = only_dir.kappa_ov =
        only_dir.kappa_c = only_dir.kappa_i = 0.0;
    only_dir.kappa_d = 1.0;

    const Decision d = evaluate_agent(world.pop.ped(me), world.inputs(), only_dir);
    CHECK(d.utility[2] == Catch::Approx(1.0).epsilon(1e-12));  // straight on (E)
    CHECK(d.utility[1] ==
          Catch::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));  // NE, 45 degrees
    CHECK(d.utility[3] ==
          Catch::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));  // SE, 45 degrees
    CHECK(d.utility[0] == Catch::Approx(0.0).margin(1e-12));   // N, 90 degrees
    CHECK(d.utility[6] == Catch::Approx(0.0).margin(1e-12));   // W, reverse
    CHECK(d.utility[8] == Catch::Approx(0.0).margin(1e-12));   // standing

    // A fresh walker (prev X) has no heading to keep.
    world.pop.ped(me).prev_direction = Action::X;
    const Decision d2 = evaluate_agent(world.pop.ped(me), world.inputs(), only_dir);
    CHECK(d2.utility[2] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("overlap component penalizes sharing a cell") {
    MiniWorld world;
    const int me = world.add({1, 1});
    world.add({1, 2});  // one other walker on the east cell
    UtilityWeights only_ov;
    only_ov.kappa_g = only_ov.kappa_ob = only_ov.kappa_s = only_ov.kappa_d =
        only_ov.kappa_c = only_ov.kappa_i = 0.0;
    only_ov.kappa_ov = 1.0;

    const Decision d = evaluate_agent(world.pop.ped(me), world.inputs(), only_ov);
    CHECK(d.utility[2] == Catch::Approx(-1.0).epsilon(1e-12));  // E is shared
    CHECK(d.utility[0] == Catch::Approx(0.0).margin(1e-12));    // N is empty
    CHECK(d.utility[8] == Catch::Approx(0.0).margin(1e-12));    // own cell, alone

    // Standing on a shared cell is penalized too.
    MiniWorld shared;
    const int a = shared.add({1, 1});
    shared.add({1, 1});
    const Decision d2 = evaluate_agent(shared.pop.ped(a), shared.inputs(), only_ov);
    CHECK(d2.utility[8] == Catch::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cohesion components pull toward the centroids") {
    MiniWorld world;
    const int me = world.add({1, 1});
    UtilityWeights only_c;
    only_c.kappa_g = only_c.kappa_ob = only_c.kappa_s = only_c.kappa_d =
        only_c.kappa_ov = only_c.kappa_i = 0.0;
    only_c.kappa_c = 1.0;

    DecisionInputs in = world.inputs();
    in.direct_centroid = cell_center({1, 0});  // straight west of the agent
    const Decision d = evaluate_agent(world.pop.ped(me), in, only_c);
    const double one_straight = 0.4 / 0.56;  // gain of one cell, one stride scale
    CHECK(d.utility[6] == Catch::Approx(one_straight).epsilon(1e-12));   // W
    CHECK(d.utility[2] == Catch::Approx(-one_straight).epsilon(1e-12));  // E
    CHECK(d.utility[8] == Catch::Approx(0.0).margin(1e-12));

    // The nested-group pull works the same through the largest centroid.
    UtilityWeights only_i;
    only_i.kappa_g = only_i.kappa_ob = only_i.kappa_s = only_i.kappa_d =
        only_i.kappa_ov = only_i.kappa_c = 0.0;
    only_i.kappa_i = 1.0;
    DecisionInputs in2 = world.inputs();
    in2.largest_centroid = cell_center({1, 0});
    const Decision d2 = evaluate_agent(world.pop.ped(me), in2, only_i);
    CHECK(d2.utility[6] == Catch::Approx(one_straight).epsilon(1e-12));
    // Without a nesting there is no inter-group term at all.
    const Decision d3 = evaluate_agent(world.pop.ped(me), world.inputs(), only_i);
    CHECK(d3.utility[6] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("every perception component stays within its band") {
    std::mt19937 gen(29);
    for (int trial = 0; trial < 40; ++trial) {
        Grid grid(4, 4, false);
        Marker dest;
        dest.kind = MarkerKind::DestinationArea;
        dest.cells = {{static_cast<int>(gen() % 4), static_cast<int>(gen() % 4)}};
        dest.destination_id = 0;
        grid.attach_markers({dest});
        const FieldLayer path = compute_path_field(grid, grid.markers()[0]);
        const FieldLayer obstacle = compute_obstacle_field(grid, 2, 1.0);

        Population pop;
        std::vector<int> ids;
        for (int i = 0; i < 6; ++i) {
            CellIndex pos{static_cast<int>(gen() % 4), static_cast<int>(gen() % 4)};
            if (grid.occupancy(pos) >= Grid::kMaxOccupancy) continue;
            const int id = pop.add_pedestrian(pos, 0);
            grid.add_occupant(pos, id);
            ids.push_back(id);
        }
        if (ids.size() >= 2) {
            const int gid = pop.forest().add_simple({ids[0], ids[1]});
            pop.ped(ids[0]).group_id = gid;
            pop.ped(ids[1]).group_id = gid;
        }

        DecisionInputs in;
        in.grid = &grid;
        in.population = &pop;
        in.path = &path;
        in.obstacle = &obstacle;
        in.obstacle_max = 1.0;
        if (ids.size() >= 2) {
            in.direct_centroid = group_centroid(pop.member_centers(0));
        }

        for (int id : ids) {
            Pedestrian& agent = pop.ped(id);
            agent.prev_direction = kActionOrder[gen() % 9];
            const AdmissibleSet adm = admissible_targets(grid, path, agent);
            for (std::size_t i = 0; i < 9; ++i) {
                if (!adm.target[i]) continue;
                const ComponentValues v =
                    evaluate_components(agent, kActionOrder[i], *adm.target[i], in,
                                        adm.pf_min, adm.pf_max);
                for (double c : {v.goal, v.obstacle, v.separation, v.direction,
                                 v.overlap, v.cohesion, v.inter}) {
                    CHECK(c >= -1.0 - 1e-12);
                    CHECK(c <= 1.0 + 1e-12);
                }
                CHECK(v.goal >= 0.0);
                CHECK(v.obstacle <= 0.0);
                CHECK(v.separation <= 0.0);
                CHECK(v.direction >= 0.0);
                CHECK((v.overlap == 0.0 || v.overlap == -1.0));
            }
        }
    }
}

TEST_CASE("a full decision is a softmax over the admissible utilities") {
    Grid grid(1, 3, false, false);
    Marker dest;
    dest.kind = MarkerKind::DestinationArea;
    dest.cells = {{0, 2}};
    dest.destination_id = 0;
    grid.attach_markers({dest});
    const FieldLayer path = compute_path_field(grid, grid.markers()[0]);

    Population pop;
    const int me = pop.add_pedestrian({0, 0}, 0);
    grid.add_occupant({0, 0}, me);
    DecisionInputs in;
    in.grid = &grid;
    in.population = &pop;
    in.path = &path;

    UtilityWeights only_goal;
    only_goal.kappa_g = 60.0;
    only_goal.kappa_ob = only_goal.kappa_s = only_goal.kappa_d =
        only_goal.kappa_ov = only_goal.kappa_c = only_goal.kappa_i = 0.0;
    const Decision d = evaluate_agent(pop.ped(me), in, only_goal);
    // Admissible: E (utility 60) and X (utility 0).
    CHECK(d.utility[2] == Catch::Approx(60.0).epsilon(1e-12));
    CHECK(d.utility[8] == Catch::Approx(0.0).margin(1e-12));
    const double z = std::exp(60.0) + 1.0;
    CHECK(d.distribution.p[2] == Catch::Approx(std::exp(60.0) / z).epsilon(1e-9));
    CHECK(d.distribution.p[8] == Catch::Approx(1.0 / z).margin(1e-12));
    double sum = 0.0;
    for (double p : d.distribution.p) sum += p;
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 9; ++i) {
        if (i != 2 && i != 8) CHECK(d.distribution.p[i] == 0.0);
    }
}
