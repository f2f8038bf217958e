#include "doctest.h"

#include <algorithm>
#include <queue>

#include "neurosis/planner.hpp"
#include "neurosis/rng.hpp"
#include "neurosis/world.hpp"
#include "grid_oracles.hpp"

using namespace neurosis;

using oracles::random_world;
using oracles::uniform_cost;

TEST_CASE("plan on an open board costs the Manhattan distance") {
    WorldSpec s;
    s.width = 7;
    s.height = 4;
    Grid g(s);
    PlanView v{&g};
    Plan p = plan_astar(v, {0, 0}, {6, 3}, CostWeights{}, Canon{});
    REQUIRE(p.found);
    CHECK(p.steps.size() == 9);
    CHECK(p.c_total == doctest::Approx(9.0));
    CHECK(p.c1() == p.c_total);
    CHECK(p.decomposition.sum() == doctest::Approx(p.c_total).epsilon(1e-12));
    // N and E tie; canon prefers N.
    CHECK(p.steps[0] == Dir::N);
    REQUIRE(p.alternatives.size() == 2);
    CHECK(p.alternatives[1].first == Dir::E);
    CHECK(p.c2() == doctest::Approx(9.0));
}

TEST_CASE("A* matches uniform-cost search on random weighted grids") {
    Stream r(2024, StreamId::Random);
    int compared = 0;
    for (int i = 0; i < 200; ++i) {
        WorldSpec s = random_world(r, 12);
        Grid g(s);
        CostWeights w{r.uniform() * 2, r.uniform() * 3, r.uniform(), 0.0};
        PlanView v{&g};
        Plan p = plan_astar(v, s.start, *s.goal, w, Canon{});
        double o = uniform_cost(g, s.start, *s.goal, w);
        if (o == kInf) {
            CHECK_FALSE(p.found);
            continue;
        }
        REQUIRE(p.found);
        CHECK(p.c_total == doctest::Approx(o).epsilon(1e-12));
        ++compared;
    }
    CHECK(compared > 100);
}

TEST_CASE("A* matches uniform-cost search exactly on dyadic weights") {
    Stream r(7, StreamId::Random);
    for (int i = 0; i < 200; ++i) {
        WorldSpec s = random_world(r, 12, true);
        Grid g(s);
        CostWeights w = oracles::dyadic_weights(r);
        Plan p = plan_astar(PlanView{&g}, s.start, *s.goal, w, Canon{});
        double o = uniform_cost(g, s.start, *s.goal, w);
        CHECK(p.found == (o != kInf));
        if (p.found) CHECK(p.c_total == o);
    }
}

TEST_CASE("plans trace connected passable paths and are deterministic") {
    Stream r(99, StreamId::Random);
    for (int i = 0; i < 50; ++i) {
        WorldSpec s = random_world(r, 10);
        Grid g(s);
        PlanView v{&g};
        Plan a = plan_astar(v, s.start, *s.goal, CostWeights{}, Canon{});
        Plan b = plan_astar(v, s.start, *s.goal, CostWeights{}, Canon{});
        if (!a.found) continue;
        CHECK(a.steps == b.steps);
        CHECK(a.cells == b.cells);
        Pos p = s.start;
        for (Dir d : a.steps) {
            p = step(p, d);
            CHECK(g.passable(p));
        }
        CHECK(p == *s.goal);
        CHECK(a.decomposition.sum() == doctest::Approx(a.c_total).epsilon(1e-9));
        for (size_t k = 1; k < a.alternatives.size(); ++k) CHECK(a.alternatives[k - 1].cost <= a.alternatives[k].cost + 1e-9);
    }
}

TEST_CASE("scaling every weight keeps the chosen path") {
    Stream r(5, StreamId::Random);
    for (int i = 0; i < 40; ++i) {
        WorldSpec s = random_world(r, 9);
        for (auto& [p, c] : s.cells)
            if (c.kind == Kind::Mirage) c = Cell::open();
        Grid g(s);
        PlanView v{&g};
        CostWeights w{1.0, 0.7, 0.3, 0.0};
        CostWeights w3{3.0, 2.1, 0.9, 0.0};
        Plan a = plan_astar(v, s.start, *s.goal, w, Canon{});
        Plan b = plan_astar(v, s.start, *s.goal, w3, Canon{});
        CHECK(a.found == b.found);
        if (a.found) {
            CHECK(a.steps == b.steps);
            CHECK(b.c_total == doctest::Approx(3.0 * a.c_total));
        }
    }
}

TEST_CASE("unreachable goal gives an explicit no-path plan") {
    WorldSpec s;
    s.width = 5;
    s.height = 1;
    s.cells[{2, 0}] = Cell::rock();
    Grid g(s);
    PlanView v{&g};
    Plan p = plan_astar(v, {0, 0}, {4, 0}, CostWeights{}, Canon{});
    CHECK_FALSE(p.found);
}

TEST_CASE("near_tie band") {
    CHECK(near_tie(100, 101, 0.02));
    CHECK_FALSE(near_tie(100, 103, 0.02));
    CHECK(near_tie(7.5, 7.5, 0.0));
}

TEST_CASE("fuse is a convex combination") {
    CHECK(fuse(10, 20, 1.0) == 10);
    CHECK(fuse(10, 20, 0.0) == 20);
    CHECK(fuse(10, 20, 0.25) == doctest::Approx(17.5));
}

TEST_CASE("local policy picks the cheapest neighbour") {
    WorldSpec s = canonical_scenario("perseveration");
    Grid g(s);
    PlanView v{&g};
    CostField f = build_cost_field(v, s.seasoning.weights);
    // At A=(2,1): neighbours 0.3 (W), 0.9 (E), 0.9 (S).
    auto c = local_policy(f, {2, 1}, Canon{});
    REQUIRE(c.move);
    CHECK(*c.move == Dir::W);
    // At B=(1,1): 0.4, 0.4 and A's 0.1.
    c = local_policy(f, {1, 1}, Canon{});
    CHECK(*c.move == Dir::E);
    // At S the only way out is B.
    c = local_policy(f, {0, 1}, Canon{});
    CHECK(*c.move == Dir::E);
    CHECK(c.ranked.size() == 1);

    WorldSpec open;
    open.width = 3;
    open.height = 3;
    Grid go(open);
    PlanView vo{&go};
    CostField fo = build_cost_field(vo, CostWeights{});
    CHECK(*local_policy(fo, {1, 1}, Canon{}).move == Dir::N);
}

TEST_CASE("select_target prefers the cheaper food, then lower x") {
    WorldSpec s;
    s.width = 10;
    s.height = 10;
    Grid g(s);
    PlanView v{&g};
    CostField f = build_cost_field(v, CostWeights{});
    CHECK(*select_target(f, {0, 0}, {{0, 9}, {5, 0}}, Canon{}) == Pos{5, 0});
    CHECK(*select_target(f, {0, 0}, {{3, 0}, {0, 3}}, Canon{}) == Pos{0, 3});
    CHECK_FALSE(select_target(f, {0, 0}, {}, Canon{}).has_value());
}

TEST_CASE("memory weight steers the plan off remembered cells") {
    WorldSpec s = named_scenario("phobia");
    Grid g(s);
    std::vector<double> mem(g.size(), 0.0);
    for (auto& sd : s.seasoning.memory_seeds) mem[g.index(sd.p)] = sd.m;
    PlanView v{&g};
    v.memory = &mem;
    CostWeights w0 = s.seasoning.weights;
    w0.w_mem = 0.0;
    CostField f0 = build_cost_field(v, w0);
    CostField f5 = build_cost_field(v, s.seasoning.weights);
    CHECK(*select_target(f0, s.start, {{4, 0}, {0, 7}}, Canon{}) == Pos{4, 0});
    CHECK(*select_target(f5, s.start, {{4, 0}, {0, 7}}, Canon{}) == Pos{0, 7});
    Plan p0 = plan_astar(f0, s.start, {4, 0}, Canon{});
    Plan p5 = plan_astar(f5, s.start, {4, 0}, Canon{});
    CHECK(p5.c_total >= p0.c_total);
    PlanView bare{&g};
    Plan nomem = plan_astar(bare, s.start, {4, 0}, w0, Canon{});
    CHECK(nomem.steps == p0.steps);
}
