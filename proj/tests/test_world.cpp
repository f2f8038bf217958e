#include "doctest.h"

#include <algorithm>
#include <set>

#include "neurosis/scenario_io.hpp"
#include "neurosis/world.hpp"

using namespace neurosis;

TEST_CASE("open 10x10 board has 100 passable cells") {
    WorldSpec s;
    s.width = 10;
    s.height = 10;
    Grid g = build_world(s);
    CHECK(g.passable_count() == 100);
    CHECK(g.at({-1, 0}).kind == Kind::Rock);
    CHECK(g.at({10, 3}).kind == Kind::Rock);
}

TEST_CASE("build_world rejects bad specs") {
    WorldSpec s;
    s.width = 4;
    s.height = 4;
    s.cells[{0, 0}] = Cell::rock();
    CHECK_THROWS_WITH_AS(build_world(s), "start impassable", WorldError);
    WorldSpec z;
    CHECK_THROWS_AS(build_world(z), WorldError);
    WorldSpec bad;
    bad.width = 3;
    bad.height = 3;
    bad.cells[{1, 1}] = Cell::ice(1.5, 2.0);
    CHECK_THROWS_AS(build_world(bad), WorldError);
}

TEST_CASE("social cells block like rocks") {
    CHECK_FALSE(Cell::social().passable());
    CHECK_FALSE(Cell::rock().passable());
    CHECK(Cell::food(3).passable());
}

TEST_CASE("flip-flop world geometry") {
    Grid g = build_world(canonical_scenario("flipflop"));
    CHECK(g.width() == 7);
    CHECK(g.height() == 4);
    CHECK(g.passable_count() == 27);
    CHECK(g.at({3, 1}).kind == Kind::Rock);
    CHECK(g.spec().start == Pos{0, 0});
    CHECK(*g.spec().goal == Pos{6, 3});
}

TEST_CASE("perseveration pocket values") {
    Grid g = build_world(canonical_scenario("perseveration"));
    CHECK(g.at({2, 1}).risk == 0.1);
    std::multiset<double> a_nb, b_nb;
    for (Dir d : kAllDirs) {
        Pos p = step({2, 1}, d);
        if (g.passable(p)) a_nb.insert(g.at(p).risk);
        Pos q = step({1, 1}, d);
        if (g.passable(q) && q != Pos{2, 1}) b_nb.insert(g.at(q).risk);
    }
    CHECK(a_nb == std::multiset<double>{0.3, 0.9, 0.9});
    CHECK(b_nb == std::multiset<double>{0.4, 0.4});
}

TEST_CASE("corridor world has a wall row and two near-equal corridors") {
    Grid g = build_world(canonical_scenario("corridor_thrash"));
    for (int x = 1; x <= 5; ++x) CHECK(g.at({x, 1}).kind == Kind::Rock);
    CHECK(g.passable({0, 1}));
}

TEST_CASE("visible_set sizes") {
    WorldSpec s;
    s.width = 10;
    s.height = 10;
    Grid g(s);
    CHECK(visible_set(g, {5, 5}, {VisibilityModel::Mode::LV, 2}).size() == 25);
    CHECK(visible_set(g, {0, 0}, {VisibilityModel::Mode::LV, 1}).size() == 4);
    Grid f(canonical_scenario("flipflop"));
    CHECK(visible_set(f, {0, 0}, {}).size() == 28);
}

TEST_CASE("visible_set is monotone in the radius") {
    WorldSpec s;
    s.width = 9;
    s.height = 7;
    Grid g(s);
    for (int x = 0; x < 9; ++x)
        for (int y = 0; y < 7; ++y)
            for (int r = 1; r < 6; ++r) {
                auto a = visible_set(g, {x, y}, {VisibilityModel::Mode::LV, r});
                auto b = visible_set(g, {x, y}, {VisibilityModel::Mode::LV, r + 1});
                std::set<Pos> sb(b.begin(), b.end());
                for (Pos p : a) CHECK(sb.count(p));
                for (Pos p : a) CHECK(chebyshev(p, {x, y}) <= r);
            }
}

TEST_CASE("respawn is seeded and deterministic") {
    WorldSpec s;
    s.width = 10;
    s.height = 10;
    s.food_respawn = true;
    s.cells[{5, 5}] = Cell::food(4.0);
    Grid g(s);
    FoodState a = initial_food(g), b = initial_food(g);
    Stream r1(7, StreamId::Respawn), r2(7, StreamId::Respawn);
    auto p1 = respawn_food(g, a, {5, 5}, r1);
    auto p2 = respawn_food(g, b, {5, 5}, r2);
    REQUIRE(p1);
    CHECK(*p1 == *p2);
    CHECK(*p1 != Pos{5, 5});
    CHECK(*p1 != s.start);
    CHECK(a.food.at(*p1).meal == 4.0);
    CHECK(a.food.size() == 1);
}

TEST_CASE("respawn with no free cell is an error, disabled respawn is a no-op") {
    WorldSpec s;
    s.width = 2;
    s.height = 1;
    s.food_respawn = true;
    s.cells[{1, 0}] = Cell::food(1.0);
    Grid g(s);
    FoodState st = initial_food(g);
    Stream r(1, StreamId::Respawn);
    CHECK_THROWS_AS(respawn_food(g, st, {1, 0}, r), WorldError);

    WorldSpec off = s;
    off.width = 5;
    off.food_respawn = false;
    Grid go(off);
    FoodState so = initial_food(go);
    CHECK_FALSE(respawn_food(go, so, {1, 0}, r).has_value());
    CHECK(so.food.size() == 1);
}

TEST_CASE("every shipped scenario round-trips byte for byte") {
    for (const auto& name : scenario_names()) {
        WorldSpec s = named_scenario(name);
        std::string a = serialize_scenario(s);
        WorldSpec back = parse_scenario(a);
        CHECK(back == s);
        CHECK(serialize_scenario(back) == a);
    }
}

TEST_CASE("scenario parser is strict") {
    std::string ok = R"({"width": 3, "height": 2, "start": [0, 0]})";
    CHECK(parse_scenario(ok).width == 3);
    CHECK_THROWS_AS(parse_scenario(R"({"width": 3, "height": 2, "start": [0, 0], "weather": {}})"), WorldError);
    CHECK_THROWS_AS(parse_scenario(R"({"width": 3, "height": 2, "start": [0, 0], "bogus": 1})"), WorldError);
    CHECK_THROWS_AS(parse_scenario(R"({"width": 3, "height": 2, "start": [0, 0], "seasoning": {"topography": 1}})"),
                    WorldError);
    CHECK_THROWS_AS(parse_scenario(R"({"width": 0, "height": 2, "start": [0, 0]})"), WorldError);
    CHECK_THROWS_AS(parse_scenario("not json"), WorldError);
}
