#include "doctest.h"

#include <cmath>

#include "neurosis/governor.hpp"

using namespace neurosis;

TEST_CASE("accept_plan margins") {
    CHECK(accept_plan(97, 100, 2, 1));
    CHECK_FALSE(accept_plan(99, 100, 2, 1));
    CHECK(accept_plan(100, 100, 0, 0));
    CHECK_FALSE(accept_plan(100, 100, 0.5, 0));
}

TEST_CASE("override_check order") {
    GovernorConfig cfg;
    cfg.Delta = 5;
    cfg.beta = 2;
    Commitment c;
    c.steps = {Dir::E, Dir::E};
    c.steps_remaining = 2;
    c.ticks_remaining = 4;
    Proposal p;
    p.commit_cost = 100;
    p.c1 = 80;
    CHECK(override_check(p, c, cfg) == OverrideReason::LargeGain);

    p.c1 = 95;
    CHECK(override_check(p, c, cfg) == OverrideReason::None);
    p.commit_invalidated = true;
    CHECK(override_check(p, c, cfg) == OverrideReason::NovelObservation);
    p.commit_prefix_risk = 0.9;
    CHECK(override_check(p, c, cfg) == OverrideReason::SafetyBreach);

    c.clear();
    CHECK(override_check(p, c, cfg) == OverrideReason::None);
}

TEST_CASE("hysteresis band holds the class") {
    std::string cls = "risky_short";
    double s = 0.0;
    for (double w : {0.50, 0.62, 0.58}) {
        auto r = smooth_and_hysteresis(w, s, cls, 0.55, 0.65, 1.0);
        s = r.smoothed;
        cls = r.policy_class;
        CHECK(cls == "risky_short");
    }
    auto r = smooth_and_hysteresis(0.70, s, cls, 0.55, 0.65, 1.0);
    CHECK(r.policy_class == "safe_long");
    r = smooth_and_hysteresis(0.60, r.smoothed, r.policy_class, 0.55, 0.65, 1.0);
    CHECK(r.policy_class == "safe_long");
}

TEST_CASE("EMA converges to a constant input") {
    double s = 0.0, prev_err = 1.0;
    for (int i = 0; i < 30; ++i) {
        s = smooth_and_hysteresis(1.0, s, "risky_short", 0.6, 0.9, 0.5).smoothed;
        double err = std::abs(1.0 - s);
        CHECK(err == doctest::Approx(prev_err * 0.5));
        prev_err = err;
    }
}

TEST_CASE("calibrate") {
    CHECK(calibrate(1.0, 1.2, 4, 2) == doctest::Approx(1.2));
    CHECK(calibrate(1.0, 1.0, 4, 2) == 1.0);
    CHECK(calibrate(1.0, 1.2, 1, 2) == 1.0);
    CHECK(calibrate(4.0, 3.0, 4, 2) == 5.0);
    CHECK(calibrate(0.3, 0.1, 4, 2) == 0.2);
}

TEST_CASE("presets validate and round-trip through JSON") {
    for (const auto& name : preset_names()) {
        GovernorConfig g = governor_preset(name);
        CHECK_NOTHROW(validate(g));
        CHECK(governor_from_json(governor_to_json(g)) == g);
    }
    CHECK_THROWS(governor_preset("nonsense"));
    auto j = governor_to_json(governor_preset("default"));
    j["bogus"] = 1;
    CHECK_THROWS(governor_from_json(j));
    GovernorConfig bad;
    bad.theta_plus = bad.theta_minus;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

namespace {

Proposal tie_proposal() {
    Proposal p;
    p.alts = {{Dir::N, 10.0}, {Dir::E, 10.1}};
    p.alt_risk = {0.0, 0.0};
    p.c1 = 10.0;
    p.c2 = 10.1;
    p.near_tie = true;
    p.global_first = Dir::N;
    p.base = BaseAction::Move;
    p.base_dir = Dir::N;
    p.last_choice = Dir::E;
    return p;
}

}  // namespace

TEST_CASE("near tie keeps the previous first step and commits") {
    GovernorConfig cfg = governor_preset("flipflop");
    Commitment c;
    Decision d = govern(tie_proposal(), c, cfg);
    CHECK(d.action == BaseAction::Move);
    REQUIRE(d.dir);
    CHECK(*d.dir == Dir::E);
    CHECK(d.start_commit);
}

TEST_CASE("exhausted pause budget commits") {
    GovernorConfig cfg = governor_preset("hypervigilance");
    cfg.B_pause = 0;
    Commitment c;
    Proposal p = tie_proposal();
    p.base = BaseAction::Pause;
    p.base_dir.reset();
    Decision d = govern(p, c, cfg);
    CHECK(d.action == BaseAction::Move);
}

TEST_CASE("tabu bans the reverse move") {
    GovernorConfig cfg = governor_preset("perseveration");
    Commitment c;
    c.tabu_dir = Dir::S;
    c.tabu_expiry = 5;
    Proposal p;
    p.tick = 5;
    p.alts = {{Dir::S, 1.0}, {Dir::E, 2.0}};
    p.alt_risk = {0.0, 0.0};
    p.c1 = 1.0;
    p.c2 = 2.0;
    p.global_first = Dir::S;
    p.base = BaseAction::Move;
    p.base_dir = Dir::S;
    Decision d = govern(p, c, cfg);
    REQUIRE(d.dir);
    CHECK(*d.dir == Dir::E);

    Commitment expired = c;
    p.tick = 6;
    d = govern(p, expired, cfg);
    CHECK(*d.dir == Dir::S);
}
