#include "doctest.h"

#include <filesystem>
#include <set>

#include "neurosis/evolver.hpp"
#include "neurosis/scenario_io.hpp"

using namespace neurosis;
namespace fs = std::filesystem;

namespace {

// Two slippery, expensive ice bands spanning row 4..5 of the default board.
Genome ice_wall() {
    Genome g;
    g.genes.push_back({GeneType::Band, {1, 0, 4, 6, 2, 1.0, 1.0}});
    g.genes.push_back({GeneType::Band, {1, 6, 4, 4, 2, 1.0, 1.0}});
    return g;
}

// Genes whose decoded effect is nothing: zero memory, walls off the board.
std::vector<Gene> inert_genes() {
    return {
        {GeneType::MemSeed, {3, 3, 0}},
        {GeneType::Wall, {11, 0, 5, 1}},
        {GeneType::MemSeed, {7, 2, 0}},
        {GeneType::Wall, {10, 10, 2, 0}},
        {GeneType::MemSeed, {1, 8, 0}},
    };
}

EvolveConfig small_config(std::uint64_t seed) {
    EvolveConfig c;
    c.pop = 8;
    c.generations = 3;
    c.bank_size = 4;
    c.master_seed = seed;
    c.eval.seeds = {1};
    return c;
}

std::multiset<std::vector<double>> genes_of(const Genome& a, const Genome& b) {
    std::multiset<std::vector<double>> s;
    for (const auto* g : {&a, &b})
        for (const auto& gene : g->genes) {
            auto v = gene.p;
            v.insert(v.begin(), static_cast<double>(gene.type));
            s.insert(v);
        }
    return s;
}

}  // namespace

TEST_CASE("empty genome decodes to the open default board") {
    Decoded d = decode(Genome{});
    REQUIRE(d.valid);
    CHECK(d.spec.width == 10);
    CHECK(d.spec.height == 10);
    CHECK(d.spec.start == Pos{0, 0});
    REQUIRE(d.spec.goal);
    CHECK(*d.spec.goal == Pos{9, 9});
    CHECK(d.spec.cells.empty());
    CHECK(d.spec.max_ticks == 60);
}

TEST_CASE("decode rules") {
    SUBCASE("walls never cover the start or goal") {
        Genome g;
        g.genes.push_back({GeneType::Wall, {0, 0, 12, 0}});
        g.genes.push_back({GeneType::Wall, {0, 1, 12, 0}});
        Decoded d = decode(g);
        CHECK_FALSE(d.valid);  // row 1 seals the start row off
        g.genes.pop_back();
        d = decode(g);
        REQUIRE(d.valid);
        CHECK_FALSE(d.spec.cells.count({0, 0}));
        CHECK(d.spec.cells.at({1, 0}).kind == Kind::Rock);
    }
    SUBCASE("food replaces the goal and survives later walls") {
        Genome g;
        g.genes.push_back({GeneType::Food, {5, 5, 10, 0}});
        g.genes.push_back({GeneType::Wall, {3, 5, 4, 0}});
        Decoded d = decode(g);
        REQUIRE(d.valid);
        CHECK_FALSE(d.spec.goal);
        CHECK(d.spec.cells.at({5, 5}).kind == Kind::Food);
        CHECK(d.spec.seasoning.stop_on_meal);
    }
    SUBCASE("out-of-range parameters and oversized genomes are invalid") {
        Genome g;
        g.genes.push_back({GeneType::Dims, {2, 5}});
        CHECK_FALSE(decode(g).valid);
        g.genes[0] = {GeneType::Dims, {4.5, 5}};
        CHECK_FALSE(decode(g).valid);
        g.genes[0] = {GeneType::Dims, {4}};
        CHECK_FALSE(decode(g).valid);
        Genome big;
        big.genes.assign(kMaxGenes + 1, Gene{GeneType::MemSeed, {1, 1, 0}});
        CHECK_FALSE(decode(big).valid);
    }
}

TEST_CASE("decode never throws and valid worlds are solvable") {
    Stream rng(11, StreamId::Random);
    int valid = 0;
    for (int i = 0; i < 10000; ++i) {
        Genome g = random_genome(rng, 10);
        if (i % 5 == 0)
            for (auto& gene : g.genes)
                for (auto& p : gene.p) p += (rng.uniform() - 0.5) * 4.0;
        Decoded d;
        REQUIRE_NOTHROW(d = decode(g));
        if (!d.valid) {
            CHECK_FALSE(d.error.empty());
            continue;
        }
        ++valid;
        CHECK(d.spec.width >= 3);
        CHECK(d.spec.width <= 12);
        CHECK_FALSE(d.spec.cells.count(d.spec.start));
        CHECK(std::isfinite(oracle(d.spec).cost));
    }
    CHECK(valid > 5000);
}

TEST_CASE("vary") {
    Stream src(5, StreamId::Random);
    for (int i = 0; i < 200; ++i) {
        Genome a = random_genome(src, 8), b = random_genome(src, 8);
        Stream r(i, StreamId::Evolve);

        auto same = vary(a, b, {0.0, 0.0}, r);
        CHECK(same.first == a);
        CHECK(same.second == b);

        auto cut = vary(a, b, {1.0, 0.0}, r);
        CHECK(genes_of(cut.first, cut.second) == genes_of(a, b));

        auto mut = vary(a, b, {0.5, 1.0}, r, 6);
        for (const Genome* c : {&mut.first, &mut.second}) {
            CHECK(c->genes.size() <= 6);
            CHECK(decode(*c).error.find("out of range") == std::string::npos);
        }

        Stream r1(99, StreamId::Evolve), r2(99, StreamId::Evolve);
        CHECK(vary(a, b, {}, r1) == vary(a, b, {}, r2));
    }
}

TEST_CASE("evaluation is deterministic and rewards obstacles") {
    EvalConfig cfg;
    Fitness a = evaluate(ice_wall(), cfg), b = evaluate(ice_wall(), cfg);
    CHECK(a.scalar == b.scalar);
    CHECK(a.fired == b.fired);
    Fitness empty = evaluate(Genome{}, cfg);
    CHECK(empty.fired.empty());
    CHECK(a.scalar > empty.scalar);
    CHECK(a.scalar == doctest::Approx(cfg.a * a.law_pressure + cfg.b * a.neurosis + cfg.c * a.explanatory_gap));

    Genome bad;
    bad.genes.push_back({GeneType::Wall, {0, 1, 12, 0}});
    CHECK(evaluate(bad, cfg).scalar == 0.0);
}

TEST_CASE("mean mismatch run") {
    Trace t;
    auto rec = [](std::optional<Dir> l, std::optional<Dir> g) {
        TickRecord r;
        r.local_first = l;
        r.global_first = g;
        return r;
    };
    CHECK(mean_mismatch_run(t) == 0.0);
    t.records = {rec(Dir::N, Dir::E), rec(Dir::N, Dir::E), rec(Dir::N, Dir::N), rec(Dir::S, Dir::E),
                 rec(std::nullopt, Dir::E), rec(Dir::W, Dir::E), rec(Dir::W, Dir::E), rec(Dir::W, Dir::E)};
    CHECK(mean_mismatch_run(t) == doctest::Approx(2.0));
}

TEST_CASE("evolve bookkeeping") {
    EvolveConfig c = small_config(4);
    c.generations = 0;
    auto zero = evolve(c, 1);
    CHECK(zero.best_per_generation.size() == 1);
    CHECK(zero.evaluations == static_cast<std::uint64_t>(c.pop));

    c = small_config(4);
    auto one = evolve(c, 1);
    auto three = evolve(c, 3);
    REQUIRE(one.best_per_generation.size() == 4);
    CHECK(one.best_per_generation == three.best_per_generation);
    REQUIRE(one.bank.entries.size() == three.bank.entries.size());
    for (size_t i = 0; i < one.bank.entries.size(); ++i) CHECK(one.bank.entries[i].genome == three.bank.entries[i].genome);
    for (size_t i = 1; i < one.best_per_generation.size(); ++i)
        CHECK(one.best_per_generation[i] >= one.best_per_generation[i - 1]);

    std::set<std::string> hashes;
    double prev = kInf;
    for (const auto& e : one.bank.entries) {
        CHECK(hashes.insert(spec_hash(e.spec)).second);
        CHECK(e.fitness.scalar <= prev);
        prev = e.fitness.scalar;
    }

    auto rs = random_search(c, 2);
    CHECK(rs.evaluations == static_cast<std::uint64_t>(c.pop * (c.generations + 1)));
    for (size_t i = 1; i < rs.best_per_generation.size(); ++i)
        CHECK(rs.best_per_generation[i] >= rs.best_per_generation[i - 1]);
}

TEST_CASE("evolve config validation and JSON") {
    EvolveConfig c;
    CHECK_NOTHROW(validate(c));
    auto back = evolve_config_from_json(evolve_config_to_json(c));
    CHECK(evolve_config_to_json(back) == evolve_config_to_json(c));

    auto j = evolve_config_to_json(c);
    j["popsize"] = 3;
    CHECK_THROWS_AS(evolve_config_from_json(j), std::invalid_argument);
    j = evolve_config_to_json(c);
    j["elitism"] = 40;
    CHECK_THROWS_AS(evolve_config_from_json(j), std::invalid_argument);
    j = evolve_config_to_json(c);
    j["eval"]["governor"] = "perseveration";
    CHECK(evolve_config_from_json(j).eval.governor.name == "perseveration");
    j["eval"]["seeds"] = nlohmann::ordered_json::array();
    CHECK_THROWS_AS(evolve_config_from_json(j), std::invalid_argument);
}

TEST_CASE("shrink drops inert genes and is one-minimal") {
    EvalConfig cfg;
    Genome g = ice_wall();
    for (const auto& gene : inert_genes()) g.genes.insert(g.genes.begin() + 1, gene);
    REQUIRE(fires(g, "metric_mismatch", cfg));
    Genome s = shrink(g, "metric_mismatch", cfg);
    CHECK(fires(s, "metric_mismatch", cfg));
    CHECK(s.genes.size() <= 2);
    for (size_t i = 0; i < s.genes.size(); ++i) {
        Genome less = s;
        less.genes.erase(less.genes.begin() + i);
        CHECK_FALSE(fires(less, "metric_mismatch", cfg));
    }
    CHECK_THROWS_AS(shrink(Genome{}, "metric_mismatch", cfg), std::invalid_argument);
    CHECK_THROWS_AS(fires(g, "nonsense", cfg), std::invalid_argument);
}

TEST_CASE("bank round-trips through disk") {
    auto res = evolve(small_config(2), 1);
    REQUIRE_FALSE(res.bank.entries.empty());
    res.bank.entries.push_back(entry_from_spec("phobia", named_scenario("phobia"), res.bank.eval));
    fs::path dir = fs::temp_directory_path() / "neurosis_bank_test";
    fs::remove_all(dir);
    save_bank(res.bank, dir.string());
    Bank back = load_bank(dir.string());
    REQUIRE(back.entries.size() == res.bank.entries.size());
    for (size_t i = 0; i < back.entries.size(); ++i) {
        const auto& e = back.entries[i];
        CAPTURE(e.id);
        CHECK(e.genome == res.bank.entries[i].genome);
        CHECK(fs::exists(dir / e.id / "diff.json"));
        CHECK(fs::exists(dir / e.id / "traces" / "seed_1.csv"));
        Fitness again = evaluate_spec(e.spec, back.eval);
        CHECK(std::abs(again.scalar - e.fitness.scalar) <= 1e-9);
        CHECK(again.fired == e.fitness.fired);
        if (e.genome) CHECK(spec_hash(decode(*e.genome, back.eval.agent, back.eval.max_ticks).spec) == spec_hash(e.spec));
    }
    CHECK_FALSE(back.entries.back().genome);
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_bank(dir.string()), std::exception);
}

TEST_CASE("genome JSON") {
    Stream r(3, StreamId::Random);
    for (int i = 0; i < 50; ++i) {
        Genome g = random_genome(r, 8);
        CHECK(genome_from_json(genome_to_json(g)) == g);
    }
    CHECK_THROWS_AS(genome_from_json(nlohmann::ordered_json::parse(R"({"genes":[{"type":"moat"}]})")),
                    std::invalid_argument);
    CHECK_THROWS_AS(genome_from_json(nlohmann::ordered_json::parse(R"({"genes":[{"type":"noise","jitter":0}]})")),
                    std::invalid_argument);
}

TEST_CASE("synthesize_governor on a perseveration bank") {
    Bank bank;
    bank.eval.seeds = {1};
    bank.entries.push_back(entry_from_spec("p", canonical_scenario("perseveration"), bank.eval));
    SynthConfig sc;
    sc.pop = 6;
    sc.generations = 2;
    auto res = synthesize_governor(bank, sc, 1);
    auto def = score_governor(governor_preset("default"), bank);
    CHECK(res.score.feasible);
    CHECK(res.score.total <= def.total);
    CHECK_NOTHROW(validate(res.config));
    auto again = score_governor(res.config, bank);
    CHECK(again.total == res.score.total);

    CHECK_THROWS_AS(synthesize_governor(Bank{}, sc, 1), std::invalid_argument);
}

TEST_CASE("counterfactuals") {
    EvalConfig cfg;
    BankEntry e = entry_from_spec("phobia", named_scenario("phobia"), cfg);

    auto self = counterfactual_trace(e, {}, cfg);
    REQUIRE(self.traces.size() == 1);
    CHECK(self.diff["runs"].empty());
    CHECK(trace_to_csv(self.traces[0]) == trace_to_csv(run_episode(e.spec, cfg.governor, 1)));

    auto mem = counterfactual_trace(e, {Toggle::Memory, Toggle::Memory}, cfg);
    REQUIRE(mem.traces.size() == 2);
    const auto& run = mem.diff["runs"][0];
    CHECK(run["toggles"][0] == "memory");
    CHECK(run["first_divergence"].is_number());
    CHECK(run["score_deltas"]["regret"].get<double>() < 0.0);
    CHECK(mem.traces[1].records.size() < mem.traces[0].records.size());

    auto all = counterfactual_trace(e, {Toggle::Governor, Toggle::Visibility, Toggle::Calibration}, cfg);
    CHECK(all.traces.size() == 8);
    CHECK(all.diff["runs"].size() == 7);
    for (const auto& t : {Toggle::Governor, Toggle::Memory, Toggle::Visibility, Toggle::Calibration})
        CHECK(toggle_from_name(toggle_name(t)) == t);
}

TEST_CASE("rationale dominance counts risk-led mismatch ticks") {
    WorldSpec s;
    s.width = 4;
    s.height = 1;
    s.goal = Pos{3, 0};
    s.cells[{1, 0}] = Cell::risk_band(1.0);
    s.cells[{2, 0}] = Cell::risk_band(1.0);
    Trace t;
    TickRecord r;
    r.pos = {0, 0};
    r.plan_steps = "EEE";
    r.local_first = Dir::N;
    r.global_first = Dir::E;
    r.w_risk = 2.0;  // risk 4 against distance 3
    t.records.push_back(r);
    r.w_risk = 1.0;  // risk 2 against distance 3
    t.records.push_back(r);
    r.local_first = Dir::E;
    t.records.push_back(r);
    CHECK(rationale_dominance(t, s) == 0.5);
    CHECK(rationale_dominance(Trace{}, s) == 0.0);
}
