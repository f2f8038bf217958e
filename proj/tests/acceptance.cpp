// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "grid_oracles.hpp"
#include "neurosis/detectors.hpp"
#include "neurosis/evolver.hpp"
#include "neurosis/lawmetrics.hpp"
#include "neurosis/scenario_io.hpp"
#include "oracles.hpp"

using namespace neurosis;

namespace {

// Every trace a criterion produces, for the replay check.
struct Produced {
    WorldSpec spec;
    GovernorConfig gov;
    std::uint64_t seed;
    std::string csv;
};
std::vector<Produced> produced;

Trace episode(const WorldSpec& spec, const GovernorConfig& gov, std::uint64_t seed) {
    Trace t = run_episode(spec, gov, seed);
    produced.push_back({spec, gov, seed, trace_to_csv(t)});
    return t;
}

struct Result {
    bool pass;
    std::string detail;
};

bool fires_on(const std::string& m, const Trace& t, const WorldSpec& spec, std::uint64_t seed) {
    return detect(m, t, with_paired_baseline({}, spec, seed)).fired;
}

Result perseveration_exactness() {
    WorldSpec s = canonical_scenario("perseveration");
    Pos A{2, 1}, B{1, 1};
    Grid g(s);
    bool values = g.at(A).risk == 0.1 && g.at(B).risk == 0.3 && g.at({2, 0}).risk == 0.9 &&
                  g.at({3, 1}).risk == 0.9 && g.at({0, 1}).risk == 0.4 && g.at({1, 2}).risk == 0.4;

    Trace off = episode(s, governor_off(), 1);
    bool orbit = off.records.size() >= 4;
    for (size_t i = 0; i < off.records.size(); ++i) {
        Pos want = i % 2 == 0 ? B : A;
        orbit = orbit && off.records[i].pos == want;
    }
    DetectorReport d = detect("perseveration", off);
    int t_detect = d.window_b;

    Trace tabu = episode(s, governor_preset("perseveration"), 1);
    int t_break = -1;
    for (const auto& r : tabu.records)
        if (r.pos != A && r.pos != B) {
            t_break = r.tick;
            break;
        }
    double oc = oracle(s).cost, reg = regret(tabu, s);
    bool ok = values && orbit && d.fired && t_break >= 0 && t_break <= t_detect + 2 && reg <= 0.05 * oc + 1e-12;
    char buf[200];
    std::snprintf(buf, sizeof buf, "orbit %s, detected by tick %d, tabu leaves the pocket at tick %d, regret %.3g of %.3g",
                  orbit ? "A,B,A,B" : "broken", t_detect, t_break, reg, oc);
    return {ok, buf};
}

bool deterministic(const WorldSpec& s, int seeds) {
    std::string first = trace_to_csv(run_episode(s, governor_off(), 1));
    for (int k = 2; k <= seeds; ++k)
        if (trace_to_csv(run_episode(s, governor_off(), k)) != first) return false;
    return true;
}

Result firing_matrix() {
    bool ok = true;
    std::string detail, worst;
    int stochastic = 0;
    for (const auto& m : kModalities) {
        WorldSpec s = canonical_scenario(m);
        bool det = deterministic(s, 50);
        stochastic += !det;
        int hits = 0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) hits += fires_on(m, episode(s, governor_off(), seed), s, seed);
        bool pass = det ? hits == 50 : hits >= 45;
        if (!pass) worst += std::string(" ") + m + "=" + std::to_string(hits);
        ok = ok && pass;
    }
    WorldSpec h = named_scenario("healthy");
    int noisy = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Trace t = episode(h, governor_off(), seed);
        noisy += !fired_modalities(detect_all(t, with_paired_baseline({}, h, seed))).empty();
    }
    ok = ok && noisy == 0;
    detail = "14 scenarios x 50 seeds (" + std::to_string(stochastic) + " stochastic), healthy fired on " +
             std::to_string(noisy) + "/100 seeds";
    if (!worst.empty()) detail += "; short:" + worst;
    return {ok, detail};
}

Result cure_matrix() {
    bool ok = true;
    std::string bad;
    double worst = 0.0;
    for (const auto& m : kModalities) {
        WorldSpec s = canonical_scenario(m);
        GovernorConfig gov = governor_preset(m);
        double oc = oracle(s).cost;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            Trace t = episode(s, gov, seed);
            double frac = regret(t, s) / oc;
            worst = std::max(worst, frac);
            bool pass = !fires_on(m, t, s, seed) && frac <= 0.05 + 1e-12;
            if (!pass && bad.find(m) == std::string::npos) bad += std::string(" ") + m;
            ok = ok && pass;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "14 presets x 50 seeds, worst regret %.3g%% of oracle", 100.0 * worst);
    return {ok, buf + (bad.empty() ? std::string() : "; still firing or over budget:" + bad)};
}

Result phobia() {
    WorldSpec s = named_scenario("phobia");
    std::set<Pos> marked;
    for (const auto& m : s.seasoning.memory_seeds)
        if (m.m > 0.0) marked.insert(m.p);
    Trace t = episode(s, governor_off(), 1);
    bool avoids = true;
    for (const auto& r : t.records) avoids = avoids && !marked.count(r.pos);
    LawScores l = law_scores(t, s);

    // Nearest food by path length with memory ignored.
    WorldSpec plain = s;
    plain.seasoning.weights.w_mem = 0.0;
    plain.seasoning.memory_seeds.clear();
    Trace p = episode(plain, governor_off(), 1);
    Pos eaten = t.records.back().pos, nearest = p.records.back().pos;
    int oracle_len = oracle(s).length;
    bool ok = avoids && l.detour_inflation > 0.0 && p.terminal == Terminal::GoalReached &&
              static_cast<int>(p.records.size()) == oracle_len;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "avoids marked cells: %s, detour %.1f%%, food (%d,%d) vs nearest (%d,%d), w_mem=0 length %zu vs oracle %d",
                  avoids ? "yes" : "no", l.detour_inflation, eaten.x, eaten.y, nearest.x, nearest.y, p.records.size(),
                  oracle_len);
    return {ok, buf};
}

Result oracle_equivalences() {
    Stream r(2025, StreamId::Random);
    int grids = 0, grid_bad = 0;
    for (int i = 0; i < 200; ++i) {
        WorldSpec s = oracles::random_world(r, 12, true);
        Grid g(s);
        CostWeights w = oracles::dyadic_weights(r);
        Plan p = plan_astar(PlanView{&g}, s.start, *s.goal, w, Canon{});
        double o = oracles::uniform_cost(g, s.start, *s.goal, w);
        grid_bad += p.found != (o != kInf) || (p.found && p.c_total != o);
        ++grids;
    }

    oracles::EditGraph eg(6);
    long pairs = 0, edit_bad = 0;
    for (int i = 0; i < eg.size(); ++i) {
        auto d = eg.distances_from(i);
        for (int j = 0; j < eg.size(); ++j) {
            edit_bad += prefix_edit_fraction(eg.str(i), eg.str(j), 6) != d[j] / 6.0;
            ++pairs;
        }
    }
    // Shorter horizons truncate; strings one move longer than K exercise that.
    // Ids of strings up to length 5 agree between the two graphs.
    oracles::EditGraph short_graph(5);
    std::vector<std::vector<int>> D;
    for (int i = 0; i < short_graph.size(); ++i) D.push_back(short_graph.distances_from(i));
    for (int K = 1; K <= 5; ++K) {
        int n = 0;
        for (int len = 0; len <= K + 1; ++len) n += 1 << (2 * len);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const std::string &a = eg.str(i), &b = eg.str(j);
                int dk = D[eg.id(a.substr(0, K))][eg.id(b.substr(0, K))];
                edit_bad += prefix_edit_fraction(a, b, K) != static_cast<double>(dk) / K;
                ++pairs;
            }
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "A* vs uniform-cost: %d/%d exact; prefix edit vs BFS: %ld mismatches over %ld comparisons",
                  grids - grid_bad, grids, edit_bad, pairs);
    return {grid_bad == 0 && edit_bad == 0, buf};
}

double rho(const Trace& t, int from, int to) {
    double real = 0.0, pred = 0.0;
    for (const auto& r : t.records)
        if (r.tick >= from && r.tick <= to && r.action.size() == 1) {
            real += r.energy_step;
            pred += r.pred_energy;
        }
    return pred > 0.0 ? real / pred : 1.0;
}

Result metric_mismatch() {
    WorldSpec s = canonical_scenario("metric_mismatch");
    Trace off = episode(s, governor_off(), 1);
    DetectorReport d = detect("metric_mismatch", off);
    double pre = d.stats.value("rho_energy", 0.0);
    int run = d.stats.value("rho_run", 0);

    Trace cal = episode(s, governor_preset("metric_mismatch"), 1);
    int engage = -1;
    for (size_t i = 0; i < cal.records.size() && i < off.records.size(); ++i)
        if (cal.records[i].pred_energy != off.records[i].pred_energy) {
            engage = cal.records[i].tick;
            break;
        }
    double post = engage >= 0 ? rho(cal, engage, engage + 30) : 0.0;
    bool ok = d.fired && pre >= 1.25 && run >= DetectorConfig{}.L_run && engage >= 0 && post >= 0.9 && post <= 1.1;
    char buf[200];
    std::snprintf(buf, sizeof buf, "rho %.3g over a %d-tick run before; calibration engages at tick %d, rho %.3g after",
                  pre, run, engage, post);
    return {ok, buf};
}

Result hysteresis() {
    const double lo = 0.6, hi = 0.95, alpha = 0.25, mid = 0.5 * (lo + hi);
    double s_on = mid, s_off = mid;
    std::string c_on = "risky_short", c_off = "risky_short";
    int flips_on = 0, flips_off = 0, crossings = 0;
    bool inside = true;
    for (int t = 0; t < 400; ++t) {
        double raw = mid + 0.16 * std::sin(t * 0.3);
        auto a = smooth_and_hysteresis(raw, s_on, c_on, lo, hi, alpha, true);
        auto b = smooth_and_hysteresis(raw, s_off, c_off, lo, hi, alpha, false);
        inside = inside && a.smoothed > lo && a.smoothed < hi;
        crossings += (s_off > mid) != (b.smoothed > mid);
        flips_on += a.policy_class != c_on;
        flips_off += b.policy_class != c_off;
        s_on = a.smoothed;
        c_on = a.policy_class;
        s_off = b.smoothed;
        c_off = b.policy_class;
    }
    bool ok = inside && flips_on == 0 && crossings > 0 && flips_off >= crossings;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d flips with hysteresis; %d flips over %d midline crossings without", flips_on,
                  flips_off, crossings);
    return {ok, buf};
}

Result evolver() {
    unsigned threads = threads_from_env();
    int wins = 0;
    bool mono = true, top_fires = true;
    std::string shrink_note = "no entry to shrink";
    bool minimal = false;
    for (std::uint64_t m = 1; m <= 10; ++m) {
        EvolveConfig cfg;
        cfg.master_seed = m;
        EvolveResult e = evolve(cfg, threads);
        EvolveResult r = random_search(cfg, threads);
        for (size_t i = 1; i < e.best_per_generation.size(); ++i)
            mono = mono && e.best_per_generation[i] >= e.best_per_generation[i - 1];
        wins += e.best_per_generation.back() > r.best_per_generation.back();
        top_fires = top_fires && !e.bank.entries.empty() && !e.bank.entries[0].fitness.fired.empty();
        for (const auto& entry : e.bank.entries)
            for (auto seed : cfg.eval.seeds) episode(entry.spec, cfg.eval.governor, seed);

        if (m == 1 && !e.bank.entries.empty() && !e.bank.entries[0].fitness.fired.empty()) {
            const auto& top = e.bank.entries[0];
            const std::string& target = top.fitness.fired[0];
            Genome s = shrink(*top.genome, target, cfg.eval);
            minimal = fires(s, target, cfg.eval);
            for (size_t i = 0; i < s.genes.size(); ++i) {
                Genome less = s;
                less.genes.erase(less.genes.begin() + i);
                minimal = minimal && !fires(less, target, cfg.eval);
            }
            shrink_note = "shrink " + target + " " + std::to_string(top.genome->genes.size()) + " -> " +
                          std::to_string(s.genes.size()) + " genes, " + (minimal ? "1-minimal" : "NOT 1-minimal");
        }
    }
    bool ok = mono && top_fires && wins >= 8 && minimal;
    return {ok, std::string("best-of-generation ") + (mono ? "non-decreasing" : "DECREASED") + ", top entry " +
                    (top_fires ? "fires" : "silent") + ", beats random search on " + std::to_string(wins) +
                    "/10 seeds, " + shrink_note};
}

Result synthesis() {
    Bank bank;
    for (const char* m : {"perseveration", "corridor_thrash"})
        bank.entries.push_back(entry_from_spec(m, canonical_scenario(m), bank.eval));
    SynthResult r = synthesize_governor(bank, {}, threads_from_env());
    GovernorScore def = score_governor(governor_preset("default"), bank);
    for (const auto& e : bank.entries)
        for (auto seed : bank.eval.seeds) episode(e.spec, r.config, seed);
    double worst = 0.0;
    for (double w : r.score.worst_regret_fraction) worst = std::max(worst, w);
    bool ok = r.score.feasible && r.score.total <= def.total;
    char buf[200];
    std::snprintf(buf, sizeof buf, "synthesized total %.4g vs default %.4g, worst regret %.3g%%, %s", r.score.total,
                  def.total, 100.0 * worst, r.score.feasible ? "feasible" : "infeasible");
    return {ok, buf};
}

Result replay() {
    size_t same = 0;
    for (const auto& p : produced) {
        WorldSpec back = parse_scenario(serialize_scenario(p.spec));
        GovernorConfig gov = governor_from_json(governor_to_json(p.gov));
        same += trace_to_csv(run_episode(back, gov, p.seed)) == p.csv;
    }
    return {same == produced.size() && !produced.empty(),
            std::to_string(same) + "/" + std::to_string(produced.size()) + " traces byte-identical on replay"};
}

}  // namespace

int main() {
    std::vector<std::pair<const char*, std::function<Result()>>> criteria{
        {"perseveration exactness", perseveration_exactness},
        {"targeted firing matrix", firing_matrix},
        {"cure matrix", cure_matrix},
        {"phobia reproduction", phobia},
        {"oracle equivalences", oracle_equivalences},
        {"metric-mismatch closure", metric_mismatch},
        {"hysteresis and smoothing", hysteresis},
        {"evolver", evolver},
        {"governor synthesis", synthesis},
        {"end-to-end replay", replay},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %zu %s: %s (%s) [%.1fs]\n", i + 1, r.pass ? "PASS" : "FAIL", criteria[i].first,
                    r.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !r.pass;
    }
    return failed ? 1 : 0;
}
