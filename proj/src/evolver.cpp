#include "neurosis/evolver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <thread>

#include "neurosis/scenario_io.hpp"

namespace neurosis {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------- genes

const char* gene_type_name(GeneType t) {
    switch (t) {
        case GeneType::Dims: return "dims";
        case GeneType::Wall: return "wall";
        case GeneType::Band: return "band";
        case GeneType::Food: return "food";
        case GeneType::MemSeed: return "memory_seed";
        case GeneType::Schedule: return "schedule";
        case GeneType::Noise: return "noise";
    }
    return "?";
}

std::optional<GeneType> gene_type_from_name(const std::string& s) {
    for (int i = 0; i < kGeneTypes; ++i) {
        auto t = static_cast<GeneType>(i);
        if (s == gene_type_name(t)) return t;
    }
    return std::nullopt;
}

const std::vector<ParamSpec>& gene_params(GeneType t) {
    static const std::vector<std::vector<ParamSpec>> table{
        {{"w", 3, 12, true}, {"h", 3, 12, true}},
        {{"x", 0, 11, true}, {"y", 0, 11, true}, {"len", 1, 12, true}, {"vertical", 0, 1, true}},
        {{"kind", 0, 2, true},
         {"x", 0, 11, true},
         {"y", 0, 11, true},
         {"w", 1, 6, true},
         {"h", 1, 6, true},
         {"level", 0, 1, false},
         {"extra", 0, 1, false}},
        {{"x", 0, 11, true}, {"y", 0, 11, true}, {"meal", 1, 20, false}, {"poison", 0, 1, true}},
        {{"x", 0, 11, true}, {"y", 0, 11, true}, {"m", 0, 3, false}},
        {{"x", 0, 11, true},
         {"y", 0, 11, true},
         {"period", 1, 10, true},
         {"spike", 0, 2, false},
         {"decay", 0, 1, false}},
        {{"jitter", 0, 0.05, false}, {"slip", 0, 0.9, false}},
    };
    return table[static_cast<int>(t)];
}

namespace {

double clip_param(const ParamSpec& ps, double v) {
    v = std::clamp(v, ps.lo, ps.hi);
    return ps.integer ? std::round(v) : v;
}

double draw_param(const ParamSpec& ps, Stream& rng) {
    if (ps.integer) return ps.lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(ps.hi - ps.lo) + 1));
    return ps.lo + (ps.hi - ps.lo) * rng.uniform();
}

}  // namespace

Gene random_gene(Stream& rng) {
    Gene g;
    g.type = static_cast<GeneType>(rng.below(kGeneTypes));
    for (const auto& ps : gene_params(g.type)) g.p.push_back(draw_param(ps, rng));
    return g;
}

Genome random_genome(Stream& rng, int max_genes) {
    Genome g;
    int n = 1 + static_cast<int>(rng.below(std::max(1, max_genes)));
    for (int i = 0; i < n; ++i) g.genes.push_back(random_gene(rng));
    return g;
}

// ---------------------------------------------------------------- decode

Decoded decode(const Genome& g, const Seasoning& agent, int max_ticks) {
    Decoded d;
    auto fail = [&](std::string why) {
        d.valid = false;
        d.error = std::move(why);
        return d;
    };
    if (static_cast<int>(g.genes.size()) > kMaxGenes) return fail("too many genes");
    for (const auto& gene : g.genes) {
        const auto& ps = gene_params(gene.type);
        if (gene.p.size() != ps.size()) return fail(std::string(gene_type_name(gene.type)) + ": wrong arity");
        for (size_t i = 0; i < ps.size(); ++i) {
            double v = gene.p[i];
            if (!std::isfinite(v) || v < ps[i].lo || v > ps[i].hi || (ps[i].integer && v != std::round(v)))
                return fail(std::string(gene_type_name(gene.type)) + "." + ps[i].name + " out of range");
        }
    }

    WorldSpec& s = d.spec;
    s.id = "evolved";
    s.width = 10;
    s.height = 10;
    s.start = {0, 0};
    s.max_ticks = max_ticks;
    s.proceed_cue_tick = 0;
    s.seasoning = agent;
    for (const auto& gene : g.genes)
        if (gene.type == GeneType::Dims) {
            s.width = static_cast<int>(gene.p[0]);
            s.height = static_cast<int>(gene.p[1]);
        }
    auto inside = [&](Pos p) { return p.x >= 0 && p.y >= 0 && p.x < s.width && p.y < s.height; };

    std::map<Pos, Cell> food;
    for (const auto& gene : g.genes) {
        const auto& p = gene.p;
        switch (gene.type) {
            case GeneType::Dims: break;
            case GeneType::Wall: {
                Pos at{static_cast<int>(p[0]), static_cast<int>(p[1])};
                for (int i = 0; i < static_cast<int>(p[2]); ++i) {
                    Pos q = p[3] > 0.5 ? Pos{at.x, at.y + i} : Pos{at.x + i, at.y};
                    if (inside(q)) s.cells[q] = Cell::rock();
                }
                break;
            }
            case GeneType::Band: {
                Cell c;
                int kind = static_cast<int>(p[0]);
                if (kind == 0) {
                    c = Cell::risk_band(p[5]);
                } else if (kind == 1) {
                    c = Cell::ice(0.9 * p[5], 1.0 + 2.0 * p[6]);
                } else {
                    c = Cell::mirage(p[5]);
                    s.seasoning.mirage_pull = std::max(s.seasoning.mirage_pull, 6.0 * p[6]);
                }
                for (int dx = 0; dx < static_cast<int>(p[3]); ++dx)
                    for (int dy = 0; dy < static_cast<int>(p[4]); ++dy) {
                        Pos q{static_cast<int>(p[1]) + dx, static_cast<int>(p[2]) + dy};
                        if (inside(q)) s.cells[q] = c;
                    }
                break;
            }
            case GeneType::Food: {
                Pos q{static_cast<int>(p[0]), static_cast<int>(p[1])};
                if (!inside(q)) break;
                Cell c = Cell::food(p[2], p[3] > 0.5);
                s.cells[q] = c;
                food[q] = c;
                break;
            }
            case GeneType::MemSeed: {
                Pos q{static_cast<int>(p[0]), static_cast<int>(p[1])};
                if (!inside(q)) break;
                auto& seeds = s.seasoning.memory_seeds;
                std::erase_if(seeds, [&](const MemorySeed& m) { return m.p == q; });
                seeds.push_back({q, p[2]});
                break;
            }
            case GeneType::Schedule: {
                ThreatSchedule t;
                t.cues = {{static_cast<int>(p[0]), static_cast<int>(p[1])}};
                t.radius = 1;
                t.period = static_cast<int>(p[2]);
                t.spike = p[3];
                t.decay = p[4];
                t.w_min = s.seasoning.weights.w_risk;
                t.w_max = t.w_min + 2.0 * p[3];
                s.seasoning.threat = t;
                break;
            }
            case GeneType::Noise: {
                s.seasoning.jitter = p[0];
                for (auto& [q, c] : s.cells)
                    if (c.kind == Kind::Ice) c.slip_prob = p[1];
                break;
            }
        }
    }

    // Food sits where its gene put it, whatever came later.
    food.erase(s.start);
    for (const auto& [q, c] : food) s.cells[q] = c;
    s.cells.erase(s.start);
    bool edible = std::any_of(food.begin(), food.end(), [](const auto& kv) { return !kv.second.poisonous; });
    if (!edible) {
        s.goal = Pos{s.width - 1, s.height - 1};
        if (!food.count(*s.goal)) s.cells.erase(*s.goal);
    } else {
        s.seasoning.stop_on_meal = true;
    }
    std::erase_if(s.seasoning.memory_seeds, [&](const MemorySeed& m) { return m.m <= 0.0; });

    try {
        for (const auto& [q, c] : s.cells) validate_cell(c);
        Grid grid(s);
        auto targets = objective_cells(s);
        std::vector<char> seen(grid.size(), 0);
        std::queue<Pos> q;
        q.push(s.start);
        seen[grid.index(s.start)] = 1;
        bool reach = false;
        while (!q.empty() && !reach) {
            Pos u = q.front();
            q.pop();
            if (std::find(targets.begin(), targets.end(), u) != targets.end() && u != s.start) reach = true;
            for (Dir dir : kAllDirs) {
                Pos v = step(u, dir);
                if (grid.in_bounds(v) && grid.passable(v) && !seen[grid.index(v)]) {
                    seen[grid.index(v)] = 1;
                    q.push(v);
                }
            }
        }
        if (!reach) return fail("no objective reachable from the start");
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    d.valid = true;
    return d;
}

// ---------------------------------------------------------------- variation

std::pair<Genome, Genome> vary(const Genome& a, const Genome& b, const VaryRates& rates, Stream& rng,
                               int max_genes) {
    Genome x = a, y = b;
    if (rng.uniform() < rates.crossover) {
        size_t i = rng.below(a.genes.size() + 1), j = rng.below(b.genes.size() + 1);
        x.genes.assign(a.genes.begin(), a.genes.begin() + i);
        x.genes.insert(x.genes.end(), b.genes.begin() + j, b.genes.end());
        y.genes.assign(b.genes.begin(), b.genes.begin() + j);
        y.genes.insert(y.genes.end(), a.genes.begin() + i, a.genes.end());
    }
    for (Genome* child : {&x, &y}) {
        for (auto& gene : child->genes) {
            if (rng.uniform() >= rates.mutation) continue;
            const auto& ps = gene_params(gene.type);
            for (size_t k = 0; k < ps.size(); ++k)
                gene.p[k] = clip_param(ps[k], gene.p[k] + 0.1 * (ps[k].hi - ps[k].lo) * rng.gaussian());
        }
        if (static_cast<int>(child->genes.size()) > max_genes) child->genes.resize(max_genes);
    }
    return {x, y};
}

// ---------------------------------------------------------------- fitness

double mean_mismatch_run(const Trace& t) {
    int runs = 0, total = 0, cur = 0;
    for (const auto& r : t.records) {
        bool mis = r.local_first && r.global_first && *r.local_first != *r.global_first;
        if (mis) {
            ++cur;
        } else if (cur) {
            ++runs;
            total += cur;
            cur = 0;
        }
    }
    if (cur) {
        ++runs;
        total += cur;
    }
    return runs ? static_cast<double>(total) / runs : 0.0;
}

double rationale_dominance(const Trace& t, const WorldSpec& spec) {
    Grid grid(spec);
    const auto& w = spec.seasoning.weights;
    int mism = 0, dominated = 0;
    Pos at = spec.start;
    for (const auto& r : t.records) {
        Pos from = at;
        at = r.pos;
        if (!(r.local_first && r.global_first && *r.local_first != *r.global_first)) continue;
        ++mism;
        double risk = 0.0, rest = 0.0;
        Pos p = from;
        for (char ch : r.plan_steps) {
            auto d = dir_from_char(ch);
            if (!d) break;
            p = step(p, *d);
            const Cell& c = grid.at(p);
            risk += r.w_risk * c.risk;
            rest += w.w_dist + r.w_energy * spec.seasoning.base_energy * c.energy_factor / (1.0 - c.slip_prob);
        }
        dominated += risk > rest;
    }
    return mism ? static_cast<double>(dominated) / mism : 0.0;
}

double law_pressure(const LawScores& s, const WorldSpec& spec) {
    double T = std::max(1, spec.max_ticks);
    double first = s.time_to_aid / T;
    double second = s.proceed_latency ? *s.proceed_latency / T : 0.0;
    double base = spec.seasoning.base_energy > 0.0 ? spec.seasoning.base_energy : 1.0;
    double third = std::clamp(s.energy_per_meter / base - 1.0, 0.0, 1.0);
    return first + second + third;
}

Fitness evaluate_spec(const WorldSpec& spec, const EvalConfig& cfg) {
    Fitness f;
    if (cfg.seeds.empty()) throw std::invalid_argument("evaluation needs at least one seed");
    std::set<std::string> fired;
    for (auto seed : cfg.seeds) {
        Trace t = run_episode(spec, cfg.governor, seed);
        Audit a = audit(t, spec);
        f.law_pressure += law_pressure(a.scores, spec);
        f.neurosis += a.scores.neurosis_aggregate;
        f.explanatory_gap += mean_mismatch_run(t) / std::max(1, spec.max_ticks);
        f.rationale_dominance += rationale_dominance(t, spec);
        for (const auto& m : fired_modalities(a.reports)) fired.insert(m);
    }
    double n = static_cast<double>(cfg.seeds.size());
    f.law_pressure /= n;
    f.neurosis /= n;
    f.explanatory_gap /= n;
    f.rationale_dominance /= n;
    f.scalar = cfg.a * f.law_pressure + cfg.b * f.neurosis + cfg.c * f.explanatory_gap;
    for (const auto& m : kModalities)
        if (fired.count(m)) f.fired.push_back(m);
    return f;
}

Fitness evaluate(const Genome& g, const EvalConfig& cfg) {
    Decoded d = decode(g, cfg.agent, cfg.max_ticks);
    if (!d.valid) return {};
    return evaluate_spec(d.spec, cfg);
}

// ---------------------------------------------------------------- config

void validate(const EvolveConfig& c) {
    auto fail = [](const char* m) { throw std::invalid_argument(m); };
    if (c.pop < 2) fail("pop must be >= 2");
    if (c.generations < 0) fail("generations must be >= 0");
    if (c.elitism < 1 || c.elitism > c.pop) fail("elitism must lie in [1, pop]");
    if (c.tournament < 1) fail("tournament must be >= 1");
    if (!(c.rates.crossover >= 0 && c.rates.crossover <= 1) || !(c.rates.mutation >= 0 && c.rates.mutation <= 1))
        fail("rates must lie in [0,1]");
    if (c.bank_size < 1) fail("bank_size must be >= 1");
    if (c.max_genes < 1 || c.max_genes > kMaxGenes) fail("max_genes out of range");
    if (c.init_genes < 1 || c.init_genes > c.max_genes) fail("init_genes must lie in [1, max_genes]");
    if (c.eval.seeds.empty()) fail("seeds must not be empty");
    if (c.eval.max_ticks < 1) fail("max_ticks must be >= 1");
    if (!(c.eval.a >= 0 && c.eval.b >= 0 && c.eval.c >= 0)) fail("fitness weights must be >= 0");
    validate(c.eval.governor);
}

namespace {

ojson eval_to_json(const EvalConfig& e) {
    ojson j;
    j["seeds"] = e.seeds;
    j["max_ticks"] = e.max_ticks;
    j["a"] = e.a;
    j["b"] = e.b;
    j["c"] = e.c;
    j["governor"] = governor_to_json(e.governor);
    j["agent"] = seasoning_to_json(e.agent);
    return j;
}

void only_keys(const ojson& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
            throw std::invalid_argument(std::string(where) + ": unknown key '" + it.key() + "'");
}

EvalConfig eval_from_json(const ojson& j) {
    only_keys(j, {"seeds", "max_ticks", "a", "b", "c", "governor", "agent"}, "eval");
    EvalConfig e;
    try {
        if (j.contains("seeds")) e.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("max_ticks")) e.max_ticks = j["max_ticks"].get<int>();
        if (j.contains("a")) e.a = j["a"].get<double>();
        if (j.contains("b")) e.b = j["b"].get<double>();
        if (j.contains("c")) e.c = j["c"].get<double>();
        if (j.contains("governor")) {
            const auto& g = j["governor"];
            e.governor = g.is_string() ? governor_preset(g.get<std::string>()) : governor_from_json(g);
        }
        if (j.contains("agent")) e.agent = seasoning_from_json(j["agent"]);
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("eval: ") + ex.what());
    } catch (const WorldError& ex) {
        throw std::invalid_argument(ex.what());
    }
    return e;
}

}  // namespace

ojson evolve_config_to_json(const EvolveConfig& c) {
    ojson j;
    j["pop"] = c.pop;
    j["generations"] = c.generations;
    j["elitism"] = c.elitism;
    j["tournament"] = c.tournament;
    j["crossover_rate"] = c.rates.crossover;
    j["mutation_rate"] = c.rates.mutation;
    j["bank_size"] = c.bank_size;
    j["max_genes"] = c.max_genes;
    j["init_genes"] = c.init_genes;
    j["master_seed"] = c.master_seed;
    j["eval"] = eval_to_json(c.eval);
    return j;
}

EvolveConfig evolve_config_from_json(const ojson& j) {
    only_keys(j,
              {"pop", "generations", "elitism", "tournament", "crossover_rate", "mutation_rate", "bank_size",
               "max_genes", "init_genes", "master_seed", "eval"},
              "evolve config");
    EvolveConfig c;
    try {
        if (j.contains("pop")) c.pop = j["pop"].get<int>();
        if (j.contains("generations")) c.generations = j["generations"].get<int>();
        if (j.contains("elitism")) c.elitism = j["elitism"].get<int>();
        if (j.contains("tournament")) c.tournament = j["tournament"].get<int>();
        if (j.contains("crossover_rate")) c.rates.crossover = j["crossover_rate"].get<double>();
        if (j.contains("mutation_rate")) c.rates.mutation = j["mutation_rate"].get<double>();
        if (j.contains("bank_size")) c.bank_size = j["bank_size"].get<int>();
        if (j.contains("max_genes")) c.max_genes = j["max_genes"].get<int>();
        if (j.contains("init_genes")) c.init_genes = j["init_genes"].get<int>();
        if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("evolve config: ") + ex.what());
    }
    if (j.contains("eval")) c.eval = eval_from_json(j["eval"]);
    validate(c);
    return c;
}

// ---------------------------------------------------------------- pool

unsigned threads_from_env() {
    const char* v = std::getenv("NEUROSIS_THREADS");
    if (!v || !*v) return 0;
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (*end || n < 1) throw std::invalid_argument("NEUROSIS_THREADS must be a positive integer");
    return static_cast<unsigned>(n);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)>& fn) {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned k = threads ? threads : hw;
    k = static_cast<unsigned>(std::min<size_t>(k, n));
    if (k <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < k; ++w)
        pool.emplace_back([&] {
            for (size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct Scored {
    Genome genome;
    Fitness fitness;
    bool valid = false;
    std::string hash;
    WorldSpec spec;
};

std::vector<Scored> score_all(const std::vector<Genome>& gs, const EvalConfig& cfg, unsigned threads) {
    std::vector<Scored> out(gs.size());
    parallel_for(gs.size(), threads, [&](size_t i) {
        Decoded d = decode(gs[i], cfg.agent, cfg.max_ticks);
        out[i].genome = gs[i];
        out[i].valid = d.valid;
        if (d.valid) {
            out[i].spec = d.spec;
            out[i].hash = spec_hash(d.spec);
            out[i].fitness = evaluate_spec(d.spec, cfg);
        }
    });
    return out;
}

// Best first; earlier candidates win ties.
std::vector<size_t> rank(const std::vector<Scored>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t x, size_t y) { return v[x].fitness.scalar > v[y].fitness.scalar; });
    return idx;
}

Bank build_bank(const std::vector<Scored>& archive, const EvolveConfig& cfg) {
    Bank bank;
    bank.eval = cfg.eval;
    std::set<std::string> hashes;
    std::set<std::vector<std::string>> fired_sets;
    std::vector<size_t> chosen;
    auto order = rank(archive);
    // First one entry per fired-modality set, then distinct worlds.
    for (int pass = 0; pass < 2; ++pass)
        for (size_t i : order) {
            if (static_cast<int>(chosen.size()) >= cfg.bank_size) break;
            const auto& s = archive[i];
            if (!s.valid || hashes.count(s.hash)) continue;
            if (pass == 0 && fired_sets.count(s.fitness.fired)) continue;
            hashes.insert(s.hash);
            fired_sets.insert(s.fitness.fired);
            chosen.push_back(i);
        }
    std::stable_sort(chosen.begin(), chosen.end(), [&](size_t x, size_t y) {
        return archive[x].fitness.scalar > archive[y].fitness.scalar;
    });
    for (size_t k = 0; k < chosen.size(); ++k) {
        const auto& s = archive[chosen[k]];
        BankEntry e;
        e.id = (k < 10 ? "e0" : "e") + std::to_string(k);
        e.genome = s.genome;
        e.spec = s.spec;
        e.spec.id = e.id;
        e.fitness = s.fitness;
        bank.entries.push_back(std::move(e));
    }
    return bank;
}

size_t tournament(const std::vector<Scored>& pop, int k, Stream& rng) {
    size_t best = rng.below(pop.size());
    for (int i = 1; i < k; ++i) {
        size_t c = rng.below(pop.size());
        if (pop[c].fitness.scalar > pop[best].fitness.scalar || (pop[c].fitness.scalar == pop[best].fitness.scalar && c < best))
            best = c;
    }
    return best;
}

}  // namespace

EvolveResult evolve(const EvolveConfig& cfg, unsigned threads) {
    validate(cfg);
    EvolveResult res;
    Stream rng(cfg.master_seed, StreamId::Evolve);
    std::vector<Genome> init;
    for (int i = 0; i < cfg.pop; ++i) init.push_back(random_genome(rng, cfg.init_genes));
    std::vector<Scored> pop = score_all(init, cfg.eval, threads);
    res.evaluations += pop.size();
    std::vector<Scored> archive = pop;
    auto best_of = [](const std::vector<Scored>& v) {
        double b = 0.0;
        for (const auto& s : v) b = std::max(b, s.fitness.scalar);
        return b;
    };
    res.best_per_generation.push_back(best_of(pop));

    for (int gen = 0; gen < cfg.generations; ++gen) {
        auto order = rank(pop);
        std::vector<Scored> next;
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[e]]);
        std::vector<Genome> kids;
        while (static_cast<int>(next.size() + kids.size()) < cfg.pop) {
            const Genome& a = pop[tournament(pop, cfg.tournament, rng)].genome;
            const Genome& b = pop[tournament(pop, cfg.tournament, rng)].genome;
            auto [x, y] = vary(a, b, cfg.rates, rng, cfg.max_genes);
            kids.push_back(std::move(x));
            if (static_cast<int>(next.size() + kids.size()) < cfg.pop) kids.push_back(std::move(y));
        }
        auto scored = score_all(kids, cfg.eval, threads);
        res.evaluations += scored.size();
        for (auto& s : scored) {
            archive.push_back(s);
            next.push_back(std::move(s));
        }
        pop = std::move(next);
        res.best_per_generation.push_back(best_of(pop));
    }
    res.bank = build_bank(archive, cfg);
    return res;
}

EvolveResult random_search(const EvolveConfig& cfg, unsigned threads) {
    validate(cfg);
    EvolveResult res;
    Stream rng(cfg.master_seed, StreamId::Random);
    std::vector<Scored> archive;
    double best = 0.0;
    for (int gen = 0; gen <= cfg.generations; ++gen) {
        std::vector<Genome> batch;
        for (int i = 0; i < cfg.pop; ++i) batch.push_back(random_genome(rng, cfg.init_genes));
        auto scored = score_all(batch, cfg.eval, threads);
        res.evaluations += scored.size();
        for (auto& s : scored) {
            best = std::max(best, s.fitness.scalar);
            archive.push_back(std::move(s));
        }
        res.best_per_generation.push_back(best);
    }
    res.bank = build_bank(archive, cfg);
    return res;
}

// ---------------------------------------------------------------- shrink

bool fires(const Genome& g, const std::string& modality, const EvalConfig& cfg) {
    if (modality_index(modality) < 0) throw std::invalid_argument("unknown modality: " + modality);
    Decoded d = decode(g, cfg.agent, cfg.max_ticks);
    if (!d.valid) return false;
    for (auto seed : cfg.seeds) {
        Trace t = run_episode(d.spec, cfg.governor, seed);
        if (detect(modality, t, with_paired_baseline({}, d.spec, seed)).fired) return true;
    }
    return false;
}

Genome shrink(const Genome& g, const std::string& modality, const EvalConfig& cfg) {
    if (!fires(g, modality, cfg)) throw std::invalid_argument("genome does not fire " + modality);
    Genome cur = g;
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < cur.genes.size(); ++i) {
            Genome cand = cur;
            cand.genes.erase(cand.genes.begin() + i);
            if (fires(cand, modality, cfg)) {
                cur = std::move(cand);
                changed = true;
                break;
            }
        }
    }
    return cur;
}

BankEntry entry_from_spec(const std::string& id, const WorldSpec& spec, const EvalConfig& cfg) {
    BankEntry e;
    e.id = id;
    e.spec = spec;
    e.fitness = evaluate_spec(spec, cfg);
    return e;
}

// ---------------------------------------------------------------- governor synthesis

GovernorScore score_governor(const GovernorConfig& g, const Bank& bank, double eps_regret) {
    GovernorScore s;
    s.feasible = true;
    for (const auto& e : bank.entries) {
        double oc = oracle(e.spec).cost;
        double worst = 0.0;
        for (auto seed : bank.eval.seeds) {
            Trace t = run_episode(e.spec, g, seed);
            Audit a = audit(t, e.spec);
            s.total += a.scores.neurosis_aggregate;
            double frac = oc > 0.0 ? a.scores.regret / oc : (a.scores.regret > 1e-9 ? kInf : 0.0);
            worst = std::max(worst, frac);
        }
        s.worst_regret_fraction.push_back(worst);
        if (!(worst <= eps_regret + 1e-12)) s.feasible = false;
    }
    return s;
}

namespace {

struct Knob {
    double GovernorConfig::*real = nullptr;
    int GovernorConfig::*integer = nullptr;
    double lo;
    double hi;
};

const std::vector<Knob>& knobs() {
    static const std::vector<Knob> k{
        {nullptr, &GovernorConfig::K, 1, 6},
        {nullptr, &GovernorConfig::tau, 1, 12},
        {&GovernorConfig::Delta, nullptr, 0, 2},
        {&GovernorConfig::beta, nullptr, 1.1, 4},
        {nullptr, &GovernorConfig::B_pause, 0, 4},
        {nullptr, &GovernorConfig::T_idle, 0, 6},
        {&GovernorConfig::alpha_ema, nullptr, 0.05, 1},
        {&GovernorConfig::S_switch, nullptr, 0, 1},
        {nullptr, &GovernorConfig::tabu_len, 1, 4},
        {&GovernorConfig::idle_tax_rate, nullptr, 0, 1},
        {&GovernorConfig::frontier_bonus, nullptr, 0, 2},
        {&GovernorConfig::fusion_alpha, nullptr, 0, 1},
        {&GovernorConfig::veto_risk, nullptr, 0.1, 1},
        {&GovernorConfig::reversal_cost, nullptr, 0, 3},
    };
    return k;
}

GovernorConfig mutate_governor(GovernorConfig g, double rate, Stream& rng) {
    for (bool* b : lever_slots(g.levers))
        if (rng.uniform() < rate / 2) *b = !*b;
    for (const auto& k : knobs()) {
        if (rng.uniform() >= rate) continue;
        double step = 0.15 * (k.hi - k.lo) * rng.gaussian();
        if (k.real)
            g.*k.real = std::clamp(g.*k.real + step, k.lo, k.hi);
        else
            g.*k.integer = static_cast<int>(std::clamp(std::round(g.*k.integer + step), k.lo, k.hi));
    }
    g.enabled = true;
    g.name = "synthesized";
    return g;
}

GovernorConfig cross_governor(const GovernorConfig& a, const GovernorConfig& b, Stream& rng) {
    GovernorConfig c = a;
    auto ca = lever_slots(c.levers);
    GovernorConfig bb = b;
    auto sb = lever_slots(bb.levers);
    for (int i = 0; i < kLeverCount; ++i)
        if (rng.uniform() < 0.5) *ca[i] = *sb[i];
    for (const auto& k : knobs()) {
        if (rng.uniform() >= 0.5) continue;
        if (k.real)
            c.*k.real = b.*k.real;
        else
            c.*k.integer = b.*k.integer;
    }
    c.enabled = true;
    c.name = "synthesized";
    return c;
}

bool better(const GovernorScore& x, const GovernorScore& y) {
    if (x.feasible != y.feasible) return x.feasible;
    return x.total < y.total;
}

}  // namespace

SynthResult synthesize_governor(const Bank& bank, const SynthConfig& cfg, unsigned threads) {
    if (bank.entries.empty()) throw std::invalid_argument("synthesize_governor needs a non-empty bank");
    if (cfg.pop < 2 || cfg.elitism < 1 || cfg.elitism > cfg.pop || cfg.tournament < 1 || cfg.generations < 0)
        throw std::invalid_argument("bad synthesis config");
    Stream rng(cfg.master_seed, StreamId::Evolve);

    std::vector<GovernorConfig> pop;
    for (const auto& name : preset_names())
        if (name != "off") pop.push_back(governor_preset(name));
    while (static_cast<int>(pop.size()) < cfg.pop) pop.push_back(mutate_governor(governor_preset("default"), 0.5, rng));
    if (static_cast<int>(pop.size()) > cfg.pop) {
        // Keep "default" among the seeds.
        auto it = std::find_if(pop.begin(), pop.end(), [](const GovernorConfig& g) { return g.name == "default"; });
        std::rotate(pop.begin(), it, it + 1);
        pop.resize(cfg.pop);
    }

    auto score_pop = [&](const std::vector<GovernorConfig>& v) {
        std::vector<GovernorScore> s(v.size());
        parallel_for(v.size(), threads, [&](size_t i) { s[i] = score_governor(v[i], bank, cfg.eps_regret); });
        return s;
    };
    std::vector<GovernorScore> scores = score_pop(pop);
    SynthResult best{pop[0], scores[0]};
    auto note_best = [&] {
        for (size_t i = 0; i < pop.size(); ++i)
            if (better(scores[i], best.score)) best = {pop[i], scores[i]};
    };
    note_best();

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<size_t> order(pop.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return better(scores[x], scores[y]); });
        std::vector<GovernorConfig> next;
        std::vector<GovernorScore> next_scores;
        for (int e = 0; e < cfg.elitism; ++e) {
            next.push_back(pop[order[e]]);
            next_scores.push_back(scores[order[e]]);
        }
        auto pick = [&] {
            size_t b = rng.below(pop.size());
            for (int i = 1; i < cfg.tournament; ++i) {
                size_t c = rng.below(pop.size());
                if (better(scores[c], scores[b])) b = c;
            }
            return b;
        };
        std::vector<GovernorConfig> kids;
        while (static_cast<int>(next.size() + kids.size()) < cfg.pop) {
            GovernorConfig child = cross_governor(pop[pick()], pop[pick()], rng);
            kids.push_back(mutate_governor(child, cfg.mutation, rng));
        }
        auto ks = score_pop(kids);
        for (size_t i = 0; i < kids.size(); ++i) {
            next.push_back(kids[i]);
            next_scores.push_back(ks[i]);
        }
        pop = std::move(next);
        scores = std::move(next_scores);
        note_best();
    }
    return best;
}

// ---------------------------------------------------------------- counterfactuals

const char* toggle_name(Toggle t) {
    switch (t) {
        case Toggle::Governor: return "governor";
        case Toggle::Memory: return "memory";
        case Toggle::Visibility: return "visibility";
        case Toggle::Calibration: return "calibration";
    }
    return "?";
}

std::optional<Toggle> toggle_from_name(const std::string& s) {
    for (Toggle t : {Toggle::Governor, Toggle::Memory, Toggle::Visibility, Toggle::Calibration})
        if (s == toggle_name(t)) return t;
    return std::nullopt;
}

namespace {

// What the agent did each tick; bookkeeping columns are ignored.
std::vector<std::string> moves(const Trace& t) {
    std::vector<std::string> v;
    for (const auto& r : t.records) v.push_back(std::to_string(r.pos.x) + ',' + std::to_string(r.pos.y) + ',' + r.action);
    return v;
}

ojson score_deltas(const LawScores& a, const LawScores& b) {
    ojson j;
    auto put = [&](const char* k, double x, double y) {
        double d = y - x;
        j[k] = std::isfinite(d) ? ojson(d) : ojson();
    };
    put("time_to_aid", a.time_to_aid, b.time_to_aid);
    put("energy_per_meter", a.energy_per_meter, b.energy_per_meter);
    put("freeze_ticks", a.freeze_ticks, b.freeze_ticks);
    put("detour_inflation", a.detour_inflation, b.detour_inflation);
    put("churn", a.churn, b.churn);
    put("goal_switches", a.goal_switches, b.goal_switches);
    put("energy_budget", a.energy_budget, b.energy_budget);
    put("regret", a.regret, b.regret);
    put("neurosis_aggregate", a.neurosis_aggregate, b.neurosis_aggregate);
    return j;
}

}  // namespace

Counterfactual counterfactual_trace(const BankEntry& e, const std::vector<Toggle>& toggles, const EvalConfig& cfg) {
    std::vector<Toggle> ts;
    for (Toggle t : toggles)
        if (std::find(ts.begin(), ts.end(), t) == ts.end()) ts.push_back(t);
    std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();

    Counterfactual cf;
    std::vector<Audit> audits;
    for (unsigned mask = 0; mask < (1u << ts.size()); ++mask) {
        std::vector<Toggle> on;
        for (size_t i = 0; i < ts.size(); ++i)
            if (mask & (1u << i)) on.push_back(ts[i]);
        GovernorConfig gov = cfg.governor;
        EpisodeOptions opts;
        for (Toggle t : on) {
            switch (t) {
                case Toggle::Governor:
                    gov = gov.enabled ? governor_off() : governor_preset("default");
                    break;
                case Toggle::Memory: opts.memory = false; break;
                case Toggle::Visibility: {
                    VisibilityModel v = e.spec.visibility;
                    v.mode = v.mode == VisibilityModel::Mode::GV ? VisibilityModel::Mode::LV : VisibilityModel::Mode::GV;
                    opts.visibility = v;
                    break;
                }
                case Toggle::Calibration: break;
            }
        }
        if (std::find(on.begin(), on.end(), Toggle::Calibration) != on.end()) {
            if (!gov.enabled) {
                gov = governor_off();
                gov.enabled = true;
                gov.name = "calibration";
            }
            gov.levers.calibration = true;
        }
        Trace t = run_episode(e.spec, gov, seed, opts);
        audits.push_back(audit(t, e.spec));
        cf.assignments.push_back(on);
        cf.traces.push_back(std::move(t));
    }

    ojson runs = ojson::array();
    auto base_rows = moves(cf.traces[0]);
    auto base_fired = fired_modalities(audits[0].reports);
    for (size_t k = 1; k < cf.traces.size(); ++k) {
        ojson r;
        ojson names = ojson::array();
        for (Toggle t : cf.assignments[k]) names.push_back(toggle_name(t));
        r["toggles"] = names;
        auto rows = moves(cf.traces[k]);
        std::optional<int> div;
        for (size_t i = 0; i < std::max(rows.size(), base_rows.size()); ++i)
            if (i >= rows.size() || i >= base_rows.size() || rows[i] != base_rows[i]) {
                div = static_cast<int>(i);
                break;
            }
        r["first_divergence"] = div ? ojson(*div) : ojson();
        r["score_deltas"] = score_deltas(audits[0].scores, audits[k].scores);
        auto fired = fired_modalities(audits[k].reports);
        ojson added = ojson::array(), removed = ojson::array();
        for (const auto& m : fired)
            if (std::find(base_fired.begin(), base_fired.end(), m) == base_fired.end()) added.push_back(m);
        for (const auto& m : base_fired)
            if (std::find(fired.begin(), fired.end(), m) == fired.end()) removed.push_back(m);
        r["fired_added"] = added;
        r["fired_removed"] = removed;
        runs.push_back(r);
    }
    cf.diff["entry"] = e.id;
    cf.diff["seed"] = seed;
    cf.diff["runs"] = runs;
    return cf;
}

// ---------------------------------------------------------------- serialization

ojson genome_to_json(const Genome& g) {
    ojson genes = ojson::array();
    for (const auto& gene : g.genes) {
        ojson j;
        j["type"] = gene_type_name(gene.type);
        const auto& ps = gene_params(gene.type);
        for (size_t i = 0; i < ps.size(); ++i) {
            if (ps[i].integer)
                j[ps[i].name] = static_cast<int>(gene.p[i]);
            else
                j[ps[i].name] = gene.p[i];
        }
        genes.push_back(j);
    }
    ojson j;
    j["genes"] = genes;
    return j;
}

Genome genome_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("genes") || !j["genes"].is_array())
        throw std::invalid_argument("genome: expected {\"genes\": [...]}");
    Genome g;
    for (const auto& gj : j["genes"]) {
        if (!gj.is_object() || !gj.contains("type") || !gj["type"].is_string())
            throw std::invalid_argument("gene: missing type");
        auto t = gene_type_from_name(gj["type"].get<std::string>());
        if (!t) throw std::invalid_argument("gene: unknown type " + gj["type"].get<std::string>());
        Gene gene;
        gene.type = *t;
        const auto& ps = gene_params(*t);
        for (const auto& ps_i : ps) {
            if (!gj.contains(ps_i.name) || !gj[ps_i.name].is_number())
                throw std::invalid_argument(std::string("gene: missing numeric ") + ps_i.name);
            gene.p.push_back(gj[ps_i.name].get<double>());
        }
        if (gj.size() != ps.size() + 1) throw std::invalid_argument("gene: unexpected keys");
        g.genes.push_back(gene);
    }
    return g;
}

ojson fitness_to_json(const Fitness& f) {
    ojson j;
    j["law_pressure"] = f.law_pressure;
    j["neurosis"] = f.neurosis;
    j["explanatory_gap"] = f.explanatory_gap;
    j["rationale_dominance"] = f.rationale_dominance;
    j["scalar"] = f.scalar;
    j["fired"] = f.fired;
    return j;
}

std::string spec_hash(const WorldSpec& spec) {
    WorldSpec s = spec;
    s.id.clear();
    std::string text = spec_to_json(s).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_entry(const Bank& bank, const BankEntry& e, const std::string& dir) {
    fs::path d = fs::path(dir) / e.id;
    fs::create_directories(d / "traces");
    ojson g = e.genome ? genome_to_json(*e.genome) : ojson{{"genes", nullptr}};
    write_file((d / "genome.json").string(), g.dump(2) + "\n");
    save_scenario(e.spec, (d / "scenario.json").string());
    ojson f = fitness_to_json(e.fitness);
    f["shrunk"] = e.shrunk;
    f["counterfactual_ids"] = e.counterfactual_ids;
    f["spec_hash"] = spec_hash(e.spec);
    write_file((d / "fitness.json").string(), f.dump(2) + "\n");
    for (auto seed : bank.eval.seeds) {
        Trace t = run_episode(e.spec, bank.eval.governor, seed);
        std::string stem = "seed_" + std::to_string(seed);
        write_file((d / "traces" / (stem + ".csv")).string(), trace_to_csv(t));
        write_file((d / "traces" / (stem + ".aux.csv")).string(), trace_aux_csv(t));
    }
    if (!fs::exists(d / "diff.json")) write_file((d / "diff.json").string(), "{}\n");
}

void save_bank(const Bank& bank, const std::string& dir) {
    fs::create_directories(dir);
    ojson j;
    j["eval"] = eval_to_json(bank.eval);
    ojson ids = ojson::array();
    for (const auto& e : bank.entries) ids.push_back(e.id);
    j["entries"] = ids;
    write_file((fs::path(dir) / "bank.json").string(), j.dump(2) + "\n");
    for (const auto& e : bank.entries) save_entry(bank, e, dir);
}

Bank load_bank(const std::string& dir) {
    Bank bank;
    ojson j;
    try {
        j = ojson::parse(read_file((fs::path(dir) / "bank.json").string()));
    } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(std::string("bank.json: ") + ex.what());
    }
    only_keys(j, {"eval", "entries"}, "bank.json");
    if (j.contains("eval")) bank.eval = eval_from_json(j["eval"]);
    if (!j.contains("entries") || !j["entries"].is_array()) throw std::invalid_argument("bank.json: missing entries");
    for (const auto& idj : j["entries"]) {
        BankEntry e;
        e.id = idj.get<std::string>();
        fs::path d = fs::path(dir) / e.id;
        try {
            ojson g = ojson::parse(read_file((d / "genome.json").string()));
            if (!g["genes"].is_null()) e.genome = genome_from_json(g);
            e.spec = load_scenario((d / "scenario.json").string());
            ojson f = ojson::parse(read_file((d / "fitness.json").string()));
            e.fitness.law_pressure = f.at("law_pressure").get<double>();
            e.fitness.neurosis = f.at("neurosis").get<double>();
            e.fitness.explanatory_gap = f.at("explanatory_gap").get<double>();
            e.fitness.rationale_dominance = f.at("rationale_dominance").get<double>();
            e.fitness.scalar = f.at("scalar").get<double>();
            e.fitness.fired = f.at("fired").get<std::vector<std::string>>();
            e.shrunk = f.value("shrunk", false);
            e.counterfactual_ids = f.value("counterfactual_ids", std::vector<std::string>{});
        } catch (const nlohmann::json::exception& ex) {
            throw std::invalid_argument(e.id + ": " + ex.what());
        } catch (const WorldError& ex) {
            throw std::invalid_argument(e.id + ": " + ex.what());
        }
        bank.entries.push_back(std::move(e));
    }
    return bank;
}

}  // namespace neurosis
