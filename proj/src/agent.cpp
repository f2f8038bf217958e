#include "neurosis/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace neurosis {

HomeostatStep homeostat_tick(Homeostat& hs) {
    hs.h += hs.dh_per_tick;
    return {hs.h, homeostat_trigger(hs)};
}

bool homeostat_trigger(const Homeostat& hs) { return std::abs(hs.h - hs.H_star) > hs.theta_h; }

void deposit_and_decay(AversiveMemory& m, std::optional<MemoryEvent> event, const Grid* grid) {
    if (event) {
        int r = m.gen_radius;
        for (int dx = -r; dx <= r; ++dx)
            for (int dy = -r; dy <= r; ++dy) {
                Pos q{event->p.x + dx, event->p.y + dy};
                if (grid && !grid->in_bounds(q)) continue;
                int k = std::max(std::abs(dx), std::abs(dy));
                m.M[q] += m.gamma_amp * event->severity * std::pow(m.gen_falloff, k);
            }
    }
    for (auto it = m.M.begin(); it != m.M.end();) {
        it->second *= 1.0 - m.rho_decay;
        if (it->second < 1e-6)
            it = m.M.erase(it);
        else
            ++it;
    }
}

StepOutcome step_execute(const Grid& grid, Pos pos, Dir move, double base_energy, Stream& rng) {
    Pos target = step(pos, move);
    if (!grid.passable(target)) throw std::logic_error("move into an impassable cell");
    const Cell& c = grid.at(target);
    StepOutcome out;
    out.pos = target;
    if (c.kind == Kind::Ice) {
        out.energy = base_energy * c.energy_factor;
        if (rng.uniform() < c.slip_prob) {
            out.slipped = true;
            out.pos = pos;
        }
    } else {
        out.energy = base_energy;
    }
    out.risk = out.slipped ? 0.0 : c.risk;
    return out;
}

const char* terminal_name(Terminal t) {
    switch (t) {
        case Terminal::GoalReached: return "goal_reached";
        case Terminal::Starved: return "starved";
        case Terminal::MaxTicks: return "max_ticks";
        case Terminal::NoPath: return "no_path";
    }
    return "max_ticks";
}

std::optional<Terminal> terminal_from_name(const std::string& s) {
    for (Terminal t : {Terminal::GoalReached, Terminal::Starved, Terminal::MaxTicks, Terminal::NoPath})
        if (s == terminal_name(t)) return t;
    return std::nullopt;
}

namespace {

// Forward Dijkstra: cost of reaching every cell from `from`.
std::vector<double> cost_from(const CostField& f, Pos from) {
    std::vector<double> g(f.width * f.height, kInf);
    if (!f.passable(from)) return g;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    g[f.index(from)] = 0.0;
    pq.push({0.0, f.index(from)});
    while (!pq.empty()) {
        auto [d, i] = pq.top();
        pq.pop();
        if (d > g[i]) continue;
        Pos u{i % f.width, i / f.width};
        for (Dir dir : kAllDirs) {
            Pos v = step(u, dir);
            if (!f.passable(v)) continue;
            int vi = f.index(v);
            double nd = d + f.cost[vi];
            if (nd < g[vi]) {
                g[vi] = nd;
                pq.push({nd, vi});
            }
        }
    }
    return g;
}

// Step distances on the believed map; unknown cells count as passable.
std::vector<int> bfs_steps(const Grid& g, const std::vector<std::uint8_t>& known, Pos from) {
    std::vector<int> d(g.size(), -1);
    auto open = [&](Pos p) {
        if (!g.in_bounds(p)) return false;
        return !known[g.index(p)] || g.passable(p);
    };
    if (!open(from)) return d;
    std::deque<Pos> q{from};
    d[g.index(from)] = 0;
    while (!q.empty()) {
        Pos u = q.front();
        q.pop_front();
        for (Dir dir : kAllDirs) {
            Pos v = step(u, dir);
            if (!open(v) || d[g.index(v)] >= 0) continue;
            d[g.index(v)] = d[g.index(u)] + 1;
            q.push_back(v);
        }
    }
    return d;
}

std::string steps_str(const std::vector<Dir>& s) {
    std::string out;
    for (Dir d : s) out += dir_char(d);
    return out;
}

std::optional<double> alt_cost(const std::vector<Alternative>& alts, std::optional<Dir> d) {
    if (!d) return std::nullopt;
    for (const auto& a : alts)
        if (a.first == *d) return a.cost;
    return std::nullopt;
}

bool touches(const std::vector<Pos>& cells, const std::vector<Pos>& set) {
    for (Pos c : cells)
        if (std::find(set.begin(), set.end(), c) != set.end()) return true;
    return false;
}

std::vector<Pos> cells_of(Pos from, const std::vector<Dir>& steps) {
    std::vector<Pos> out;
    for (Dir d : steps) out.push_back(from = step(from, d));
    return out;
}

}  // namespace

Trace run_episode(const WorldSpec& spec, const GovernorConfig& gov, std::uint64_t seed, const EpisodeOptions& opts) {
    Grid grid(spec);
    validate(gov);
    const Seasoning& se = spec.seasoning;
    const Levers& L = gov.levers;
    const bool governed = gov.enabled;
    const int W = grid.width(), H = grid.height(), N = grid.size();

    Trace tr;
    tr.scenario_id = spec.id;
    tr.seed = seed;
    tr.width = W;
    tr.height = H;

    VisibilityModel vis = opts.visibility.value_or(spec.visibility);
    int max_ticks = opts.max_ticks.value_or(spec.max_ticks);
    CostWeights nominal = opts.weights.value_or(se.weights);
    if (!opts.memory) nominal.w_mem = 0.0;

    FoodState food = initial_food(grid);
    Stream slip_rng(seed, StreamId::Slip), jitter_rng(seed, StreamId::Jitter), respawn_rng(seed, StreamId::Respawn);

    std::vector<std::uint8_t> known(N, 0), pinned(N, 0), ever(N, 0);
    std::vector<int> last_seen(N, -1);
    for (const auto& r : se.premapped)
        for (int x = r[0]; x <= r[2]; ++x)
            for (int y = r[1]; y <= r[3]; ++y)
                if (grid.in_bounds({x, y})) {
                    int i = grid.index({x, y});
                    known[i] = pinned[i] = ever[i] = 1;
                }

    AversiveMemory mem;
    mem.gamma_amp = se.memory.gamma;
    mem.rho_decay = se.memory.rho;
    mem.gen_radius = se.memory.gen_radius;
    mem.gen_falloff = se.memory.falloff;
    if (opts.memory)
        for (const auto& s : se.memory_seeds) mem.M[s.p] += s.m;

    Homeostat hs{se.homeostat.h0, se.homeostat.H_star, se.homeostat.theta_h, se.homeostat.dh};

    Pos pos = spec.start;
    std::optional<Dir> heading = se.initial_heading;
    std::optional<Dir> last_choice, last_move;
    int stationary = 0;
    bool at_rest = true;
    int replans = 0;
    int last_replan_tick = -1000000;

    Commitment com;
    com.smoothed_w = nominal.w_risk;
    double w_raw = nominal.w_risk;

    std::vector<Dir> incumbent;
    std::optional<Pos> incumbent_target;
    std::map<Pos, int> suppressed_until;
    std::optional<Pos> subgoal_prev;
    std::deque<Pos> recent{pos};

    for (int t = 0; t < max_ticks; ++t) {
        TickRecord rec;
        rec.tick = t;

        // Observe.
        int revealed = 0;
        for (Pos p : visible_set(grid, pos, vis)) {
            int i = grid.index(p);
            if (!known[i]) ++revealed;
            known[i] = ever[i] = 1;
            last_seen[i] = t;
        }
        if (se.belief_ttl >= 0)
            for (int i = 0; i < N; ++i)
                if (known[i] && !pinned[i] && t - last_seen[i] > se.belief_ttl) known[i] = 0;
        bool commit_invalidated = false;
        if (com.active() && revealed > 0)
            for (Pos c : cells_of(pos, com.steps))
                if (!grid.passable(c) || grid.at(c).risk > gov.safety_risk) commit_invalidated = true;

        // Homeostat.
        bool trigger = homeostat_tick(hs).trigger;

        // Threat schedule and weight smoothing.
        CostWeights w = nominal;
        if (se.threat.enabled()) {
            const auto& th = se.threat;
            w_raw = th.w_min + (w_raw - th.w_min) * th.decay;
            bool near = false;
            for (Pos c : th.cues)
                if (chebyshev(c, pos) <= th.radius) near = true;
            if ((t + 1) % th.period == 0 && near) w_raw = std::min(th.w_max, w_raw + th.spike);
            w.w_risk = w_raw;
        }
        if (governed && (L.smoothing || L.hysteresis)) {
            double a = L.smoothing ? gov.alpha_ema : 1.0;
            SmoothResult sm = smooth_and_hysteresis(w.w_risk, com.smoothed_w, com.hyst_class, gov.theta_minus,
                                                    gov.theta_plus, a, true);
            com.smoothed_w = sm.smoothed;
            if (L.hysteresis) com.hyst_class = sm.policy_class;
            w.w_risk = sm.smoothed;
        }

        // Belief layers and the cost field.
        std::vector<double> mem_layer(N, 0.0);
        for (const auto& [p, m] : mem.M)
            if (grid.in_bounds(p)) mem_layer[grid.index(p)] = m;
        std::vector<double> jit;
        if (se.jitter > 0.0) {
            jit.assign(N, 1.0);
            auto draw = [&](int i) {
                double u = jitter_rng.uniform_at(static_cast<std::uint64_t>(t) * N + i);
                jit[i] = 1.0 + se.jitter * (2.0 * u - 1.0);
            };
            if (se.jitter_cells.empty())
                for (int i = 0; i < N; ++i) draw(i);
            else
                for (Pos p : se.jitter_cells)
                    if (grid.in_bounds(p)) draw(grid.index(p));
        }
        PlanView view;
        view.grid = &grid;
        view.known = &known;
        view.memory = &mem_layer;
        view.jitter = jit.empty() ? nullptr : &jit;
        view.alpha_hat = com.alpha_hat;
        view.base_energy = se.base_energy;
        view.uncertainty_penalty = se.uncertainty_penalty;
        view.frontier_bonus = governed && L.frontier_bonus ? gov.frontier_bonus : 0.0;
        CostField field = build_cost_field(view, w);

        // Objective: the goal, or the cheapest known food.
        std::optional<Pos> objective = spec.goal;
        if (!objective) {
            std::vector<Pos> foods;
            for (const auto& [p, c] : food.food)
                if (known[grid.index(p)]) foods.push_back(p);
            objective = select_target(field, pos, foods, Canon::standard());
        }

        auto finish_no_path = [&]() {
            rec.pos = pos;
            rec.h = hs.h;
            rec.revealed_count = revealed;
            rec.w_risk = w.w_risk;
            rec.w_energy = w.w_energy;
            rec.w_mem = w.w_mem;
            rec.governor_decision = governed ? "pause" : "off";
            rec.d_goal = W * H;
            int seen = 0;
            for (auto e : ever) seen += e;
            rec.seen_total = seen;
            tr.records.push_back(rec);
            tr.terminal = Terminal::NoPath;
        };
        if (!objective) {
            finish_no_path();
            return tr;
        }

        // Mirage subgoals compete with the objective.
        Pos target = *objective;
        std::optional<Pos> subgoal;
        if (se.mirage_pull > 0.0) {
            if (governed && L.detour_budget && t - com.detour_window_start >= gov.detour_window) {
                com.detour_window_start = t;
                com.detour_used = 0;
            }
            std::vector<double> cf = cost_from(field, pos);
            std::vector<int> from_pos, from_goal;
            if (governed && L.detour_budget) {
                from_pos = bfs_steps(grid, known, pos);
                from_goal = bfs_steps(grid, known, *objective);
            }
            double best = cf[grid.index(*objective)];
            for (int i = 0; i < N; ++i) {
                Pos m = grid.pos_of(i);
                if (m == pos || !known[i] || grid.at(m).kind != Kind::Mirage) continue;
                auto su = suppressed_until.find(m);
                if (su != suppressed_until.end() && t < su->second) continue;
                if (governed && L.detour_budget) {
                    int dp = from_pos[i], dg = from_goal[i], d0 = from_pos[grid.index(*objective)];
                    if (dp < 0 || dg < 0 || d0 < 0) continue;
                    int detour = dp + dg - d0;
                    int charge = subgoal_prev == m ? 0 : detour;
                    if (charge > gov.B_detour - com.detour_used) continue;
                }
                double v = cf[i] - se.mirage_pull;
                if (v < best && !same_cost(v, best)) {
                    best = v;
                    subgoal = m;
                }
            }
            if (subgoal) {
                target = *subgoal;
                if (governed && L.detour_budget && subgoal_prev != subgoal) {
                    int detour = bfs_steps(grid, known, pos)[grid.index(*subgoal)] +
                                 bfs_steps(grid, known, *objective)[grid.index(*subgoal)] -
                                 bfs_steps(grid, known, pos)[grid.index(*objective)];
                    com.detour_used += std::max(0, detour);
                }
            }
            subgoal_prev = subgoal;
        }

        // Plan.
        bool have_incumbent = !incumbent.empty() && incumbent_target == target;
        double incumbent_cost = have_incumbent ? path_cost(field, pos, incumbent) : kInf;
        if (!std::isfinite(incumbent_cost)) have_incumbent = false;
        bool need_plan = trigger || se.replan_every_tick || !have_incumbent;
        if (governed && L.throttle && need_plan && have_incumbent && stationary > 0 && revealed == 0 &&
            t - last_replan_tick < gov.tau)
            need_plan = false;

        Canon canon = se.canon;
        std::vector<Alternative> alts;
        std::vector<Dir> new_steps;
        double c1 = kInf, c2 = kInf;
        bool tie = false;
        std::optional<Dir> global_first;
        std::string policy_class = "none";

        if (pos == target) {
            // Standing on a food target; nothing to plan.
            need_plan = false;
        } else if (need_plan) {
            if (se.rotate_canon && !(governed && L.canonical_tiebreak) && replans % 2 == 1)
                std::reverse(canon.order.begin(), canon.order.end());
            if (governed && L.canonical_tiebreak) canon = Canon::standard();
            ++replans;
            last_replan_tick = t;
            Plan plan = plan_astar(field, pos, target, canon);
            if (!plan.found) {
                finish_no_path();
                return tr;
            }
            alts = plan.alternatives;
            for (auto& a : alts) {
                if (last_choice && a.first == *last_choice) a.cost += se.recency_penalty;
                if (governed && L.reversal_cost && last_move && a.first == opposite(*last_move))
                    a.cost += gov.reversal_cost;
                if (governed && L.visit_penalty) {
                    Pos q = step(pos, a.first);
                    if (std::find(recent.begin(), recent.end(), q) != recent.end()) a.cost += gov.visit_penalty;
                }
            }
            rank_alternatives(alts, canon);
            c1 = alts[0].cost;
            c2 = alts.size() > 1 ? alts[1].cost : kInf;
            tie = std::isfinite(c2) && near_tie(c1, c2, se.tie_eta);
            new_steps = alts[0].first == plan.steps[0] ? plan.steps
                                                       : plan_via(field, pos, target, alts[0].first, canon).steps;

            if (se.policy_classes) {
                auto risky_of = [&](const std::vector<Dir>& s) {
                    for (Pos c : cells_of(pos, s))
                        if (known[grid.index(c)] && grid.at(c).risk > 0.0) return true;
                    return false;
                };
                policy_class = risky_of(new_steps) ? "risky_short" : "safe_long";
                if (governed && L.hysteresis && policy_class != com.hyst_class) {
                    Plan alt;
                    if (com.hyst_class == "safe_long") {
                        PlanView safe = view;
                        safe.avoid_risk = true;
                        alt = plan_astar(safe, pos, target, w, canon);
                    } else {
                        CostWeights bold = w;
                        bold.w_risk = 0.0;
                        alt = plan_astar(view, pos, target, bold, canon);
                    }
                    if (alt.found) {
                        new_steps = alt.steps;
                        policy_class = risky_of(new_steps) ? "risky_short" : "safe_long";
                    }
                }
            }
            global_first = new_steps.front();
        } else if (have_incumbent) {
            new_steps = incumbent;
            c1 = incumbent_cost;
            global_first = incumbent.front();
        }
        if (policy_class == "none" && (!se.corridor_a.empty() || !se.corridor_b.empty()) && !new_steps.empty()) {
            auto cells = cells_of(pos, new_steps);
            if (touches(cells, se.corridor_a))
                policy_class = "corridor_A";
            else if (touches(cells, se.corridor_b))
                policy_class = "corridor_B";
        }

        // Local module.
        CostField local_field = field;
        if (se.local_risk_scale != 1.0) {
            PlanView lv = view;
            lv.risk_scale = se.local_risk_scale;
            local_field = build_cost_field(lv, w);
        }
        LocalChoice local = local_policy(local_field, pos, canon, target, se.local_goal_term ? w.w_dist : 0.0);
        if (governed && L.fusion) {
            std::erase_if(local.ranked, [&](const Alternative& a) {
                Pos q = step(pos, a.first);
                return known[grid.index(q)] && grid.at(q).risk > gov.veto_risk;
            });
            // The local module scores with the fused belief: its own step
            // cost blended with the global cost-to-go through that step.
            for (auto& a : local.ranked) {
                auto g = std::find_if(alts.begin(), alts.end(), [&](const Alternative& x) { return x.first == a.first; });
                a.cost = g == alts.end() ? kInf : fuse(g->cost, a.cost, gov.fusion_alpha);
            }
            std::stable_sort(local.ranked.begin(), local.ranked.end(),
                             [](const Alternative& x, const Alternative& y) { return x.cost < y.cost; });
        }
        std::optional<Dir> local_first = local.ranked.empty() ? std::nullopt : std::optional(local.ranked[0].first);

        // Base proposal.
        Proposal p;
        p.tick = t;
        p.controller = se.controller;
        p.alts = alts;
        p.local_alts = local.ranked;
        for (const auto& a : alts) p.alt_risk.push_back(grid.at(step(pos, a.first)).risk);
        p.c1 = c1;
        p.c2 = c2;
        p.near_tie = tie;
        p.global_first = global_first;
        p.local_first = local_first;
        p.has_incumbent = have_incumbent;
        p.incumbent_first = have_incumbent ? std::optional(incumbent.front()) : std::nullopt;
        p.incumbent_cost = incumbent_cost;
        p.plan_differs = have_incumbent && need_plan && new_steps != incumbent;
        p.last_choice = last_choice;
        p.heading = heading;
        p.last_move = last_move;
        p.stationary_ticks = stationary;
        p.eta = se.tie_eta;
        if (com.active()) {
            std::vector<Dir> rest(com.steps.begin(), com.steps.begin() + std::min<size_t>(com.steps_remaining,
                                                                                          com.steps.size()));
            p.commit_cost = path_cost(field, pos, com.steps);
            for (Pos c : cells_of(pos, rest)) p.commit_prefix_risk = std::max(p.commit_prefix_risk, grid.at(c).risk);
        }
        p.commit_invalidated = commit_invalidated;
        p.safe_neighbour = false;
        for (Dir d : kAllDirs) {
            Pos q = step(pos, d);
            if (grid.passable(q) && grid.at(q).risk <= gov.safety_risk) p.safe_neighbour = true;
        }

        if (pos == target || !global_first) {
            p.base = BaseAction::Idle;
        } else if (se.controller == "local") {
            p.base = BaseAction::Move;
            p.base_dir = local_first;
        } else if (se.controller == "alternate" && t % 2 == 1) {
            p.base = BaseAction::Move;
            p.base_dir = local_first;
        } else if (se.accept_nonworse && have_incumbent && need_plan && new_steps != incumbent &&
                   c1 <= incumbent_cost + 1e-12) {
            p.base = BaseAction::Adopt;
            p.base_dir = global_first;
        } else if (se.accept_nonworse && have_incumbent && need_plan && new_steps != incumbent) {
            p.base = BaseAction::Move;
            p.base_dir = incumbent.front();
        } else if (se.pause_eta > 0.0 && std::isfinite(c2) && near_tie(c1, c2, se.pause_eta)) {
            p.base = BaseAction::Pause;
        } else if (se.deliberation_cost > 0.0 && at_rest && tie) {
            p.c_idle = c1 + se.idle_cost;
            p.c_move = c1 + se.deliberation_cost;
            if (p.c_idle <= p.c_move)
                p.base = BaseAction::Idle;
            else {
                p.base = BaseAction::Move;
                p.base_dir = global_first;
            }
        } else if (se.stay_cost) {
            p.c_idle = *se.stay_cost;
            p.c_move = c1;
            if (p.c_idle <= p.c_move)
                p.base = BaseAction::Idle;
            else {
                p.base = BaseAction::Move;
                p.base_dir = global_first;
            }
        } else {
            p.base = BaseAction::Move;
            p.base_dir = global_first;
        }
        if (p.base == BaseAction::Move && !p.base_dir) p.base = BaseAction::Idle;

        Decision d = governed ? govern(p, com, gov) : Decision{p.base, p.base_dir};
        if (d.action == BaseAction::Move && !d.dir) d.action = BaseAction::Idle;

        // Plan in force for this tick.
        std::vector<Dir> in_force;
        if (d.action == BaseAction::Move) {
            if (d.use_commitment)
                in_force = com.steps;
            else if (d.use_incumbent)
                in_force = incumbent;
            else if (!new_steps.empty() && *d.dir == new_steps.front())
                in_force = new_steps;
            else if (have_incumbent && *d.dir == incumbent.front())
                in_force = incumbent;
            else {
                Plan via = plan_via(field, pos, target, *d.dir, canon);
                in_force = via.found ? via.steps : std::vector<Dir>{*d.dir};
            }
            if (d.start_commit && !d.use_commitment) {
                com.steps = in_force;
                com.steps_remaining = std::min<int>(gov.K, static_cast<int>(in_force.size()));
                com.ticks_remaining = gov.tau;
                com.cost = path_cost(field, pos, in_force);
            }
        } else if (d.action == BaseAction::Adopt) {
            in_force = new_steps;
        } else {
            in_force = have_incumbent ? incumbent : new_steps;
        }
        if (need_plan && !new_steps.empty()) last_choice = d.action == BaseAction::Move ? d.dir : global_first;

        rec.was_replan = need_plan;
        rec.plan_steps = steps_str(in_force);
        rec.plan_len = static_cast<int>(in_force.size());
        rec.plan_cost = have_incumbent ? incumbent_cost : c1;
        rec.c1 = c1;
        rec.c2 = c2;
        rec.near_tie = tie;
        rec.local_first = local_first;
        rec.global_first = global_first;
        rec.policy_class = policy_class;
        rec.w_risk = w.w_risk;
        rec.w_energy = w.w_energy;
        rec.w_mem = w.w_mem;
        rec.revealed_count = revealed;
        rec.c_idle = p.c_idle;
        rec.governor_decision = governed ? decision_name(d.label) : "off";
        rec.override_reason = override_name(d.override_reason);
        {
            auto cl = alt_cost(alts, local_first);
            if (local_first && global_first && *local_first != *global_first && cl && c1 > 0.0)
                rec.rationale_gap = (*cl - c1) / c1;
            else if (std::isfinite(c2) && c1 > 0.0)
                rec.rationale_gap = (c2 - c1) / c1;
        }

        // Execute.
        bool moved = false, ate = false;
        std::optional<MemoryEvent> event;
        switch (d.action) {
            case BaseAction::Move: {
                Dir dir = *d.dir;
                if (se.turn_in_place && heading != dir) {
                    heading = dir;
                    rec.action = std::string("turn_") + dir_char(dir);
                    incumbent = in_force;
                    break;
                }
                rec.action = std::string(1, dir_char(dir));
                Pos dest = step(pos, dir);
                rec.pred_energy = predicted_energy(view, dest);
                StepOutcome out = step_execute(grid, pos, dir, se.base_energy, slip_rng);
                heading = dir;
                rec.energy_step = out.energy;
                rec.risk_step = out.risk;
                int k = static_cast<int>(grid.at(dest).kind);
                double ratio = out.energy / rec.pred_energy;
                if (std::abs(ratio - 1.0) >= gov.eps_cal) {
                    ++com.cal_run[k];
                    com.cal_realized[k] += out.energy;
                    com.cal_predicted[k] += rec.pred_energy;
                    if (governed && L.calibration && com.cal_run[k] >= gov.L_cal) {
                        com.alpha_hat[k] = calibrate(com.alpha_hat[k], com.cal_realized[k] / com.cal_predicted[k],
                                                     com.cal_run[k], gov.L_cal);
                        com.cal_run[k] = 0;
                        com.cal_realized[k] = com.cal_predicted[k] = 0.0;
                    }
                } else {
                    com.cal_run[k] = 0;
                    com.cal_realized[k] = com.cal_predicted[k] = 0.0;
                }
                if (out.slipped) {
                    incumbent = in_force;
                    break;
                }
                rec.frontier_entry = !known[grid.index(dest)];
                for (Dir e : kAllDirs) {
                    Pos q = step(dest, e);
                    if (grid.in_bounds(q) && !known[grid.index(q)]) rec.frontier_entry = true;
                }
                pos = dest;
                moved = true;
                last_move = dir;
                com.tabu_dir = opposite(dir);
                com.tabu_expiry = t + gov.tabu_len;
                incumbent.assign(in_force.begin() + 1, in_force.end());
                if (d.use_commitment || d.start_commit) {
                    if (!com.steps.empty()) com.steps.erase(com.steps.begin());
                    --com.steps_remaining;
                }
                recent.push_back(pos);
                if (recent.size() > 4) recent.pop_front();

                auto fit = food.food.find(pos);
                if (fit != food.food.end()) {
                    Cell meal = fit->second;
                    if (meal.poisonous) {
                        event = MemoryEvent{pos, se.memory.poison_severity};
                        rec.energy_step += se.poison_energy;
                    } else {
                        hs.h -= meal.meal;
                        ate = true;
                    }
                    if (spec.food_respawn)
                        respawn_food(grid, food, pos, respawn_rng);
                    else
                        food.food.erase(fit);
                }
                if (subgoal && pos == *subgoal) suppressed_until[pos] = t + se.mirage_refractory;
                break;
            }
            case BaseAction::Adopt:
                rec.action = "adopt";
                incumbent = in_force;
                break;
            case BaseAction::Pause:
                rec.action = "pause";
                incumbent = in_force;
                break;
            case BaseAction::Idle:
                rec.action = "idle";
                incumbent = in_force;
                break;
            case BaseAction::None:
                rec.action = "none";
                break;
        }
        incumbent_target = target;
        if (moved) {
            stationary = 0;
            at_rest = false;
        } else {
            ++stationary;
            at_rest = true;
        }
        if (com.ticks_remaining > 0) --com.ticks_remaining;
        if (!com.active()) com.clear();
        rec.commit_remaining = com.active() ? com.steps_remaining : 0;

        if (opts.memory) deposit_and_decay(mem, event, &grid);

        rec.pos = pos;
        rec.h = hs.h;
        {
            std::optional<Pos> obj = spec.goal;
            if (!obj) {
                std::vector<Pos> foods;
                for (const auto& [fp, c] : food.food)
                    if (known[grid.index(fp)]) foods.push_back(fp);
                if (objective && food.food.count(*objective))
                    obj = objective;
                else if (!foods.empty())
                    obj = select_target(field, pos, foods, Canon::standard());
            }
            int dg = W * H;
            if (obj) {
                int v = bfs_steps(grid, known, pos)[grid.index(*obj)];
                if (v >= 0) dg = v;
            }
            if (ate) dg = 0;
            rec.d_goal = dg;
        }
        int seen = 0;
        for (auto e : ever) seen += e;
        rec.seen_total = seen;
        tr.records.push_back(rec);

        if ((spec.goal && pos == *spec.goal) || (ate && se.stop_on_meal)) {
            tr.terminal = Terminal::GoalReached;
            return tr;
        }
        if (hs.h >= se.homeostat.starve_at) {
            tr.terminal = Terminal::Starved;
            return tr;
        }
    }
    tr.terminal = Terminal::MaxTicks;
    return tr;
}

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string trace_to_csv(const Trace& t) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& r : t.records) {
        std::ostringstream s;
        s << r.tick << ',' << r.pos.x << ',' << r.pos.y << ',' << format_real(r.h) << ',' << r.action << ','
          << (r.was_replan ? 1 : 0) << ',' << r.plan_len << ',' << format_real(r.plan_cost) << ','
          << format_real(r.c1) << ',' << format_real(r.c2) << ',' << (r.near_tie ? 1 : 0) << ','
          << dir_str(r.local_first) << ',' << dir_str(r.global_first) << ',' << r.policy_class << ','
          << format_real(r.w_risk) << ',' << format_real(r.w_energy) << ',' << format_real(r.w_mem) << ','
          << r.revealed_count << ',' << r.d_goal << ',' << format_real(r.energy_step) << ','
          << format_real(r.risk_step) << ',' << r.governor_decision << ',' << r.override_reason << ','
          << r.commit_remaining << '\n';
        out += s.str();
    }
    return out;
}

std::string trace_aux_csv(const Trace& t) {
    std::string out = kAuxHeader;
    out += '\n';
    for (const auto& r : t.records) {
        out += std::to_string(r.tick) + ',' + (r.plan_steps.empty() ? "-" : r.plan_steps) + ',' +
               format_real(r.pred_energy) + ',' + format_real(r.c_idle) + ',' + (r.frontier_entry ? "1" : "0") + ',' +
               std::to_string(r.seen_total) + ',' + format_real(r.rationale_gap) + '\n';
    }
    return out;
}

namespace {

std::vector<std::vector<std::string>> split_csv(const std::string& text, const char* header) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw std::runtime_error("trace header mismatch");
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.push_back("");
        rows.push_back(std::move(f));
    }
    return rows;
}

double to_real(const std::string& s) {
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
    size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("bad number in trace: " + s);
    }
    if (used != s.size()) throw std::runtime_error("bad number in trace: " + s);
    return v;
}

int to_int(const std::string& s) {
    size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("bad integer in trace: " + s);
    }
    if (used != s.size()) throw std::runtime_error("bad integer in trace: " + s);
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw std::runtime_error("bad flag in trace: " + s);
}

std::optional<Dir> to_dir(const std::string& s) {
    if (s == "-") return std::nullopt;
    if (s.size() == 1)
        if (auto d = dir_from_char(s[0])) return d;
    throw std::runtime_error("bad direction in trace: " + s);
}

}  // namespace

Trace trace_from_csv(const std::string& csv, const std::string& aux) {
    Trace t;
    for (const auto& f : split_csv(csv, kTraceHeader)) {
        if (f.size() != 24) throw std::runtime_error("trace row has the wrong number of fields");
        TickRecord r;
        r.tick = to_int(f[0]);
        r.pos = {to_int(f[1]), to_int(f[2])};
        r.h = to_real(f[3]);
        r.action = f[4];
        r.was_replan = to_bool(f[5]);
        r.plan_len = to_int(f[6]);
        r.plan_cost = to_real(f[7]);
        r.c1 = to_real(f[8]);
        r.c2 = to_real(f[9]);
        r.near_tie = to_bool(f[10]);
        r.local_first = to_dir(f[11]);
        r.global_first = to_dir(f[12]);
        r.policy_class = f[13];
        r.w_risk = to_real(f[14]);
        r.w_energy = to_real(f[15]);
        r.w_mem = to_real(f[16]);
        r.revealed_count = to_int(f[17]);
        r.d_goal = to_int(f[18]);
        r.energy_step = to_real(f[19]);
        r.risk_step = to_real(f[20]);
        r.governor_decision = f[21];
        r.override_reason = f[22];
        r.commit_remaining = to_int(f[23]);
        t.records.push_back(r);
    }
    if (t.records.empty()) throw std::runtime_error("trace has no records");
    // The CSV carries no terminal column; arrival shows in d_goal.
    t.terminal = t.records.back().d_goal == 0 ? Terminal::GoalReached : Terminal::MaxTicks;
    t.has_aux = !aux.empty();
    if (t.has_aux) {
        auto rows = split_csv(aux, kAuxHeader);
        if (rows.size() != t.records.size()) throw std::runtime_error("aux trace length differs");
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto& f = rows[i];
            if (f.size() != 7) throw std::runtime_error("aux row has the wrong number of fields");
            auto& r = t.records[i];
            if (to_int(f[0]) != r.tick) throw std::runtime_error("aux tick mismatch");
            r.plan_steps = f[1] == "-" ? "" : f[1];
            r.pred_energy = to_real(f[2]);
            r.c_idle = to_real(f[3]);
            r.frontier_entry = to_bool(f[4]);
            r.seen_total = to_int(f[5]);
            r.rationale_gap = to_real(f[6]);
        }
    }
    return t;
}

}  // namespace neurosis
