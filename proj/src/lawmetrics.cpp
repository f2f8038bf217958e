#include "neurosis/lawmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neurosis {

// Per-metric maxima over the sixteen named scenarios, governor off, seed 1.
// test_lawmetrics recomputes them.
const ScoreWeights kScoreNormalizers{59.0, 38.0, 60.0, 966.6666666666666, 60.0};

CostField true_cost_field(const WorldSpec& spec) {
    Grid grid(spec);
    const CostWeights& w = spec.seasoning.weights;
    CostField f;
    f.width = grid.width();
    f.height = grid.height();
    f.cost.assign(grid.size(), kInf);
    f.terms.assign(grid.size(), {});
    for (int i = 0; i < grid.size(); ++i) {
        const Cell& c = grid.at(grid.pos_of(i));
        if (!c.passable()) continue;
        CostBreakdown b;
        b.dist = w.w_dist;
        b.risk = w.w_risk * c.risk;
        b.energy = w.w_energy * spec.seasoning.base_energy * c.energy_factor / (1.0 - c.slip_prob);
        f.terms[i] = b;
        f.cost[i] = b.sum();
    }
    return f;
}

std::vector<Pos> objective_cells(const WorldSpec& spec) {
    if (spec.goal) return {*spec.goal};
    std::vector<Pos> out;
    for (const auto& [p, c] : spec.cells)
        if (c.kind == Kind::Food && !c.poisonous) out.push_back(p);
    return out;
}

namespace {

// Cheapest cost-to-go over all objectives, per cell.
std::vector<double> best_to_go(const CostField& f, const std::vector<Pos>& targets) {
    std::vector<double> best(f.cost.size(), kInf);
    for (Pos g : targets) {
        auto c = cost_to_go(f, g);
        for (size_t i = 0; i < best.size(); ++i) best[i] = std::min(best[i], c[i]);
    }
    return best;
}

OracleResult oracle_from(const CostField& f, const std::vector<Pos>& targets, Pos from) {
    OracleResult r;
    std::optional<Pos> best;
    for (Pos g : targets) {
        double c = cost_to_go(f, g)[f.index(from)];
        if (c < r.cost) {
            r.cost = c;
            best = g;
        }
    }
    if (!best) return r;
    if (*best == from) {
        r.cost = 0.0;
        return r;
    }
    Plan p = plan_astar(f, from, *best, Canon{});
    r.steps = p.steps;
    r.length = static_cast<int>(p.steps.size());
    return r;
}

bool is_move(const std::string& action) { return action.size() == 1 && dir_from_char(action[0]).has_value(); }

Pos pos_before(const Trace& t, const WorldSpec& spec, size_t i) { return i == 0 ? spec.start : t.records[i - 1].pos; }

}  // namespace

OracleResult oracle(const WorldSpec& spec) {
    return oracle_from(true_cost_field(spec), objective_cells(spec), spec.start);
}

double realized_cost(const Trace& t, const WorldSpec& spec) {
    CostField f = true_cost_field(spec);
    double sum = 0.0;
    for (size_t i = 0; i < t.records.size(); ++i) {
        Pos p = t.records[i].pos;
        if (p != pos_before(t, spec, i)) sum += f.at(p);
    }
    return sum;
}

double regret(const Trace& t, const WorldSpec& spec, double oracle_cost) {
    bool arrived = t.terminal == Terminal::GoalReached;
    if (!std::isfinite(oracle_cost)) {
        if (arrived) throw std::runtime_error("oracle found no path but the episode reached its goal");
        return kInf;
    }
    CostField f = true_cost_field(spec);
    double rest = 0.0;
    if (!arrived && !t.records.empty()) {
        auto to_go = best_to_go(f, objective_cells(spec));
        rest = to_go[f.index(t.records.back().pos)];
    }
    return realized_cost(t, spec) + rest - oracle_cost;
}

double regret(const Trace& t, const WorldSpec& spec) { return regret(t, spec, oracle(spec).cost); }

LawScores law_scores(const Trace& t, const WorldSpec& spec) {
    LawScores s;
    Grid grid(spec);
    CostField f = true_cost_field(spec);
    auto targets = objective_cells(spec);
    const auto& R = t.records;

    s.time_to_aid = spec.max_ticks;
    for (const auto& r : R)
        if (std::find(targets.begin(), targets.end(), r.pos) != targets.end()) {
            s.time_to_aid = r.tick + 1;
            break;
        }

    if (spec.proceed_cue_tick) {
        int cue = *spec.proceed_cue_tick;
        int end = R.empty() ? cue : R.back().tick + 1;
        s.proceed_latency = std::max(0, end - cue);
        for (const auto& r : R)
            if (r.tick >= cue && is_move(r.action)) {
                s.proceed_latency = r.tick - cue;
                break;
            }
    }

    int cells = 0;
    int replans = 0;
    std::optional<Pos> endpoint;
    for (size_t i = 0; i < R.size(); ++i) {
        const auto& r = R[i];
        Pos before = pos_before(t, spec, i);
        if (r.pos != before) ++cells;
        s.energy_budget += r.energy_step;
        if (r.was_replan) ++replans;

        if (!is_move(r.action) && r.d_goal > 0) {
            for (Dir d : kAllDirs) {
                Pos q = step(before, d);
                if (grid.passable(q) && grid.at(q).risk < 0.5) {
                    ++s.freeze_ticks;
                    break;
                }
            }
        }

        if (t.has_aux && r.was_replan && i > 0) {
            std::string prev = R[i - 1].plan_steps;
            if (is_move(R[i - 1].action) && R[i - 1].pos != pos_before(t, spec, i - 1) && !prev.empty())
                prev.erase(0, 1);
            if (prefix_edit_fraction(prev, r.plan_steps, DetectorConfig{}.K_p) > 0.0) s.churn += 1.0;
        }
        if (t.has_aux && !r.plan_steps.empty()) {
            Pos e = before;
            for (char c : r.plan_steps)
                if (auto d = dir_from_char(c)) e = step(e, *d);
            if (endpoint && *endpoint != e) ++s.goal_switches;
            endpoint = e;
        }
    }
    s.energy_per_meter = s.energy_budget / std::max(1, cells);
    s.compute_per_meter = static_cast<double>(replans) / std::max(1, cells);

    OracleResult o = oracle_from(f, targets, spec.start);
    if (o.length > 0) {
        int len = cells;
        if (t.terminal != Terminal::GoalReached && !R.empty()) len += oracle_from(f, targets, R.back().pos).length;
        s.detour_inflation = std::max(0.0, 100.0 * (len - o.length) / o.length);
    }
    s.regret = regret(t, spec, o.cost);
    return s;
}

double neurosis_score(const std::vector<DetectorReport>& reports, const LawScores& s, const ScoreWeights& w) {
    for (double v : w)
        if (!(v >= 0.0)) throw std::invalid_argument("score weights must be non-negative");
    ScoreWeights m{s.churn, static_cast<double>(s.goal_switches), static_cast<double>(s.freeze_ticks),
                   s.detour_inflation, s.energy_budget};
    double total = 0.0;
    for (size_t i = 0; i < m.size(); ++i) total += w[i] * m[i] / kScoreNormalizers[i];
    for (const auto& r : reports) total += r.fired ? 1.0 : 0.0;
    return total;
}

nlohmann::ordered_json scores_to_json(const LawScores& s) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    j["time_to_aid"] = s.time_to_aid;
    j["proceed_latency"] = s.proceed_latency ? nlohmann::ordered_json(*s.proceed_latency) : nlohmann::ordered_json("n/a");
    j["energy_per_meter"] = num(s.energy_per_meter);
    j["compute_per_meter"] = num(s.compute_per_meter);
    j["freeze_ticks"] = s.freeze_ticks;
    j["detour_inflation"] = num(s.detour_inflation);
    j["churn"] = s.churn;
    j["goal_switches"] = s.goal_switches;
    j["energy_budget"] = num(s.energy_budget);
    j["regret"] = num(s.regret);
    j["neurosis_aggregate"] = num(s.neurosis_aggregate);
    return j;
}

Audit audit(const Trace& t, const WorldSpec& spec, const DetectorConfig& cfg, const ScoreWeights& weights) {
    Audit a;
    a.scores = law_scores(t, spec);
    a.reports = detect_all(t, with_paired_baseline(cfg, spec, t.seed));
    a.scores.neurosis_aggregate = neurosis_score(a.reports, a.scores, weights);
    return a;
}

}  // namespace neurosis
