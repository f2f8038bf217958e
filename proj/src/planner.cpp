#include "neurosis/planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace neurosis {

bool same_cost(double a, double b) {
    if (a == b) return true;
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

double CostField::min_cost() const {
    double m = kInf;
    for (double c : cost) m = std::min(m, c);
    return m == kInf ? kMinCellCost : m;
}

namespace {

bool is_known(const PlanView& v, int i) { return v.known == nullptr || (*v.known)[i] != 0; }

}  // namespace

double predicted_energy(const PlanView& view, Pos p) {
    const Grid& g = *view.grid;
    if (!g.in_bounds(p)) return view.base_energy;
    int i = g.index(p);
    if (!is_known(view, i)) return view.base_energy;
    const Cell& c = g.at(p);
    double e = view.base_energy * view.alpha_hat[static_cast<int>(c.kind)];
    if (c.kind == Kind::Mirage) e = std::max(kMinCellCost, e - c.lure);
    return e;
}

CostField build_cost_field(const PlanView& view, const CostWeights& w) {
    const Grid& g = *view.grid;
    CostField f;
    f.width = g.width();
    f.height = g.height();
    f.cost.assign(g.size(), kInf);
    f.terms.assign(g.size(), CostBreakdown{});
    for (int i = 0; i < g.size(); ++i) {
        Pos p = g.pos_of(i);
        double mem = view.memory ? (*view.memory)[i] : 0.0;
        CostBreakdown t;
        double total;
        if (!is_known(view, i)) {
            // Optimistic prior: an unseen cell is Open with zero risk.
            t.dist = w.w_dist;
            t.energy = w.w_energy * view.base_energy;
            t.mem = w.w_mem * mem;
            total = t.dist + t.energy + t.mem + view.uncertainty_penalty - view.frontier_bonus;
        } else {
            const Cell& c = g.at(p);
            if (!c.passable()) continue;
            if (view.avoid_risk && c.risk > 0.0) continue;
            t.dist = w.w_dist;
            t.risk = w.w_risk * c.risk * view.risk_scale;
            t.energy = w.w_energy * view.base_energy * view.alpha_hat[static_cast<int>(c.kind)];
            t.mem = w.w_mem * mem;
            total = t.dist + t.risk + t.energy + t.mem;
            if (c.kind == Kind::Mirage) total -= c.lure;
        }
        if (view.jitter) total *= (*view.jitter)[i];
        total = std::max(kMinCellCost, total);
        t.adjust = total - (t.dist + t.risk + t.energy + t.mem);
        f.cost[i] = total;
        f.terms[i] = t;
    }
    return f;
}

void rank_alternatives(std::vector<Alternative>& alts, const Canon& canon) {
    auto before = [&](const Alternative& a, const Alternative& b) {
        if (same_cost(a.cost, b.cost)) return canon.rank(a.first) < canon.rank(b.first);
        return a.cost < b.cost;
    };
    for (size_t i = 1; i < alts.size(); ++i) {
        Alternative key = alts[i];
        size_t j = i;
        while (j > 0 && before(key, alts[j - 1])) {
            alts[j] = alts[j - 1];
            --j;
        }
        alts[j] = key;
    }
}

namespace {

struct Search {
    std::vector<double> g;
    std::vector<std::uint8_t> closed;
};

// Backward A* toward `start`. Stops once the start, its passable neighbours
// and every node that could sit on an optimal path are closed.
Search backward_astar(const CostField& f, Pos start, Pos goal) {
    Search s;
    int n = f.width * f.height;
    s.g.assign(n, kInf);
    s.closed.assign(n, 0);
    if (!f.passable(goal)) return s;
    double cmin = f.min_cost();
    auto h = [&](Pos p) { return manhattan(p, start) * cmin; };

    using Key = std::tuple<double, int, int>;  // f, x, y
    std::priority_queue<Key, std::vector<Key>, std::greater<>> open;
    s.g[f.index(goal)] = 0.0;
    open.push({h(goal), goal.x, goal.y});

    std::vector<Pos> watch;
    if (f.in_bounds(start)) watch.push_back(start);
    for (Dir d : kAllDirs) {
        Pos q = step(start, d);
        if (f.passable(q)) watch.push_back(q);
    }
    auto watched_closed = [&] {
        for (Pos q : watch)
            if (!s.closed[f.index(q)]) return false;
        return true;
    };
    double f_star = kInf;

    while (!open.empty()) {
        auto [fu, x, y] = open.top();
        Pos u{x, y};
        int ui = f.index(u);
        if (s.closed[ui]) {
            open.pop();
            continue;
        }
        if (f_star < kInf && fu > f_star && !same_cost(fu, f_star) && watched_closed()) break;
        open.pop();
        s.closed[ui] = 1;
        if (u == start) f_star = s.g[ui];
        double cu = f.cost[ui];  // moving into u costs cu
        for (Dir d : kAllDirs) {
            Pos v = step(u, d);
            if (!f.passable(v)) continue;
            int vi = f.index(v);
            if (s.closed[vi]) continue;
            double ng = s.g[ui] + cu;
            if (ng < s.g[vi]) {
                s.g[vi] = ng;
                open.push({ng + h(v), v.x, v.y});
            }
        }
    }
    return s;
}

std::optional<Dir> best_next(const CostField& f, const Search& s, Pos u, const Canon& canon) {
    std::optional<Dir> best;
    double best_v = kInf;
    for (Dir d : canon.order) {
        Pos v = step(u, d);
        if (!f.passable(v)) continue;
        int vi = f.index(v);
        if (!s.closed[vi]) continue;
        double val = f.cost[vi] + s.g[vi];
        if (!best || (val < best_v && !same_cost(val, best_v))) {
            best = d;
            best_v = val;
        }
    }
    return best;
}

void extract(const CostField& f, const Search& s, Pos from, Pos goal, const Canon& canon, Plan& p) {
    Pos u = from;
    int guard = f.width * f.height + 1;
    while (u != goal && guard-- > 0) {
        auto d = best_next(f, s, u, canon);
        if (!d) {
            p.found = false;
            return;
        }
        u = step(u, *d);
        p.steps.push_back(*d);
        p.cells.push_back(u);
    }
    if (u != goal) p.found = false;
}

void decompose(const CostField& f, Plan& p) {
    p.decomposition = {};
    for (Pos c : p.cells) p.decomposition += f.terms[f.index(c)];
}

}  // namespace

Plan plan_astar(const CostField& f, Pos start, Pos goal, const Canon& canon) {
    Plan p;
    if (!f.passable(start) || !f.passable(goal)) return p;
    if (start == goal) {
        p.found = true;
        p.c_total = 0.0;
        return p;
    }
    Search s = backward_astar(f, start, goal);
    if (s.g[f.index(start)] == kInf) return p;
    for (Dir d : kAllDirs) {
        Pos v = step(start, d);
        if (!f.passable(v)) continue;
        int vi = f.index(v);
        if (!s.closed[vi] || s.g[vi] == kInf) continue;
        p.alternatives.push_back({d, f.cost[vi] + s.g[vi]});
    }
    rank_alternatives(p.alternatives, canon);
    p.found = true;
    Dir first = p.alternatives.front().first;
    Pos u = step(start, first);
    p.steps.push_back(first);
    p.cells.push_back(u);
    extract(f, s, u, goal, canon, p);
    if (!p.found) return p;
    p.c_total = p.alternatives.front().cost;
    decompose(f, p);
    return p;
}

Plan plan_astar(const PlanView& view, Pos start, Pos goal, const CostWeights& w, const Canon& canon) {
    return plan_astar(build_cost_field(view, w), start, goal, canon);
}

Plan plan_via(const CostField& f, Pos start, Pos goal, Dir first, const Canon& canon) {
    Plan p;
    Pos u = step(start, first);
    if (!f.passable(start) || !f.passable(u) || !f.passable(goal)) return p;
    Search s = backward_astar(f, u, goal);
    if (s.g[f.index(u)] == kInf) return p;
    p.found = true;
    p.steps.push_back(first);
    p.cells.push_back(u);
    extract(f, s, u, goal, canon, p);
    if (!p.found) return p;
    p.c_total = f.cost[f.index(u)] + s.g[f.index(u)];
    p.alternatives.push_back({first, p.c_total});
    decompose(f, p);
    return p;
}

std::vector<double> cost_to_go(const CostField& f, Pos goal) {
    std::vector<double> g(f.width * f.height, kInf);
    if (!f.passable(goal)) return g;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    g[f.index(goal)] = 0.0;
    pq.push({0.0, f.index(goal)});
    while (!pq.empty()) {
        auto [d, i] = pq.top();
        pq.pop();
        if (d > g[i]) continue;
        Pos u{i % f.width, i / f.width};
        for (Dir dir : kAllDirs) {
            Pos v = step(u, dir);
            if (!f.passable(v)) continue;
            double nd = d + f.cost[i];
            int vi = f.index(v);
            if (nd < g[vi]) {
                g[vi] = nd;
                pq.push({nd, vi});
            }
        }
    }
    return g;
}

double path_cost(const CostField& f, Pos start, const std::vector<Dir>& steps) {
    double total = 0.0;
    Pos p = start;
    for (Dir d : steps) {
        p = step(p, d);
        if (!f.passable(p)) return kInf;
        total += f.cost[f.index(p)];
    }
    return total;
}

bool near_tie(double c1, double c2, double eta) { return c2 <= (1.0 + eta) * c1; }

double fuse(double c_global, double c_local, double alpha) { return alpha * c_global + (1.0 - alpha) * c_local; }

LocalChoice local_policy(const CostField& f, Pos pos, const Canon& canon, std::optional<Pos> target,
                         double goal_weight) {
    LocalChoice out;
    for (Dir d : kAllDirs) {
        Pos v = step(pos, d);
        if (!f.passable(v)) continue;
        double c = f.cost[f.index(v)];
        if (target) c += goal_weight * manhattan(v, *target);
        out.ranked.push_back({d, c});
    }
    rank_alternatives(out.ranked, canon);
    if (!out.ranked.empty()) out.move = out.ranked.front().first;
    return out;
}

std::optional<Pos> select_target(const CostField& f, Pos pos, const std::vector<Pos>& foods, const Canon& canon) {
    std::optional<Pos> best;
    double best_c = kInf;
    for (Pos food : foods) {
        Plan p = plan_astar(f, pos, food, canon);
        if (!p.found) continue;
        bool better = !best || (p.c_total < best_c && !same_cost(p.c_total, best_c)) ||
                      (same_cost(p.c_total, best_c) && food < *best);
        if (better) {
            best = food;
            best_c = p.c_total;
        }
    }
    return best;
}

}  // namespace neurosis
