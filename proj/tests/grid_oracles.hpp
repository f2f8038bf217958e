#pragma once

#include <algorithm>
#include <queue>
#include <vector>

#include "neurosis/planner.hpp"
#include "neurosis/rng.hpp"
#include "neurosis/world.hpp"

namespace oracles {

using neurosis::Cell;
using neurosis::CostWeights;
using neurosis::Grid;
using neurosis::kInf;
using neurosis::Kind;
using neurosis::Pos;
using neurosis::Stream;
using neurosis::WorldSpec;

// Forward uniform-cost search written against the raw grid, sharing no code
// with the planner's cost field.
inline double uniform_cost(const Grid& g, Pos s, Pos t, const CostWeights& w) {
    auto entry = [&](Pos p) {
        const Cell& c = g.at(p);
        if (!c.passable()) return kInf;
        double v = w.w_dist + w.w_risk * c.risk + w.w_energy * 1.0 - (c.kind == Kind::Mirage ? c.lure : 0.0);
        return std::max(0.01, v);
    };
    std::vector<double> dist(g.size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[g.index(s)] = 0;
    pq.push({0.0, g.index(s)});
    while (!pq.empty()) {
        auto [d, i] = pq.top();
        pq.pop();
        if (d > dist[i]) continue;
        Pos u = g.pos_of(i);
        if (u == t) return d;
        for (Pos v : {Pos{u.x + 1, u.y}, Pos{u.x - 1, u.y}, Pos{u.x, u.y + 1}, Pos{u.x, u.y - 1}}) {
            if (!g.in_bounds(v)) continue;
            double c = entry(v);
            if (c == kInf) continue;
            if (d + c < dist[g.index(v)]) {
                dist[g.index(v)] = d + c;
                pq.push({d + c, g.index(v)});
            }
        }
    }
    return kInf;
}

// Multiples of 1/16; sums of a few hundred of them are exact in a double.
inline double sixteenths(Stream& r, int n) { return static_cast<double>(r.below(n)) / 16.0; }

// With dyadic set, every risk and lure is a multiple of 1/16.
inline WorldSpec random_world(Stream& r, int max_side, bool dyadic = false) {
    WorldSpec s;
    s.width = 2 + static_cast<int>(r.below(max_side - 1));
    s.height = 2 + static_cast<int>(r.below(max_side - 1));
    for (int x = 0; x < s.width; ++x)
        for (int y = 0; y < s.height; ++y) {
            double u = r.uniform();
            if (u < 0.2)
                s.cells[{x, y}] = Cell::rock();
            else if (u < 0.45)
                s.cells[{x, y}] = Cell::risk_band(dyadic ? sixteenths(r, 32) : r.uniform() * 2.0);
            else if (u < 0.5)
                s.cells[{x, y}] = Cell::mirage(dyadic ? sixteenths(r, 16) : r.uniform());
        }
    s.start = {0, 0};
    s.cells.erase(s.start);
    s.goal = Pos{s.width - 1, s.height - 1};
    s.cells.erase(*s.goal);
    return s;
}

// w_dist >= 1 keeps every mirage cell above the planner's cost floor.
inline CostWeights dyadic_weights(Stream& r) {
    return {1.0 + sixteenths(r, 16), sixteenths(r, 48), sixteenths(r, 16), 0.0};
}

}  // namespace oracles
