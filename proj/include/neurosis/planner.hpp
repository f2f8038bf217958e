#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "neurosis/geometry.hpp"
#include "neurosis/world.hpp"

namespace neurosis {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kMinCellCost = 0.01;

struct CostBreakdown {
    double dist = 0.0;
    double risk = 0.0;
    double energy = 0.0;
    double mem = 0.0;
    double adjust = 0.0;  // lure, uncertainty, jitter and the floor clamp
    double sum() const { return dist + risk + energy + mem + adjust; }
    CostBreakdown& operator+=(const CostBreakdown& o) {
        dist += o.dist;
        risk += o.risk;
        energy += o.energy;
        mem += o.mem;
        adjust += o.adjust;
        return *this;
    }
};

// What the planner believes about the board. Null pointers mean "no layer".
struct PlanView {
    const Grid* grid = nullptr;
    const std::vector<std::uint8_t>* known = nullptr;
    const std::vector<double>* memory = nullptr;
    const std::vector<double>* jitter = nullptr;
    std::array<double, 7> alpha_hat{1, 1, 1, 1, 1, 1, 1};
    double base_energy = 1.0;
    double uncertainty_penalty = 0.0;
    double frontier_bonus = 0.0;
    double risk_scale = 1.0;
    bool avoid_risk = false;
};

// Entry cost of every cell; kInf marks impassable.
struct CostField {
    int width = 0;
    int height = 0;
    std::vector<double> cost;
    std::vector<CostBreakdown> terms;

    bool in_bounds(Pos p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
    int index(Pos p) const { return p.y * width + p.x; }
    double at(Pos p) const { return in_bounds(p) ? cost[index(p)] : kInf; }
    bool passable(Pos p) const { return at(p) < kInf; }
    double min_cost() const;
};

CostField build_cost_field(const PlanView& view, const CostWeights& w);

// Model-predicted energy for entering p, as the agent believes it.
double predicted_energy(const PlanView& view, Pos p);

struct Alternative {
    Dir first;
    double cost;
};

struct Plan {
    bool found = false;
    std::vector<Dir> steps;
    std::vector<Pos> cells;  // cells entered, in order
    double c_total = kInf;
    CostBreakdown decomposition;
    std::vector<Alternative> alternatives;  // ascending, canon on ties

    double c1() const { return alternatives.empty() ? c_total : alternatives[0].cost; }
    double c2() const { return alternatives.size() < 2 ? kInf : alternatives[1].cost; }
    std::optional<Dir> first() const { return steps.empty() ? std::nullopt : std::optional<Dir>(steps[0]); }
};

// Backward A* from goal; the path is read greedily from start using the
// exact cost-to-go, so a plan's suffix is the plan from its second cell.
Plan plan_astar(const CostField& field, Pos start, Pos goal, const Canon& canon);
Plan plan_astar(const PlanView& view, Pos start, Pos goal, const CostWeights& w, const Canon& canon);

// The plan that begins with a fixed first step and continues optimally.
Plan plan_via(const CostField& field, Pos start, Pos goal, Dir first, const Canon& canon);

// Full backward Dijkstra: cost-to-go to goal for every cell.
std::vector<double> cost_to_go(const CostField& field, Pos goal);

// Sum of entry costs along an explicit move list; kInf if it leaves the map
// or hits an impassable cell.
double path_cost(const CostField& field, Pos start, const std::vector<Dir>& steps);

bool near_tie(double c1, double c2, double eta);

double fuse(double c_global, double c_local, double alpha);

struct LocalChoice {
    std::optional<Dir> move;
    std::vector<Alternative> ranked;
};

// Minimum-cost orthogonal neighbour. With a target, each candidate also pays
// goal_weight times its Manhattan distance to the target.
LocalChoice local_policy(const CostField& field, Pos pos, const Canon& canon, std::optional<Pos> target = std::nullopt,
                         double goal_weight = 0.0);

// Food cell with the cheapest plan; ties go to lower x, then lower y.
std::optional<Pos> select_target(const CostField& field, Pos pos, const std::vector<Pos>& foods, const Canon& canon);

// Stable insertion sort, ascending cost, canon order inside the tie band.
void rank_alternatives(std::vector<Alternative>& alts, const Canon& canon);

bool same_cost(double a, double b);

}  // namespace neurosis
