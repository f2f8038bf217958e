#pragma once

#include <array>
#include <optional>
#include <vector>

#include "json.hpp"
#include "neurosis/agent.hpp"
#include "neurosis/detectors.hpp"

namespace neurosis {

struct LawScores {
    double time_to_aid = 0.0;
    std::optional<double> proceed_latency;  // nullopt without a proceed cue
    double energy_per_meter = 0.0;
    double compute_per_meter = 0.0;  // replans per cell traversed
    int freeze_ticks = 0;
    double detour_inflation = 0.0;
    double churn = 0.0;
    int goal_switches = 0;
    double energy_budget = 0.0;
    double regret = 0.0;
    double neurosis_aggregate = 0.0;
};

// Entry cost under the true model: nominal weights, w_mem = 0, full
// visibility, and expected energy including slip retries.
CostField true_cost_field(const WorldSpec& spec);

// Cells the episode is trying to reach: the goal, else the non-poison food.
std::vector<Pos> objective_cells(const WorldSpec& spec);

struct OracleResult {
    double cost = kInf;
    int length = 0;  // cells on the optimal path
    std::vector<Dir> steps;
};

// Dijkstra on the true model from the start to the cheapest objective.
OracleResult oracle(const WorldSpec& spec);

// Cost of every cell entered, in the true model.
double realized_cost(const Trace& t, const WorldSpec& spec);

// realized cost plus the true cost-to-go from the final cell, minus the
// oracle. Throws std::runtime_error when the oracle has no path but the
// episode reached its goal.
double regret(const Trace& t, const WorldSpec& spec, double oracle_cost);
double regret(const Trace& t, const WorldSpec& spec);

// Fills every field except neurosis_aggregate.
LawScores law_scores(const Trace& t, const WorldSpec& spec);

// Weights for churn, goal switches, freeze ticks, detour inflation and the
// energy budget, in that order.
using ScoreWeights = std::array<double, 5>;
inline constexpr ScoreWeights kDefaultScoreWeights{1.0, 1.0, 1.0, 1.0, 1.0};

// Per-metric maxima over the canonical suite with the governor off.
extern const ScoreWeights kScoreNormalizers;

// Throws std::invalid_argument on a negative weight.
double neurosis_score(const std::vector<DetectorReport>& reports, const LawScores& s,
                      const ScoreWeights& weights = kDefaultScoreWeights);

nlohmann::ordered_json scores_to_json(const LawScores& s);

struct Audit {
    LawScores scores;
    std::vector<DetectorReport> reports;
};

// Scores, detector reports with the paired satisficing baseline, and the
// aggregate.
Audit audit(const Trace& t, const WorldSpec& spec, const DetectorConfig& cfg = {},
            const ScoreWeights& weights = kDefaultScoreWeights);

}  // namespace neurosis
