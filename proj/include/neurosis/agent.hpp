#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neurosis/governor.hpp"
#include "neurosis/planner.hpp"
#include "neurosis/rng.hpp"
#include "neurosis/world.hpp"

namespace neurosis {

struct Homeostat {
    double h = 0.0;
    double H_star = 0.0;
    double theta_h = 0.0;
    double dh_per_tick = 1.0;
};

struct HomeostatStep {
    double h;
    bool trigger;
};

HomeostatStep homeostat_tick(Homeostat& hs);
bool homeostat_trigger(const Homeostat& hs);

struct AversiveMemory {
    std::map<Pos, double> M;
    double gamma_amp = 1.0;
    double rho_decay = 0.0;
    int gen_radius = 0;
    double gen_falloff = 0.5;

    double at(Pos p) const {
        auto it = M.find(p);
        return it == M.end() ? 0.0 : it->second;
    }
};

struct MemoryEvent {
    Pos p;
    double severity;
};

// Deposit (spread over the Chebyshev kernel, clipped to the board when a
// grid is given), then decay everything and drop tiny entries.
void deposit_and_decay(AversiveMemory& m, std::optional<MemoryEvent> event, const Grid* grid = nullptr);

struct StepOutcome {
    Pos pos;
    double energy = 0.0;
    double risk = 0.0;
    bool slipped = false;
};

// Throws std::logic_error when the move targets an impassable cell.
StepOutcome step_execute(const Grid& grid, Pos pos, Dir move, double base_energy, Stream& rng);

enum class Terminal { GoalReached, Starved, MaxTicks, NoPath };
const char* terminal_name(Terminal t);
std::optional<Terminal> terminal_from_name(const std::string& s);

struct TickRecord {
    int tick = 0;
    Pos pos;
    double h = 0.0;
    std::string action = "none";
    bool was_replan = false;
    int plan_len = 0;
    double plan_cost = kInf;
    double c1 = kInf;
    double c2 = kInf;
    bool near_tie = false;
    std::optional<Dir> local_first;
    std::optional<Dir> global_first;
    std::string policy_class = "none";
    double w_risk = 0.0;
    double w_energy = 0.0;
    double w_mem = 0.0;
    int revealed_count = 0;
    int d_goal = 0;
    double energy_step = 0.0;
    double risk_step = 0.0;
    std::string governor_decision = "off";
    std::string override_reason = "none";
    int commit_remaining = 0;

    // Audit extras, exported through the companion aux file.
    std::string plan_steps;
    double pred_energy = 0.0;
    double c_idle = kInf;
    bool frontier_entry = false;
    int seen_total = 0;
    double rationale_gap = 0.0;

    bool operator==(const TickRecord&) const = default;
};

struct Trace {
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::vector<TickRecord> records;
    Terminal terminal = Terminal::MaxTicks;
    int width = 0;
    int height = 0;
    bool has_aux = true;
};

struct EpisodeOptions {
    std::optional<CostWeights> weights;
    bool memory = true;
    std::optional<VisibilityModel> visibility;
    std::optional<int> max_ticks;
};

Trace run_episode(const WorldSpec& spec, const GovernorConfig& gov, std::uint64_t seed,
                  const EpisodeOptions& opts = {});

inline const char* kTraceHeader =
    "tick,x,y,h,action,was_replan,plan_len,plan_cost,c1,c2,near_tie,local_first,global_first,policy_class,"
    "w_risk,w_energy,w_mem,revealed_count,d_goal,energy_step,risk_step,governor_decision,override,commit_remaining";
inline const char* kAuxHeader = "tick,plan_steps,pred_energy,c_idle,frontier_entry,seen_total,rationale_gap";

std::string format_real(double v);
std::string trace_to_csv(const Trace& t);
std::string trace_aux_csv(const Trace& t);

// Parses the CSV written by trace_to_csv; aux is optional. The terminal is
// goal_reached when the last d_goal is 0 and max_ticks otherwise. Throws
// std::runtime_error on malformed input.
Trace trace_from_csv(const std::string& csv, const std::string& aux = "");

}  // namespace neurosis
