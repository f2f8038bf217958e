#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurosis/geometry.hpp"
#include "neurosis/planner.hpp"

namespace neurosis {

struct Levers {
    bool commit_near_tie = false;
    bool accept_margin = false;
    bool tabu = false;
    bool min_step = false;
    bool idle_tax = false;
    bool pause_budget = false;
    bool detour_budget = false;
    bool fusion = false;
    bool heading_hysteresis = false;
    bool canonical_tiebreak = false;
    bool commit = false;
    bool calibration = false;
    bool smoothing = false;
    bool hysteresis = false;
    bool reversal_cost = false;
    bool frontier_bonus = false;
    bool throttle = false;
    bool visit_penalty = false;
    bool operator==(const Levers&) const = default;
};

inline constexpr int kLeverCount = 18;
std::array<bool*, kLeverCount> lever_slots(Levers& l);
std::array<const char*, kLeverCount> lever_names();

struct GovernorConfig {
    bool enabled = true;
    std::string name = "custom";
    int K = 3;               // commit steps
    int tau = 6;             // commit ticks
    double Delta = 0.5;      // switch margin
    double beta = 2.0;       // large-gain factor
    int B_pause = 2;
    int B_detour = 0;        // detour steps allowed per window
    int detour_window = 20;
    int T_idle = 3;
    double lambda_idle = 0.0;
    double gamma_quota = 0.0;
    double theta_minus = 0.6;
    double theta_plus = 0.95;
    double alpha_ema = 0.25;
    double S_switch = 0.0;
    double Q_improve = 0.0;
    int tabu_len = 1;
    double idle_tax_rate = 0.1;
    double visit_penalty = 0.0;
    double frontier_bonus = 0.5;
    double fusion_alpha = 0.7;
    double veto_risk = 0.8;
    double reversal_cost = 1.0;
    int L_cal = 2;
    double eps_cal = 0.25;
    double safety_risk = 0.8;
    Levers levers;

    bool operator==(const GovernorConfig&) const = default;
};

// Throws std::invalid_argument when a parameter is outside its domain.
void validate(const GovernorConfig& cfg);

GovernorConfig governor_off();
// One preset per modality, plus "default" (every lever) and "off".
GovernorConfig governor_preset(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::ordered_json governor_to_json(const GovernorConfig& cfg);
GovernorConfig governor_from_json(const nlohmann::ordered_json& j);

enum class OverrideReason { None, SafetyBreach, LargeGain, NovelObservation };
const char* override_name(OverrideReason r);

struct Commitment {
    std::vector<Dir> steps;
    int steps_remaining = 0;
    int ticks_remaining = 0;
    double cost = 0.0;
    std::string policy_class = "none";
    int pauses_used = 0;
    std::optional<Dir> tabu_dir;
    int tabu_expiry = -1;
    double idle_tax = 0.0;
    std::array<double, 7> alpha_hat{1, 1, 1, 1, 1, 1, 1};
    std::array<int, 7> cal_run{};
    std::array<double, 7> cal_realized{};
    std::array<double, 7> cal_predicted{};
    int detour_used = 0;
    int detour_window_start = 0;
    double smoothed_w = 0.0;
    bool smoothed_init = false;
    std::string hyst_class = "risky_short";

    bool active() const { return steps_remaining > 0 && ticks_remaining > 0 && !steps.empty(); }
    void clear() {
        steps.clear();
        steps_remaining = 0;
        ticks_remaining = 0;
    }
};

enum class BaseAction { Move, Idle, Pause, Adopt, None };

// Everything the governor may consult on one tick.
struct Proposal {
    int tick = 0;
    std::string controller = "global";
    std::vector<Alternative> alts;        // global, choice-level, ranked
    std::vector<Alternative> local_alts;  // local module, ranked (post veto)
    std::vector<double> alt_risk;         // risk of the cell behind each global alt
    double c1 = kInf;
    double c2 = kInf;
    bool near_tie = false;
    std::optional<Dir> global_first;
    std::optional<Dir> local_first;
    BaseAction base = BaseAction::None;
    std::optional<Dir> base_dir;
    double c_idle = kInf;
    double c_move = kInf;
    bool has_incumbent = false;
    std::optional<Dir> incumbent_first;
    double incumbent_cost = kInf;
    bool plan_differs = false;  // the fresh plan is not the incumbent
    std::optional<Dir> last_choice;
    std::optional<Dir> heading;
    std::optional<Dir> last_move;
    int stationary_ticks = 0;
    double eta = 0.02;
    double commit_cost = kInf;
    double commit_prefix_risk = 0.0;
    bool commit_invalidated = false;
    bool safe_neighbour = true;
};

enum class DecisionLabel { Off, Committed, Accept, Pause, Forced };
const char* decision_name(DecisionLabel d);

struct Decision {
    BaseAction action = BaseAction::None;
    std::optional<Dir> dir;
    DecisionLabel label = DecisionLabel::Off;
    OverrideReason override_reason = OverrideReason::None;
    bool use_commitment = false;  // follow commitment.steps
    bool use_incumbent = false;   // keep the incumbent plan
    bool start_commit = false;    // commit K steps to the plan through dir
};

bool accept_plan(double c_new, double c_cur, double Delta, double S_switch);

OverrideReason override_check(const Proposal& p, const Commitment& c, const GovernorConfig& cfg);

struct SmoothResult {
    double smoothed;
    std::string policy_class;
};
SmoothResult smooth_and_hysteresis(double raw_w, double prev_smoothed, const std::string& current_class,
                                   double theta_minus, double theta_plus, double alpha_ema, bool hysteresis = true);

double calibrate(double alpha_hat, double rho, int persistence, int L_run);

// Fixed lever order: fusion/veto, tabu, acceptance, commitment (including
// the near-tie commit and heading hold), pause budget, idle tax and minimum
// step. Smoothing, hysteresis, calibration, reversal cost, detour budget and
// frontier bonus act on the planner's inputs before a proposal exists.
Decision govern(const Proposal& p, Commitment& c, const GovernorConfig& cfg);

}  // namespace neurosis
