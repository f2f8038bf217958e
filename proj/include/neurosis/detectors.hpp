#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurosis/agent.hpp"

namespace neurosis {

struct DetectorConfig {
    int H = 20;
    double eta = 0.02;
    std::optional<double> delta_negligible;  // default 0.01 * first planned cost
    double eps_prog = 0.05;
    int P_max = 3;
    int L_run = 4;
    double theta_flip = 0.5;
    double theta_edit = 0.3;
    double theta_mis = 0.5;
    double theta_rev = 0.5;
    double theta_pe = 3.0;
    double theta_meander = 0.2;
    double theta_tie = 0.5;       // near-tie share for "near-tie holds"
    double theta_replan = 0.5;    // replans per tick for "replan count high"
    int theta_alt = 3;            // corridor alternations
    int theta_pflip = 3;          // policy flips
    int theta_reversals = 3;
    double theta_frontier = 0.2;  // frontier advance, cells per tick
    double theta_visit = 0.05;    // frontier-visit rate treated as zero
    double lambda_idle = 0.5;
    int D_min = 3;
    double eps_m = 0.25;
    double delta_r = 0.1;
    int K_p = 4;
    int Q_revisit = 4;
    int flip_window = 20;
    int persist_window = 50;
    std::optional<int> baseline_arrival;  // from a paired margin-accept run
};

// Throws std::invalid_argument on a malformed config.
void validate(const DetectorConfig& cfg);

double prefix_edit_fraction(const std::string& old_steps, const std::string& new_steps, int K_p);

struct WindowStats {
    int a = 0;
    int b = 0;
    int span = 0;  // number of tick differences, b - a
    double progress_rate = 0.0;
    double flip_rate = 0.0;
    double first_step_disagreement = 0.0;
    int mismatch_run = 0;
    double rationale_gap = 0.0;
    double step1_flip_rate = 0.0;
    int step1_flip_run = 0;
    bool abab = false;
    double near_tie_rate = 0.0;
    int replans = 0;
    double replan_rate = 0.0;
    int moves = 0;
    int attempts = 0;
    int cycle_period = 0;  // 0 when none
    double revisit_ratio = 0.0;
    double meander_index = 0.0;
    double planning_execution_ratio = 0.0;
    double rho_energy = 1.0;
    double rho_time = 1.0;
    int rho_run = 0;
    int slip_count = 0;
    bool consistency_fail = false;
    int freeze_ticks = 0;
    int corridor_alternations = 0;
    int penetration_depth = 0;
    double frontier_visit_rate = 0.0;
    int reversals = 0;
    double reversal_reveal_cooccurrence = 0.0;
    double frontier_advance = 0.0;
    double median_improvement_per_replan = 0.0;
    double prefix_edit_mean = 0.0;
    int churn_events = 0;
    int policy_flip_count = 0;
    double weight_delta_correlation = 0.0;
    double reveal_correlation = 0.0;
    int idle_count = 0;
    int pause_count = 0;
    double idle_pref_rate = 0.0;
    int reveals = 0;
    double hunger_rise = 0.0;
    int unknown_cells = -1;  // -1 when the board size is unknown
    double delta = 0.0;
    double arrival = 0.0;
    double baseline_arrival = 0.0;
};

// Statistics over records [a, b]. Rates use the b - a transitions.
// Throws std::invalid_argument on an empty or out-of-range window.
WindowStats window_stats(const Trace& t, int a, int b, const DetectorConfig& cfg);

struct DetectorReport {
    std::string modality;
    bool fired = false;
    int window_a = 0;
    int window_b = 0;
    nlohmann::ordered_json stats;
};

// Evaluates the predicate with the clauses it depends on; `stats` is
// filled with every value a clause reads.
bool predicate(const std::string& modality, const WindowStats& s, const DetectorConfig& cfg,
               nlohmann::ordered_json* stats = nullptr);

// Slides windows of H transitions; a trace shorter than that is one window.
// Throws std::invalid_argument for an unknown modality or empty trace.
DetectorReport detect(const std::string& modality, const Trace& t, const DetectorConfig& cfg = {});
std::vector<DetectorReport> detect_all(const Trace& t, const DetectorConfig& cfg = {});

nlohmann::ordered_json report_to_json(const DetectorReport& r);
nlohmann::ordered_json reports_to_json(const std::vector<DetectorReport>& rs);

std::vector<std::string> fired_modalities(const std::vector<DetectorReport>& rs);

// Arrival tick of a paired episode under the margin-accept rule alone. A
// run that never arrives counts as its full length.
int satisficing_arrival(const WorldSpec& spec, std::uint64_t seed);

// cfg with baseline_arrival filled from the paired episode when unset.
DetectorConfig with_paired_baseline(DetectorConfig cfg, const WorldSpec& spec, std::uint64_t seed);

}  // namespace neurosis
