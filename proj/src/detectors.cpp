#include "neurosis/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neurosis {

void validate(const DetectorConfig& c) {
    auto fail = [](const char* m) { throw std::invalid_argument(m); };
    if (c.H < 1 || c.flip_window < 1 || c.persist_window < 1) fail("window sizes must be >= 1");
    if (c.H < c.flip_window) fail("H must be >= flip_window");
    if (c.P_max < 2 || c.L_run < 1 || c.K_p < 1 || c.Q_revisit < 1 || c.D_min < 0) fail("bad integer threshold");
    for (double v : {c.eta, c.eps_prog, c.theta_flip, c.theta_edit, c.theta_mis, c.theta_rev, c.theta_pe,
                     c.theta_meander, c.theta_tie, c.theta_replan, c.theta_frontier, c.theta_visit, c.lambda_idle,
                     c.eps_m, c.delta_r})
        if (!(v >= 0.0)) fail("thresholds must be >= 0");
    if (c.delta_negligible && !(*c.delta_negligible >= 0.0)) fail("delta must be >= 0");
}

double prefix_edit_fraction(const std::string& a0, const std::string& b0, int K_p) {
    if (K_p < 1) throw std::invalid_argument("K_p must be >= 1");
    std::string a = a0.substr(0, std::min<size_t>(a0.size(), K_p));
    std::string b = b0.substr(0, std::min<size_t>(b0.size(), K_p));
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[b.size()]) / K_p;
}

namespace {

std::optional<Dir> move_letter(const std::string& action) {
    if (action.size() == 1) return dir_from_char(action[0]);
    return std::nullopt;
}

std::optional<Dir> heading_set(const std::string& action) {
    if (auto d = move_letter(action)) return d;
    if (action.size() == 6 && action.rfind("turn_", 0) == 0) return dir_from_char(action[5]);
    return std::nullopt;
}

bool moved_at(const Trace& t, int i) {
    const auto& r = t.records[i];
    if (!move_letter(r.action)) return false;
    if (i == 0) return true;
    return r.pos != t.records[i - 1].pos;
}

bool corridor(const std::string& c) { return c == "corridor_A" || c == "corridor_B"; }
bool policy(const std::string& c) { return c == "risky_short" || c == "safe_long"; }

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

WindowStats window_stats(const Trace& t, int a, int b, const DetectorConfig& cfg) {
    const auto& R = t.records;
    int n = static_cast<int>(R.size());
    if (n == 0 || a < 0 || b >= n || a > b) throw std::invalid_argument("window outside the trace");
    WindowStats s;
    s.a = R[a].tick;
    s.b = R[b].tick;
    s.span = b - a;
    double D = std::max(1, s.span);

    double first_c1 = kInf;
    for (const auto& r : R)
        if (std::isfinite(r.c1)) {
            first_c1 = r.c1;
            break;
        }
    s.delta = cfg.delta_negligible.value_or(std::isfinite(first_c1) ? 0.01 * first_c1 : 0.0);
    s.arrival = R.back().d_goal == 0 ? static_cast<double>(n) : kInf;
    s.baseline_arrival = cfg.baseline_arrival ? *cfg.baseline_arrival : R.front().plan_len;

    s.progress_rate = (R[a].d_goal - R[b].d_goal) / D;
    s.hunger_rise = R[b].h - R[a].h;

    // Heading reversals.
    std::optional<Dir> heading;
    for (int i = 0; i <= a; ++i)
        if (auto h = heading_set(R[i].action)) heading = h;
    int head_rev = 0;
    for (int i = a + 1; i <= b; ++i)
        if (auto h = heading_set(R[i].action)) {
            if (heading && *h == opposite(*heading)) ++head_rev;
            heading = h;
        }
    s.flip_rate = head_rev * static_cast<double>(cfg.flip_window) / D;

    // Local versus global first steps.
    int both = 0, mism = 0, run = 0;
    double gap_sum = 0.0;
    for (int i = a + 1; i <= b; ++i) {
        const auto& r = R[i];
        if (!r.local_first || !r.global_first) {
            run = 0;
            continue;
        }
        ++both;
        if (*r.local_first != *r.global_first) {
            ++mism;
            gap_sum += r.rationale_gap;
            s.mismatch_run = std::max(s.mismatch_run, ++run);
        } else {
            run = 0;
        }
    }
    s.first_step_disagreement = both ? static_cast<double>(mism) / both : 0.0;
    s.rationale_gap = mism ? gap_sum / mism : 0.0;

    // Step-one choices at replans, and near ties.
    std::vector<Dir> firsts;
    for (int i = a; i <= b; ++i)
        if (R[i].was_replan && R[i].global_first) firsts.push_back(*R[i].global_first);
    int flips = 0, frun = 0;
    for (size_t k = 1; k < firsts.size(); ++k) {
        if (firsts[k] != firsts[k - 1]) {
            ++flips;
            s.step1_flip_run = std::max(s.step1_flip_run, ++frun);
        } else {
            frun = 0;
        }
    }
    s.step1_flip_rate = firsts.size() > 1 ? static_cast<double>(flips) / (firsts.size() - 1) : 0.0;
    for (size_t k = 3; k < firsts.size(); ++k)
        if (firsts[k] == firsts[k - 2] && firsts[k - 1] == firsts[k - 3] && firsts[k] != firsts[k - 1]) s.abab = true;

    int ties = 0, tie_base = 0;
    std::vector<double> improvements;
    double edit_sum = 0.0;
    int edit_n = 0;
    for (int i = a + 1; i <= b; ++i) {
        const auto& r = R[i];
        if (!r.was_replan) continue;
        ++s.replans;
        if (std::isfinite(r.c1)) {
            ++tie_base;
            if (std::isfinite(r.c2) && r.c2 <= (1.0 + cfg.eta) * r.c1) ++ties;
        }
        double imp = r.plan_cost - r.c1;
        if (std::isfinite(imp)) improvements.push_back(imp);
        if (t.has_aux) {
            std::string prev = R[i - 1].plan_steps;
            if (moved_at(t, i - 1) && !prev.empty()) prev.erase(0, 1);
            double e = prefix_edit_fraction(prev, r.plan_steps, cfg.K_p);
            edit_sum += e;
            ++edit_n;
            if (e > cfg.theta_edit && std::isfinite(imp) && std::abs(imp) < s.delta) ++s.churn_events;
        }
    }
    s.near_tie_rate = tie_base ? static_cast<double>(ties) / tie_base : 0.0;
    s.replan_rate = s.replans / D;
    s.median_improvement_per_replan = median(improvements);
    s.prefix_edit_mean = edit_n ? edit_sum / edit_n : 0.0;

    // Movement.
    std::optional<Dir> prev_move;
    if (moved_at(t, a)) prev_move = move_letter(R[a].action);
    int turns = 0, revisits = 0, co = 0;
    double e_real = 0.0, e_pred = 0.0;
    int ratio_run = 0;
    for (int i = a + 1; i <= b; ++i) {
        const auto& r = R[i];
        auto letter = move_letter(r.action);
        bool moved = moved_at(t, i);
        if (letter) {
            ++s.attempts;
            if (!moved) ++s.slip_count;
            e_real += r.energy_step;
            e_pred += r.pred_energy;
            if (t.has_aux && r.pred_energy > 0.0 && r.energy_step / r.pred_energy >= 1.0 + cfg.eps_m)
                s.rho_run = std::max(s.rho_run, ++ratio_run);
            else
                ratio_run = 0;
        } else if (r.pos == R[i - 1].pos) {
            ++s.freeze_ticks;
        }
        if (r.action == "idle") ++s.idle_count;
        if (r.action == "pause") ++s.pause_count;
        s.reveals += r.revealed_count;
        if (!moved) continue;
        ++s.moves;
        if (prev_move && *letter != *prev_move) ++turns;
        if (prev_move && *letter == opposite(*prev_move)) {
            ++s.reversals;
            if (r.revealed_count > 0) ++co;
        }
        prev_move = letter;
        std::vector<Pos> recent;
        for (int j = i - 1; j >= 0 && static_cast<int>(recent.size()) < cfg.Q_revisit; --j)
            if (std::find(recent.begin(), recent.end(), R[j].pos) == recent.end()) recent.push_back(R[j].pos);
        if (std::find(recent.begin(), recent.end(), r.pos) != recent.end()) ++revisits;
    }
    s.meander_index = s.moves ? static_cast<double>(turns) / s.moves : 0.0;
    s.revisit_ratio = s.moves ? static_cast<double>(revisits) / s.moves : 0.0;
    s.reversal_reveal_cooccurrence = s.reversals ? static_cast<double>(co) / s.reversals : 0.0;
    s.planning_execution_ratio = s.moves ? static_cast<double>(s.replans) / s.moves : (s.replans ? kInf : 0.0);
    s.rho_energy = !t.has_aux ? std::nan("") : (s.attempts && e_pred > 0.0 ? e_real / e_pred : 1.0);
    s.rho_time = s.moves ? static_cast<double>(s.attempts) / s.moves : (s.attempts ? kInf : 1.0);
    s.consistency_fail = s.slip_count > 0;

    // Cycles over positions.
    for (int P = 2; P <= cfg.P_max && !s.cycle_period; ++P)
        for (int i = a; i + 3 * P - 1 <= b && !s.cycle_period; ++i) {
            bool ok = false;
            for (int j = i + 1; j < i + P; ++j)
                if (R[j].pos != R[i].pos) ok = true;
            for (int j = i; ok && j < i + 2 * P; ++j)
                if (R[j].pos != R[j + P].pos) ok = false;
            if (ok) s.cycle_period = P;
        }

    // Corridor and policy classes.
    std::string last_corr;
    int pen = 0;
    std::string pen_class;
    for (int i = a; i <= b; ++i) {
        const std::string& c = R[i].policy_class;
        if (corridor(c)) {
            if (!last_corr.empty() && c != last_corr) ++s.corridor_alternations;
            last_corr = c;
        }
        if (i == a) continue;
        if (moved_at(t, i) && corridor(c)) {
            pen = (c == pen_class) ? pen + 1 : 1;
            pen_class = c;
            s.penetration_depth = std::max(s.penetration_depth, pen);
        } else if (!moved_at(t, i) && !move_letter(R[i].action) && R[i].action.rfind("turn_", 0) != 0) {
            pen = 0;
            pen_class.clear();
        }
        const std::string& pc = R[i - 1].policy_class;
        if (policy(c) && policy(pc) && c != pc) {
            ++s.policy_flip_count;
            if (std::abs(R[i].w_risk - R[i - 1].w_risk) > 1e-12) s.weight_delta_correlation += 1.0;
            if (R[i].revealed_count > 0) s.reveal_correlation += 1.0;
        }
    }
    if (s.policy_flip_count) {
        s.weight_delta_correlation /= s.policy_flip_count;
        s.reveal_correlation /= s.policy_flip_count;
    }

    // Frontier and idle preference.
    if (t.has_aux) {
        int fe = 0, pref = 0;
        for (int i = a + 1; i <= b; ++i) {
            if (R[i].frontier_entry) ++fe;
            if (std::isfinite(R[i].c_idle) && R[i].c_idle <= R[i].c1 + cfg.lambda_idle) ++pref;
        }
        s.frontier_visit_rate = fe / D;
        s.frontier_advance = (R[b].seen_total - R[a].seen_total) / D;
        s.idle_pref_rate = pref / D;
        if (t.width > 0 && t.height > 0) s.unknown_cells = t.width * t.height - R[b].seen_total;
    } else {
        s.frontier_visit_rate = std::nan("");
        s.frontier_advance = s.reveals / D;
        s.idle_pref_rate = s.idle_count / D;
    }
    return s;
}

namespace {

nlohmann::ordered_json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

bool predicate(const std::string& m, const WindowStats& s, const DetectorConfig& c, nlohmann::ordered_json* out) {
    nlohmann::ordered_json j;
    bool low_progress = s.progress_rate < c.eps_prog;
    bool fired = false;
    if (m == "flipflop") {
        bool c1 = s.step1_flip_rate > c.theta_flip && s.near_tie_rate >= c.theta_tie;
        bool c2 = s.abab;
        bool c3 = s.prefix_edit_mean > c.theta_edit && s.median_improvement_per_replan < s.delta;
        bool c4 = low_progress && s.replan_rate >= c.theta_replan;
        fired = (c1 + c2 + c3 + c4) >= 2;
        j["step1_flip_rate"] = s.step1_flip_rate;
        j["near_tie_rate"] = s.near_tie_rate;
        j["abab"] = s.abab;
        j["prefix_edit_mean"] = s.prefix_edit_mean;
        j["median_improvement_per_replan"] = s.median_improvement_per_replan;
        j["delta"] = s.delta;
        j["progress_rate"] = s.progress_rate;
        j["replan_rate"] = s.replan_rate;
        j["clauses_held"] = c1 + c2 + c3 + c4;
    } else if (m == "plan_churn") {
        fired = s.replan_rate >= c.theta_replan && s.churn_events >= 2;
        j["replan_rate"] = s.replan_rate;
        j["churn_events"] = s.churn_events;
        j["prefix_edit_mean"] = s.prefix_edit_mean;
        j["delta"] = s.delta;
    } else if (m == "perseveration") {
        fired = s.cycle_period >= 2 && s.cycle_period <= c.P_max && low_progress && s.revisit_ratio > c.theta_rev;
        j["cycle_period"] = s.cycle_period;
        j["progress_rate"] = s.progress_rate;
        j["revisit_ratio"] = s.revisit_ratio;
    } else if (m == "paralysis") {
        fired = s.moves == 0 && s.replan_rate >= c.theta_replan && s.reveals == 0 && low_progress &&
                s.idle_pref_rate >= 0.5 && s.idle_count >= 0.5 * std::max(1, s.span);
        j["moves"] = s.moves;
        j["replan_rate"] = s.replan_rate;
        j["reveals"] = s.reveals;
        j["progress_rate"] = s.progress_rate;
        j["idle_pref_rate"] = s.idle_pref_rate;
        j["idle_count"] = s.idle_count;
    } else if (m == "hypervigilance") {
        fired = s.planning_execution_ratio > c.theta_pe && s.near_tie_rate >= c.theta_tie && low_progress;
        j["planning_execution_ratio"] = num(s.planning_execution_ratio);
        j["near_tie_rate"] = s.near_tie_rate;
        j["progress_rate"] = s.progress_rate;
    } else if (m == "futile_search") {
        fired = low_progress && s.meander_index >= c.theta_meander && std::isfinite(s.rho_energy) &&
                s.rho_energy - 1.0 > 0.0;
        j["progress_rate"] = s.progress_rate;
        j["meander_index"] = s.meander_index;
        j["rho_energy"] = num(s.rho_energy);
    } else if (m == "belief_incoherence") {
        fired = s.first_step_disagreement > c.theta_mis && s.mismatch_run >= c.L_run && s.rationale_gap >= c.delta_r;
        j["first_step_disagreement"] = s.first_step_disagreement;
        j["mismatch_run"] = s.mismatch_run;
        j["rationale_gap"] = s.rationale_gap;
    } else if (m == "tiebreak_thrash") {
        fired = s.step1_flip_run >= c.L_run && s.near_tie_rate >= c.theta_tie && low_progress;
        j["step1_flip_run"] = s.step1_flip_run;
        j["near_tie_rate"] = s.near_tie_rate;
        j["progress_rate"] = s.progress_rate;
    } else if (m == "corridor_thrash") {
        fired = s.corridor_alternations >= c.theta_alt && s.near_tie_rate >= c.theta_tie &&
                s.penetration_depth < c.D_min && low_progress;
        j["corridor_alternations"] = s.corridor_alternations;
        j["near_tie_rate"] = s.near_tie_rate;
        j["penetration_depth"] = s.penetration_depth;
        j["progress_rate"] = s.progress_rate;
    } else if (m == "optimality_compulsion") {
        double slack = std::max(2.0, 0.2 * s.baseline_arrival);
        fired = s.replan_rate >= c.theta_replan && s.median_improvement_per_replan < s.delta &&
                s.arrival > s.baseline_arrival + slack;
        j["replan_rate"] = s.replan_rate;
        j["median_improvement_per_replan"] = s.median_improvement_per_replan;
        j["delta"] = s.delta;
        j["arrival"] = num(s.arrival);
        j["baseline_arrival"] = s.baseline_arrival;
    } else if (m == "metric_mismatch") {
        fired = s.rho_run >= c.L_run && s.consistency_fail;
        j["rho_run"] = s.rho_run;
        j["rho_energy"] = num(s.rho_energy);
        j["slip_count"] = s.slip_count;
        j["consistency_fail"] = s.consistency_fail;
    } else if (m == "policy_oscillation") {
        fired = s.policy_flip_count >= c.theta_pflip && s.weight_delta_correlation > s.reveal_correlation &&
                s.weight_delta_correlation >= 0.5 && low_progress;
        j["policy_flip_count"] = s.policy_flip_count;
        j["weight_delta_correlation"] = s.weight_delta_correlation;
        j["reveal_correlation"] = s.reveal_correlation;
        j["progress_rate"] = s.progress_rate;
    } else if (m == "myopic_pingpong") {
        fired = s.reversals >= c.theta_reversals && s.reversal_reveal_cooccurrence > 0.5 &&
                s.frontier_advance < c.theta_frontier && low_progress;
        j["reversals"] = s.reversals;
        j["reversal_reveal_cooccurrence"] = s.reversal_reveal_cooccurrence;
        j["frontier_advance"] = s.frontier_advance;
        j["progress_rate"] = s.progress_rate;
    } else if (m == "exploration_paralysis") {
        fired = std::isfinite(s.frontier_visit_rate) && s.frontier_visit_rate <= c.theta_visit &&
                s.hunger_rise > 0.0 && s.replan_rate >= c.theta_replan && s.idle_pref_rate >= 0.5 &&
                s.unknown_cells > 0;
        j["frontier_visit_rate"] = num(s.frontier_visit_rate);
        j["hunger_rise"] = s.hunger_rise;
        j["replan_rate"] = s.replan_rate;
        j["idle_pref_rate"] = s.idle_pref_rate;
        j["unknown_cells"] = s.unknown_cells;
    } else {
        throw std::invalid_argument("unknown modality: " + m);
    }
    if (out) *out = std::move(j);
    return fired;
}

namespace {

std::vector<std::pair<int, int>> windows(int n, int H) {
    std::vector<std::pair<int, int>> w;
    if (n - 1 <= H) {
        w.push_back({0, n - 1});
        return w;
    }
    for (int a = 0; a + H <= n - 1; ++a) w.push_back({a, a + H});
    return w;
}

}  // namespace

std::vector<DetectorReport> detect_all(const Trace& t, const DetectorConfig& cfg) {
    validate(cfg);
    if (t.records.empty()) throw std::invalid_argument("empty trace");
    std::vector<DetectorReport> out;
    for (const char* m : kModalities) out.push_back({m, false, 0, 0, {}});
    auto ws = windows(static_cast<int>(t.records.size()), cfg.H);
    std::vector<bool> done(out.size(), false);
    for (auto [a, b] : ws) {
        WindowStats s = window_stats(t, a, b, cfg);
        for (size_t k = 0; k < out.size(); ++k) {
            if (done[k]) continue;
            nlohmann::ordered_json st;
            bool f = predicate(out[k].modality, s, cfg, &st);
            if (f || (a == ws.front().first)) {
                out[k].fired = f;
                out[k].window_a = s.a;
                out[k].window_b = s.b;
                out[k].stats = std::move(st);
            }
            if (f) done[k] = true;
        }
        if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    }
    return out;
}

DetectorReport detect(const std::string& modality, const Trace& t, const DetectorConfig& cfg) {
    if (modality_index(modality) < 0) throw std::invalid_argument("unknown modality: " + modality);
    for (auto& r : detect_all(t, cfg))
        if (r.modality == modality) return r;
    throw std::logic_error("unreachable");
}

nlohmann::ordered_json report_to_json(const DetectorReport& r) {
    nlohmann::ordered_json j;
    j["modality"] = r.modality;
    j["fired"] = r.fired;
    j["window"] = {r.window_a, r.window_b};
    j["stats"] = r.stats.is_null() ? nlohmann::ordered_json::object() : r.stats;
    return j;
}

nlohmann::ordered_json reports_to_json(const std::vector<DetectorReport>& rs) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& r : rs) a.push_back(report_to_json(r));
    return a;
}

std::vector<std::string> fired_modalities(const std::vector<DetectorReport>& rs) {
    std::vector<std::string> v;
    for (const auto& r : rs)
        if (r.fired) v.push_back(r.modality);
    return v;
}

int satisficing_arrival(const WorldSpec& spec, std::uint64_t seed) {
    GovernorConfig g = governor_preset("off");
    g.enabled = true;
    g.levers.accept_margin = true;
    Trace t = run_episode(spec, g, seed);
    return static_cast<int>(t.records.size());
}

DetectorConfig with_paired_baseline(DetectorConfig cfg, const WorldSpec& spec, std::uint64_t seed) {
    if (!cfg.baseline_arrival) cfg.baseline_arrival = satisficing_arrival(spec, seed);
    return cfg;
}

}  // namespace neurosis
