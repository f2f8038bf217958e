#include "neurosis/governor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neurosis {

std::array<bool*, kLeverCount> lever_slots(Levers& l) {
    return {&l.commit_near_tie, &l.accept_margin,      &l.tabu,      &l.min_step,    &l.idle_tax,
            &l.pause_budget,    &l.detour_budget,      &l.fusion,    &l.heading_hysteresis,
            &l.canonical_tiebreak, &l.commit,          &l.calibration, &l.smoothing, &l.hysteresis,
            &l.reversal_cost,   &l.frontier_bonus,     &l.throttle,  &l.visit_penalty};
}

std::array<const char*, kLeverCount> lever_names() {
    return {"commit_near_tie", "accept_margin",  "tabu",        "min_step",   "idle_tax",
            "pause_budget",    "detour_budget",  "fusion",      "heading_hysteresis",
            "canonical_tiebreak", "commit",      "calibration", "smoothing",  "hysteresis",
            "reversal_cost",   "frontier_bonus", "throttle",    "visit_penalty"};
}

void validate(const GovernorConfig& c) {
    auto fail = [](const char* m) { throw std::invalid_argument(m); };
    if (!(c.beta > 1.0)) fail("beta must be > 1");
    if (!(c.theta_plus > c.theta_minus)) fail("theta_plus must exceed theta_minus");
    if (!(c.alpha_ema > 0.0 && c.alpha_ema <= 1.0)) fail("alpha_ema must lie in (0,1]");
    if (!(c.fusion_alpha >= 0.0 && c.fusion_alpha <= 1.0)) fail("fusion_alpha must lie in [0,1]");
    if (c.K < 0 || c.tau < 0 || c.B_pause < 0 || c.B_detour < 0 || c.T_idle < 0 || c.tabu_len < 0 || c.L_cal < 1 ||
        c.detour_window < 1)
        fail("budgets must be >= 0");
    for (double v : {c.Delta, c.S_switch, c.Q_improve, c.lambda_idle, c.gamma_quota, c.idle_tax_rate, c.visit_penalty,
                     c.frontier_bonus, c.reversal_cost, c.eps_cal})
        if (!(std::isfinite(v) && v >= 0.0)) fail("margins must be finite and >= 0");
}

GovernorConfig governor_off() {
    GovernorConfig g;
    g.enabled = false;
    g.name = "off";
    return g;
}

GovernorConfig governor_preset(const std::string& name) {
    GovernorConfig g;
    g.name = name;
    Levers& L = g.levers;
    if (name == "off") return governor_off();
    if (name == "flipflop") {
        L.commit_near_tie = L.canonical_tiebreak = true;
    } else if (name == "plan_churn") {
        L.accept_margin = L.commit = L.throttle = true;
        g.S_switch = 0.1;
    } else if (name == "perseveration") {
        L.tabu = true;
        g.tabu_len = 1;
    } else if (name == "paralysis") {
        L.min_step = L.idle_tax = L.commit = true;
    } else if (name == "hypervigilance") {
        L.pause_budget = L.commit = true;
    } else if (name == "futile_search") {
        L.detour_budget = L.commit = true;
    } else if (name == "belief_incoherence") {
        L.fusion = true;
    } else if (name == "tiebreak_thrash") {
        L.heading_hysteresis = L.canonical_tiebreak = true;
    } else if (name == "corridor_thrash") {
        L.commit_near_tie = L.commit = true;
        g.K = 4;
    } else if (name == "optimality_compulsion") {
        L.accept_margin = true;
        g.S_switch = 0.1;
    } else if (name == "metric_mismatch") {
        L.calibration = true;
    } else if (name == "policy_oscillation") {
        L.smoothing = L.hysteresis = L.commit = true;
    } else if (name == "myopic_pingpong") {
        L.reversal_cost = L.commit = true;
    } else if (name == "exploration_paralysis") {
        L.frontier_bonus = L.min_step = L.idle_tax = L.commit = true;
    } else if (name == "default") {
        for (bool* b : lever_slots(L)) *b = true;
        g.S_switch = 0.1;
    } else {
        throw std::invalid_argument("unknown governor preset: " + name);
    }
    return g;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> v{"off", "default"};
    for (const char* m : kModalities) v.push_back(m);
    return v;
}

nlohmann::ordered_json governor_to_json(const GovernorConfig& c) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["enabled"] = c.enabled;
    j["K"] = c.K;
    j["tau"] = c.tau;
    j["Delta"] = c.Delta;
    j["beta"] = c.beta;
    j["B_pause"] = c.B_pause;
    j["B_detour"] = c.B_detour;
    j["detour_window"] = c.detour_window;
    j["T_idle"] = c.T_idle;
    j["lambda_idle"] = c.lambda_idle;
    j["gamma_quota"] = c.gamma_quota;
    j["theta_minus"] = c.theta_minus;
    j["theta_plus"] = c.theta_plus;
    j["alpha_ema"] = c.alpha_ema;
    j["S_switch"] = c.S_switch;
    j["Q_improve"] = c.Q_improve;
    j["tabu_len"] = c.tabu_len;
    j["idle_tax_rate"] = c.idle_tax_rate;
    j["visit_penalty"] = c.visit_penalty;
    j["frontier_bonus"] = c.frontier_bonus;
    j["fusion_alpha"] = c.fusion_alpha;
    j["veto_risk"] = c.veto_risk;
    j["reversal_cost"] = c.reversal_cost;
    j["L_cal"] = c.L_cal;
    j["eps_cal"] = c.eps_cal;
    j["safety_risk"] = c.safety_risk;
    nlohmann::ordered_json lv;
    Levers l = c.levers;
    auto slots = lever_slots(l);
    auto names = lever_names();
    for (int i = 0; i < kLeverCount; ++i) lv[names[i]] = *slots[i];
    j["levers"] = lv;
    return j;
}

GovernorConfig governor_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw std::invalid_argument("governor config must be an object");
    GovernorConfig c;
    auto names = lever_names();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "name") c.name = v.get<std::string>();
            else if (k == "enabled") c.enabled = v.get<bool>();
            else if (k == "K") c.K = v.get<int>();
            else if (k == "tau") c.tau = v.get<int>();
            else if (k == "Delta") c.Delta = v.get<double>();
            else if (k == "beta") c.beta = v.get<double>();
            else if (k == "B_pause") c.B_pause = v.get<int>();
            else if (k == "B_detour") c.B_detour = v.get<int>();
            else if (k == "detour_window") c.detour_window = v.get<int>();
            else if (k == "T_idle") c.T_idle = v.get<int>();
            else if (k == "lambda_idle") c.lambda_idle = v.get<double>();
            else if (k == "gamma_quota") c.gamma_quota = v.get<double>();
            else if (k == "theta_minus") c.theta_minus = v.get<double>();
            else if (k == "theta_plus") c.theta_plus = v.get<double>();
            else if (k == "alpha_ema") c.alpha_ema = v.get<double>();
            else if (k == "S_switch") c.S_switch = v.get<double>();
            else if (k == "Q_improve") c.Q_improve = v.get<double>();
            else if (k == "tabu_len") c.tabu_len = v.get<int>();
            else if (k == "idle_tax_rate") c.idle_tax_rate = v.get<double>();
            else if (k == "visit_penalty") c.visit_penalty = v.get<double>();
            else if (k == "frontier_bonus") c.frontier_bonus = v.get<double>();
            else if (k == "fusion_alpha") c.fusion_alpha = v.get<double>();
            else if (k == "veto_risk") c.veto_risk = v.get<double>();
            else if (k == "reversal_cost") c.reversal_cost = v.get<double>();
            else if (k == "L_cal") c.L_cal = v.get<int>();
            else if (k == "eps_cal") c.eps_cal = v.get<double>();
            else if (k == "safety_risk") c.safety_risk = v.get<double>();
            else if (k == "levers") {
                auto slots = lever_slots(c.levers);
                for (auto lt = v.begin(); lt != v.end(); ++lt) {
                    int idx = -1;
                    for (int i = 0; i < kLeverCount; ++i)
                        if (lt.key() == names[i]) idx = i;
                    if (idx < 0) throw std::invalid_argument("unknown lever: " + lt.key());
                    *slots[idx] = lt.value().get<bool>();
                }
            } else
                throw std::invalid_argument("unknown governor field: " + k);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument("governor field has the wrong type: " + k);
        }
    }
    validate(c);
    return c;
}

const char* override_name(OverrideReason r) {
    switch (r) {
        case OverrideReason::None: return "none";
        case OverrideReason::SafetyBreach: return "SafetyBreach";
        case OverrideReason::LargeGain: return "LargeGain";
        case OverrideReason::NovelObservation: return "NovelObservation";
    }
    return "none";
}

const char* decision_name(DecisionLabel d) {
    switch (d) {
        case DecisionLabel::Off: return "off";
        case DecisionLabel::Committed: return "committed";
        case DecisionLabel::Accept: return "accept";
        case DecisionLabel::Pause: return "pause";
        case DecisionLabel::Forced: return "forced";
    }
    return "off";
}

bool accept_plan(double c_new, double c_cur, double Delta, double S_switch) {
    return c_new + S_switch <= c_cur - Delta + 1e-12;
}

OverrideReason override_check(const Proposal& p, const Commitment& c, const GovernorConfig& cfg) {
    if (!c.active()) return OverrideReason::None;
    if (p.commit_prefix_risk > cfg.safety_risk) return OverrideReason::SafetyBreach;
    if (std::isfinite(p.commit_cost) && p.c1 <= p.commit_cost - cfg.beta * cfg.Delta) return OverrideReason::LargeGain;
    if (p.commit_invalidated) return OverrideReason::NovelObservation;
    return OverrideReason::None;
}

SmoothResult smooth_and_hysteresis(double raw_w, double prev_smoothed, const std::string& current_class,
                                   double theta_minus, double theta_plus, double alpha_ema, bool hysteresis) {
    SmoothResult r{alpha_ema * raw_w + (1.0 - alpha_ema) * prev_smoothed, current_class};
    if (hysteresis) {
        if (r.smoothed > theta_plus)
            r.policy_class = "safe_long";
        else if (r.smoothed < theta_minus)
            r.policy_class = "risky_short";
    } else {
        r.policy_class = r.smoothed > 0.5 * (theta_minus + theta_plus) ? "safe_long" : "risky_short";
    }
    return r;
}

double calibrate(double alpha_hat, double rho, int persistence, int L_run) {
    if (persistence < L_run) return alpha_hat;
    return std::clamp(alpha_hat * rho, 0.2, 5.0);
}

namespace {

std::optional<double> cost_of(const std::vector<Alternative>& alts, Dir d) {
    for (const auto& a : alts)
        if (a.first == d) return a.cost;
    return std::nullopt;
}

bool within_band(const Proposal& p, Dir d) {
    auto c = cost_of(p.alts, d);
    return c && near_tie(p.c1, *c, p.eta);
}

std::optional<Dir> best_safe(const Proposal& p, const GovernorConfig& cfg) {
    for (size_t i = 0; i < p.alts.size(); ++i)
        if (i >= p.alt_risk.size() || p.alt_risk[i] <= cfg.safety_risk) return p.alts[i].first;
    return std::nullopt;
}

}  // namespace

Decision govern(const Proposal& p, Commitment& c, const GovernorConfig& cfg) {
    Decision d;
    if (!cfg.enabled) {
        d.action = p.base;
        d.dir = p.base_dir;
        return d;
    }
    const Levers& L = cfg.levers;

    if (c.active()) {
        d.override_reason = override_check(p, c, cfg);
        if (d.override_reason != OverrideReason::None) c.clear();
    }

    BaseAction base = p.base;
    std::optional<Dir> dir = p.base_dir;

    // Fusion with a veto on the local module's dangerous cells.
    if (L.fusion && p.global_first) {
        std::optional<Dir> pick;
        double best = kInf;
        for (auto cand : {p.global_first, p.local_first}) {
            if (!cand) continue;
            auto cg = cost_of(p.alts, *cand);
            auto cl = cost_of(p.local_alts, *cand);
            if (!cg || !cl) continue;
            double f = fuse(*cg, *cl, cfg.fusion_alpha);
            if (!pick || f < best) {
                pick = cand;
                best = f;
            }
        }
        if (!pick) pick = p.global_first;
        if (base == BaseAction::Move) dir = pick;
    }

    std::optional<Dir> banned;
    if (L.tabu && c.tabu_dir && p.tick <= c.tabu_expiry) banned = c.tabu_dir;
    if (banned && base == BaseAction::Move && dir == banned) {
        const auto& list = (p.controller == "local" && !L.fusion) ? p.local_alts : p.alts;
        for (const auto& a : list)
            if (a.first != *banned) {
                dir = a.first;
                break;
            }
    }

    if (!c.active() && L.accept_margin && p.has_incumbent && p.incumbent_first &&
        (base == BaseAction::Adopt ||
         (base == BaseAction::Move && (dir != p.incumbent_first || p.plan_differs)))) {
        if (!accept_plan(p.c1, p.incumbent_cost, cfg.Delta, cfg.S_switch) && p.incumbent_first != banned) {
            d.action = BaseAction::Move;
            d.dir = p.incumbent_first;
            d.use_incumbent = true;
            d.label = DecisionLabel::Committed;
            c.pauses_used = 0;
            return d;
        }
    }

    if (c.active()) {
        Dir next = c.steps.front();
        if (next != banned) {
            d.action = BaseAction::Move;
            d.dir = next;
            d.use_commitment = true;
            d.label = DecisionLabel::Committed;
            c.pauses_used = 0;
            return d;
        }
        c.clear();
    }

    if (base == BaseAction::Move && p.near_tie) {
        if (L.heading_hysteresis && p.heading && within_band(p, *p.heading)) dir = p.heading;
        if (L.commit_near_tie && p.last_choice && within_band(p, *p.last_choice)) {
            dir = p.last_choice;
            d.start_commit = true;
        }
    }

    if (base == BaseAction::Pause && L.pause_budget) {
        if (c.pauses_used >= cfg.B_pause && !p.alts.empty()) {
            base = BaseAction::Move;
            dir = p.alts.front().first;
            d.label = DecisionLabel::Forced;
            d.start_commit = true;
        }
    }

    if (base == BaseAction::Idle) {
        double ci = p.c_idle + (L.idle_tax ? cfg.idle_tax_rate * p.stationary_ticks : 0.0);
        if (ci > p.c_move + cfg.lambda_idle && !p.alts.empty()) {
            base = BaseAction::Move;
            dir = p.alts.front().first;
        }
    }

    bool still = base == BaseAction::Idle || base == BaseAction::Pause || base == BaseAction::None;
    if (L.min_step && still && p.stationary_ticks >= cfg.T_idle && p.safe_neighbour) {
        if (auto s = best_safe(p, cfg)) {
            base = BaseAction::Move;
            dir = s;
            d.label = DecisionLabel::Forced;
            d.start_commit = true;
        }
    }

    if (base == BaseAction::Move && L.commit) d.start_commit = true;

    d.action = base;
    d.dir = (base == BaseAction::Move || base == BaseAction::Adopt) ? dir : std::nullopt;
    if (d.label != DecisionLabel::Forced)
        d.label = (base == BaseAction::Idle || base == BaseAction::Pause) ? DecisionLabel::Pause : DecisionLabel::Accept;
    if (base == BaseAction::Pause)
        ++c.pauses_used;
    else if (base == BaseAction::Move)
        c.pauses_used = 0;
    return d;
}

}  // namespace neurosis
