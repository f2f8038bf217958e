#include "neurosis/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace neurosis {

namespace {

const std::set<std::string> kRejectedStubs{"weather", "topography", "slopes", "terrain_familiarity"};

// Tracks which keys were consumed so leftovers can be reported.
class Obj {
public:
    Obj(const ojson& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw WorldError(where_ + ": expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

    void mark(const std::string& k) { used_.insert(k); }

    const ojson& raw(const std::string& k) {
        used_.insert(k);
        return j_.at(k);
    }

    template <class T>
    T get(const std::string& k, T def) {
        used_.insert(k);
        if (!has(k)) return def;
        try {
            return j_.at(k).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw WorldError(where_ + "." + k + ": wrong type");
        }
    }

    template <class T>
    T need(const std::string& k) {
        if (!has(k)) throw WorldError(where_ + ": missing " + k);
        return get<T>(k, T{});
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (kRejectedStubs.count(it.key())) throw WorldError(where_ + ": unsupported field " + it.key());
            if (!used_.count(it.key())) throw WorldError(where_ + ": unknown field " + it.key());
        }
    }

private:
    const ojson& j_;
    std::string where_;
    std::set<std::string> used_;
};

ojson pos_json(Pos p) { return ojson::array({p.x, p.y}); }

Pos pos_from(const ojson& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw WorldError(where + ": expected [x, y]");
    return {j[0].get<int>(), j[1].get<int>()};
}

ojson pos_list_json(const std::vector<Pos>& v) {
    ojson a = ojson::array();
    for (Pos p : v) a.push_back(pos_json(p));
    return a;
}

std::vector<Pos> pos_list_from(const ojson& j, const std::string& where) {
    if (!j.is_array()) throw WorldError(where + ": expected a list");
    std::vector<Pos> v;
    for (const auto& e : j) v.push_back(pos_from(e, where));
    return v;
}

ojson cell_json(Pos p, const Cell& c) {
    ojson j;
    j["x"] = p.x;
    j["y"] = p.y;
    j["kind"] = kind_name(c.kind);
    switch (c.kind) {
        case Kind::Food:
            j["meal"] = c.meal;
            j["poisonous"] = c.poisonous;
            break;
        case Kind::Risk: j["risk"] = c.risk; break;
        case Kind::Ice:
            j["slip_prob"] = c.slip_prob;
            j["energy_factor"] = c.energy_factor;
            break;
        case Kind::Mirage: j["lure"] = c.lure; break;
        default: break;
    }
    return j;
}

std::pair<Pos, Cell> cell_from(const ojson& j) {
    Obj o(j, "cell");
    Pos p{o.need<int>("x"), o.need<int>("y")};
    auto kind = kind_from_name(o.need<std::string>("kind"));
    if (!kind) throw WorldError("cell: unknown kind");
    Cell c;
    c.kind = *kind;
    switch (c.kind) {
        case Kind::Food:
            c.meal = o.get<double>("meal", 1.0);
            c.poisonous = o.get<bool>("poisonous", false);
            break;
        case Kind::Risk: c.risk = o.need<double>("risk"); break;
        case Kind::Ice:
            c.slip_prob = o.need<double>("slip_prob");
            c.energy_factor = o.get<double>("energy_factor", 1.0);
            break;
        case Kind::Mirage: c.lure = o.need<double>("lure"); break;
        default: break;
    }
    o.finish();
    validate_cell(c);
    return {p, c};
}

ojson threat_json(const ThreatSchedule& t) {
    ojson j;
    j["cues"] = pos_list_json(t.cues);
    j["radius"] = t.radius;
    j["period"] = t.period;
    j["spike"] = t.spike;
    j["decay"] = t.decay;
    j["w_min"] = t.w_min;
    j["w_max"] = t.w_max;
    return j;
}

ThreatSchedule threat_from(const ojson& j) {
    Obj o(j, "seasoning.threat");
    ThreatSchedule t;
    if (o.has("cues")) t.cues = pos_list_from(o.raw("cues"), "threat.cues");
    o.mark("cues");
    t.radius = o.get<int>("radius", t.radius);
    t.period = o.get<int>("period", t.period);
    t.spike = o.get<double>("spike", t.spike);
    t.decay = o.get<double>("decay", t.decay);
    t.w_min = o.get<double>("w_min", t.w_min);
    t.w_max = o.get<double>("w_max", t.w_max);
    o.finish();
    if (t.period < 1) throw WorldError("threat.period must be >= 1");
    if (t.w_max < t.w_min) throw WorldError("threat: w_max < w_min");
    return t;
}

ojson seasoning_json(const Seasoning& s) {
    ojson j;
    j["weights"] = weights_to_json(s.weights);
    ojson m;
    m["gamma"] = s.memory.gamma;
    m["rho"] = s.memory.rho;
    m["gen_radius"] = s.memory.gen_radius;
    m["falloff"] = s.memory.falloff;
    m["poison_severity"] = s.memory.poison_severity;
    m["nofood_severity"] = s.memory.nofood_severity;
    j["memory"] = m;
    ojson seeds = ojson::array();
    for (const auto& sd : s.memory_seeds) seeds.push_back(ojson{{"x", sd.p.x}, {"y", sd.p.y}, {"m", sd.m}});
    j["memory_seeds"] = seeds;
    ojson h;
    h["h0"] = s.homeostat.h0;
    h["H_star"] = s.homeostat.H_star;
    h["theta_h"] = s.homeostat.theta_h;
    h["dh"] = s.homeostat.dh;
    h["starve_at"] = std::isfinite(s.homeostat.starve_at) ? ojson(s.homeostat.starve_at) : ojson(nullptr);
    j["homeostat"] = h;
    j["base_energy"] = s.base_energy;
    j["poison_energy"] = s.poison_energy;
    j["replan_every_tick"] = s.replan_every_tick;
    j["stop_on_meal"] = s.stop_on_meal;
    j["controller"] = s.controller;
    j["local_goal_term"] = s.local_goal_term;
    j["local_risk_scale"] = s.local_risk_scale;
    j["jitter"] = s.jitter;
    j["jitter_cells"] = pos_list_json(s.jitter_cells);
    j["recency_penalty"] = s.recency_penalty;
    j["rotate_canon"] = s.rotate_canon;
    j["canon"] = s.canon.str();
    j["turn_in_place"] = s.turn_in_place;
    j["initial_heading"] = s.initial_heading ? ojson(dir_str(s.initial_heading)) : ojson(nullptr);
    j["deliberation_cost"] = s.deliberation_cost;
    j["idle_cost"] = s.idle_cost;
    j["tie_eta"] = s.tie_eta;
    j["stay_cost"] = s.stay_cost ? ojson(*s.stay_cost) : ojson(nullptr);
    j["pause_eta"] = s.pause_eta;
    j["accept_nonworse"] = s.accept_nonworse;
    j["mirage_pull"] = s.mirage_pull;
    j["mirage_refractory"] = s.mirage_refractory;
    j["threat"] = threat_json(s.threat);
    j["policy_classes"] = s.policy_classes;
    j["corridor_a"] = pos_list_json(s.corridor_a);
    j["corridor_b"] = pos_list_json(s.corridor_b);
    j["uncertainty_penalty"] = s.uncertainty_penalty;
    ojson rects = ojson::array();
    for (const auto& r : s.premapped) rects.push_back(ojson::array({r[0], r[1], r[2], r[3]}));
    j["premapped"] = rects;
    j["belief_ttl"] = s.belief_ttl;
    return j;
}

Seasoning seasoning_from(const ojson& j) {
    Obj o(j, "seasoning");
    Seasoning s;
    if (o.has("weights")) s.weights = weights_from_json(o.raw("weights"));
    o.mark("weights");
    if (o.has("memory")) {
        Obj m(o.raw("memory"), "seasoning.memory");
        s.memory.gamma = m.get<double>("gamma", s.memory.gamma);
        s.memory.rho = m.get<double>("rho", s.memory.rho);
        s.memory.gen_radius = m.get<int>("gen_radius", s.memory.gen_radius);
        s.memory.falloff = m.get<double>("falloff", s.memory.falloff);
        s.memory.poison_severity = m.get<double>("poison_severity", s.memory.poison_severity);
        s.memory.nofood_severity = m.get<double>("nofood_severity", s.memory.nofood_severity);
        m.finish();
        if (s.memory.gamma < 1.0) throw WorldError("memory.gamma must be >= 1");
        if (!(s.memory.rho >= 0.0 && s.memory.rho < 1.0)) throw WorldError("memory.rho must lie in [0,1)");
        if (s.memory.gen_radius < 0) throw WorldError("memory.gen_radius must be >= 0");
        if (!(s.memory.falloff > 0.0 && s.memory.falloff <= 1.0)) throw WorldError("memory.falloff must lie in (0,1]");
    }
    o.mark("memory");
    if (o.has("memory_seeds")) {
        for (const auto& e : o.raw("memory_seeds")) {
            Obj sd(e, "memory_seed");
            MemorySeed ms{{sd.need<int>("x"), sd.need<int>("y")}, sd.need<double>("m")};
            sd.finish();
            if (ms.m < 0) throw WorldError("memory seed must be >= 0");
            s.memory_seeds.push_back(ms);
        }
    }
    o.mark("memory_seeds");
    if (o.has("homeostat")) {
        Obj h(o.raw("homeostat"), "seasoning.homeostat");
        s.homeostat.h0 = h.get<double>("h0", s.homeostat.h0);
        s.homeostat.H_star = h.get<double>("H_star", s.homeostat.H_star);
        s.homeostat.theta_h = h.get<double>("theta_h", s.homeostat.theta_h);
        s.homeostat.dh = h.get<double>("dh", s.homeostat.dh);
        s.homeostat.starve_at = h.get<double>("starve_at", s.homeostat.starve_at);
        h.finish();
    }
    o.mark("homeostat");
    s.base_energy = o.get<double>("base_energy", s.base_energy);
    s.poison_energy = o.get<double>("poison_energy", s.poison_energy);
    s.replan_every_tick = o.get<bool>("replan_every_tick", s.replan_every_tick);
    s.stop_on_meal = o.get<bool>("stop_on_meal", s.stop_on_meal);
    s.controller = o.get<std::string>("controller", s.controller);
    if (s.controller != "global" && s.controller != "local" && s.controller != "alternate")
        throw WorldError("seasoning.controller must be global, local or alternate");
    s.local_goal_term = o.get<bool>("local_goal_term", s.local_goal_term);
    s.local_risk_scale = o.get<double>("local_risk_scale", s.local_risk_scale);
    s.jitter = o.get<double>("jitter", s.jitter);
    if (o.has("jitter_cells")) s.jitter_cells = pos_list_from(o.raw("jitter_cells"), "jitter_cells");
    o.mark("jitter_cells");
    s.recency_penalty = o.get<double>("recency_penalty", s.recency_penalty);
    s.rotate_canon = o.get<bool>("rotate_canon", s.rotate_canon);
    auto canon = Canon::parse(o.get<std::string>("canon", s.canon.str()));
    if (!canon) throw WorldError("seasoning.canon must be a permutation of NESW");
    s.canon = *canon;
    s.turn_in_place = o.get<bool>("turn_in_place", s.turn_in_place);
    if (o.has("initial_heading")) {
        auto str = o.get<std::string>("initial_heading", "");
        auto d = str.size() == 1 ? dir_from_char(str[0]) : std::nullopt;
        if (!d) throw WorldError("seasoning.initial_heading must be N, E, S or W");
        s.initial_heading = d;
    }
    o.mark("initial_heading");
    s.deliberation_cost = o.get<double>("deliberation_cost", s.deliberation_cost);
    s.idle_cost = o.get<double>("idle_cost", s.idle_cost);
    s.tie_eta = o.get<double>("tie_eta", s.tie_eta);
    if (o.has("stay_cost")) s.stay_cost = o.get<double>("stay_cost", 0.0);
    o.mark("stay_cost");
    s.pause_eta = o.get<double>("pause_eta", s.pause_eta);
    s.accept_nonworse = o.get<bool>("accept_nonworse", s.accept_nonworse);
    s.mirage_pull = o.get<double>("mirage_pull", s.mirage_pull);
    s.mirage_refractory = o.get<int>("mirage_refractory", s.mirage_refractory);
    if (o.has("threat")) s.threat = threat_from(o.raw("threat"));
    o.mark("threat");
    s.policy_classes = o.get<bool>("policy_classes", s.policy_classes);
    if (o.has("corridor_a")) s.corridor_a = pos_list_from(o.raw("corridor_a"), "corridor_a");
    o.mark("corridor_a");
    if (o.has("corridor_b")) s.corridor_b = pos_list_from(o.raw("corridor_b"), "corridor_b");
    o.mark("corridor_b");
    s.uncertainty_penalty = o.get<double>("uncertainty_penalty", s.uncertainty_penalty);
    if (o.has("premapped")) {
        for (const auto& r : o.raw("premapped")) {
            if (!r.is_array() || r.size() != 4) throw WorldError("premapped: expected [x0, y0, x1, y1]");
            s.premapped.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()});
        }
    }
    o.mark("premapped");
    s.belief_ttl = o.get<int>("belief_ttl", s.belief_ttl);
    o.finish();
    return s;
}

}  // namespace

ojson seasoning_to_json(const Seasoning& s) { return seasoning_json(s); }
Seasoning seasoning_from_json(const ojson& j) { return seasoning_from(j); }

ojson weights_to_json(const CostWeights& w) {
    ojson j;
    j["w_dist"] = w.w_dist;
    j["w_risk"] = w.w_risk;
    j["w_energy"] = w.w_energy;
    j["w_mem"] = w.w_mem;
    return j;
}

CostWeights weights_from_json(const ojson& j) {
    Obj o(j, "weights");
    CostWeights w;
    w.w_dist = o.get<double>("w_dist", w.w_dist);
    w.w_risk = o.get<double>("w_risk", w.w_risk);
    w.w_energy = o.get<double>("w_energy", w.w_energy);
    w.w_mem = o.get<double>("w_mem", w.w_mem);
    o.finish();
    for (double v : {w.w_dist, w.w_risk, w.w_energy, w.w_mem})
        if (!(std::isfinite(v) && v >= 0.0)) throw WorldError("weights must be finite and >= 0");
    return w;
}

ojson spec_to_json(const WorldSpec& spec) {
    ojson j;
    j["id"] = spec.id;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["start"] = pos_json(spec.start);
    j["goal"] = spec.goal ? pos_json(*spec.goal) : ojson(nullptr);
    ojson cells = ojson::array();
    for (const auto& [p, c] : spec.cells) cells.push_back(cell_json(p, c));
    j["cells"] = cells;
    ojson vis;
    vis["mode"] = spec.visibility.mode == VisibilityModel::Mode::GV ? "GV" : "LV";
    vis["r"] = spec.visibility.r;
    j["visibility"] = vis;
    j["food_respawn"] = spec.food_respawn;
    j["proceed_cue_tick"] = spec.proceed_cue_tick ? ojson(*spec.proceed_cue_tick) : ojson(nullptr);
    j["max_ticks"] = spec.max_ticks;
    j["seasoning"] = seasoning_json(spec.seasoning);
    return j;
}

WorldSpec spec_from_json(const ojson& j) {
    Obj o(j, "scenario");
    WorldSpec s;
    s.id = o.get<std::string>("id", "");
    s.width = o.need<int>("width");
    s.height = o.need<int>("height");
    s.start = pos_from(o.raw("start"), "start");
    if (o.has("goal")) s.goal = pos_from(o.raw("goal"), "goal");
    o.mark("goal");
    if (o.has("cells")) {
        for (const auto& c : o.raw("cells")) {
            auto [p, cell] = cell_from(c);
            if (s.cells.count(p)) throw WorldError("duplicate cell entry");
            if (cell.kind != Kind::Open) s.cells[p] = cell;
        }
    }
    o.mark("cells");
    if (o.has("visibility")) {
        Obj v(o.raw("visibility"), "visibility");
        auto mode = v.get<std::string>("mode", "GV");
        if (mode == "GV")
            s.visibility.mode = VisibilityModel::Mode::GV;
        else if (mode == "LV")
            s.visibility.mode = VisibilityModel::Mode::LV;
        else
            throw WorldError("visibility.mode must be GV or LV");
        s.visibility.r = v.get<int>("r", 1);
        v.finish();
        if (s.visibility.r < 1) throw WorldError("visibility radius must be >= 1");
    }
    o.mark("visibility");
    s.food_respawn = o.get<bool>("food_respawn", false);
    if (o.has("proceed_cue_tick")) s.proceed_cue_tick = o.get<int>("proceed_cue_tick", 0);
    o.mark("proceed_cue_tick");
    s.max_ticks = o.get<int>("max_ticks", s.max_ticks);
    if (o.has("seasoning")) s.seasoning = seasoning_from(o.raw("seasoning"));
    o.mark("seasoning");
    o.finish();
    Grid check(s);  // enforces the geometric invariants
    (void)check;
    return s;
}

WorldSpec parse_scenario(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw WorldError(std::string("scenario is not valid JSON: ") + e.what());
    }
    return spec_from_json(j);
}

std::string serialize_scenario(const WorldSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WorldError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw WorldError("cannot write " + path);
    out << text;
}

WorldSpec load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

void save_scenario(const WorldSpec& spec, const std::string& path) { write_file(path, serialize_scenario(spec)); }

}  // namespace neurosis
