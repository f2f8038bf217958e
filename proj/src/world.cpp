#include "neurosis/world.hpp"

#include <algorithm>
#include <cmath>

namespace neurosis {

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Open: return "open";
        case Kind::Rock: return "rock";
        case Kind::Social: return "social";
        case Kind::Food: return "food";
        case Kind::Risk: return "risk";
        case Kind::Ice: return "ice";
        case Kind::Mirage: return "mirage";
    }
    return "open";
}

std::optional<Kind> kind_from_name(const std::string& s) {
    static const std::pair<const char*, Kind> table[] = {
        {"open", Kind::Open}, {"rock", Kind::Rock}, {"social", Kind::Social}, {"food", Kind::Food},
        {"risk", Kind::Risk}, {"ice", Kind::Ice},   {"mirage", Kind::Mirage}};
    for (auto& [name, k] : table)
        if (s == name) return k;
    return std::nullopt;
}

void validate_cell(const Cell& c) {
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(c.meal)) throw WorldError("meal must be >= 0");
    if (!finite_nonneg(c.risk)) throw WorldError("risk must be >= 0");
    if (!finite_nonneg(c.lure)) throw WorldError("lure must be >= 0");
    if (!(c.slip_prob >= 0.0 && c.slip_prob <= 1.0)) throw WorldError("slip_prob must lie in [0,1]");
    if (!(std::isfinite(c.energy_factor) && c.energy_factor >= 1.0)) throw WorldError("energy_factor must be >= 1");
}

Grid::Grid(const WorldSpec& spec) : spec_(spec), w_(spec.width), h_(spec.height) {
    if (w_ <= 0 || h_ <= 0) throw WorldError("zero dimensions");
    if (spec.max_ticks <= 0) throw WorldError("max_ticks must be positive");
    if (spec.visibility.mode == VisibilityModel::Mode::LV && spec.visibility.r < 1)
        throw WorldError("visibility radius must be >= 1");
    cells_.assign(static_cast<size_t>(w_) * h_, Cell{});
    for (const auto& [p, c] : spec.cells) {
        if (!in_bounds(p)) throw WorldError("cell outside bounds");
        validate_cell(c);
        cells_[index(p)] = c;
    }
    if (!in_bounds(spec.start)) throw WorldError("start outside bounds");
    if (!at(spec.start).passable()) throw WorldError("start impassable");
    if (spec.goal) {
        if (!in_bounds(*spec.goal)) throw WorldError("goal outside bounds");
        if (!at(*spec.goal).passable()) throw WorldError("goal impassable");
    }
}

const Cell& Grid::at(Pos p) const {
    static const Cell kRock = Cell::rock();
    if (!in_bounds(p)) return kRock;
    return cells_[index(p)];
}

int Grid::passable_count() const {
    return static_cast<int>(std::count_if(cells_.begin(), cells_.end(), [](const Cell& c) { return c.passable(); }));
}

Grid build_world(const WorldSpec& spec) { return Grid(spec); }

std::vector<Pos> visible_set(const Grid& grid, Pos pos, const VisibilityModel& model) {
    std::vector<Pos> out;
    if (model.mode == VisibilityModel::Mode::GV) {
        out.reserve(grid.size());
        for (int x = 0; x < grid.width(); ++x)
            for (int y = 0; y < grid.height(); ++y) out.push_back({x, y});
        return out;
    }
    int r = model.r;
    for (int x = std::max(0, pos.x - r); x <= std::min(grid.width() - 1, pos.x + r); ++x)
        for (int y = std::max(0, pos.y - r); y <= std::min(grid.height() - 1, pos.y + r); ++y) out.push_back({x, y});
    return out;
}

int modality_index(const std::string& id) {
    for (size_t i = 0; i < kModalities.size(); ++i)
        if (id == kModalities[i]) return static_cast<int>(i);
    return -1;
}

namespace {

void put(WorldSpec& s, Pos p, Cell c) {
    if (c.kind == Kind::Open)
        s.cells.erase(p);
    else
        s.cells[p] = c;
}

void fill(WorldSpec& s, int x0, int y0, int x1, int y1, Cell c) {
    for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y) put(s, {x, y}, c);
}

std::vector<Pos> span(int x0, int y0, int x1, int y1) {
    std::vector<Pos> v;
    for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y) v.push_back({x, y});
    return v;
}

WorldSpec base(const std::string& id, int w, int h, Pos start, Pos goal) {
    WorldSpec s;
    s.id = id;
    s.width = w;
    s.height = h;
    s.start = start;
    s.goal = goal;
    s.max_ticks = 60;
    s.proceed_cue_tick = 0;
    return s;
}

// Two symmetric routes around a central rock; the planner penalises
// whichever first step it picked last time, so the pick alternates.
WorldSpec flipflop() {
    auto s = base("flipflop", 7, 4, {0, 0}, {6, 3});
    put(s, {3, 1}, Cell::rock());
    s.seasoning.recency_penalty = 0.05;
    s.seasoning.turn_in_place = true;
    return s;
}

WorldSpec plan_churn() {
    auto s = base("plan_churn", 8, 8, {0, 0}, {7, 7});
    s.seasoning.jitter = 0.01;
    return s;
}

// Pocket: S -> B -> A with A's neighbours {B 0.3, 0.9, 0.9} and B's
// neighbours {S 0.4, 0.4, A}. Pure local fear-minimisation orbits A,B.
WorldSpec perseveration() {
    auto s = base("perseveration", 7, 3, {0, 1}, {6, 1});
    fill(s, 0, 0, 6, 2, Cell::rock());
    put(s, {0, 1}, Cell::risk_band(0.4));
    put(s, {1, 1}, Cell::risk_band(0.3));
    put(s, {2, 1}, Cell::risk_band(0.1));
    put(s, {2, 0}, Cell::risk_band(0.9));
    put(s, {1, 2}, Cell::risk_band(0.4));
    put(s, {3, 1}, Cell::risk_band(0.9));
    put(s, {4, 1}, Cell::risk_band(0.2));
    put(s, {5, 1}, Cell::risk_band(0.1));
    put(s, {6, 1}, Cell::open());
    s.seasoning.controller = "local";
    s.seasoning.local_goal_term = false;
    s.seasoning.weights = {0.0, 1.0, 0.0, 1.0};
    return s;
}

// Two avenues either side of a rock row; the lower one is 0.05 dearer,
// and standing still is cheap while the choice is a near tie.
WorldSpec avenues(const std::string& id) {
    auto s = base(id, 7, 3, {0, 1}, {6, 1});
    fill(s, 1, 1, 5, 1, Cell::rock());
    put(s, {3, 0}, Cell::risk_band(0.05));
    s.seasoning.corridor_a = span(1, 2, 5, 2);
    s.seasoning.corridor_b = span(1, 0, 5, 0);
    return s;
}

WorldSpec paralysis() {
    auto s = avenues("paralysis");
    s.seasoning.deliberation_cost = 0.5;
    s.seasoning.idle_cost = 0.1;
    return s;
}

WorldSpec hypervigilance() {
    auto s = avenues("hypervigilance");
    s.seasoning.pause_eta = 0.02;
    return s;
}

WorldSpec futile_search() {
    auto s = base("futile_search", 7, 4, {0, 0}, {6, 3});
    fill(s, 2, 0, 2, 3, Cell::mirage(0.5));
    fill(s, 4, 0, 4, 3, Cell::mirage(0.5));
    s.seasoning.mirage_pull = 6.0;
    s.seasoning.mirage_refractory = 12;
    return s;
}

// The local module ignores the risk block and the goal. Authority
// alternates, so next to the goal the local step undoes the global one.
WorldSpec belief_incoherence() {
    auto s = base("belief_incoherence", 7, 4, {0, 0}, {6, 0});
    fill(s, 1, 0, 4, 1, Cell::risk_band(1.0));
    s.seasoning.controller = "alternate";
    s.seasoning.local_risk_scale = 0.0;
    s.seasoning.local_goal_term = false;
    return s;
}

WorldSpec tiebreak_thrash() {
    auto s = base("tiebreak_thrash", 7, 4, {0, 0}, {6, 2});
    put(s, {2, 1}, Cell::rock());
    put(s, {1, 2}, Cell::rock());
    put(s, {3, 2}, Cell::rock());
    s.seasoning.rotate_canon = true;
    s.seasoning.turn_in_place = true;
    s.seasoning.initial_heading = Dir::E;
    return s;
}

WorldSpec corridor_thrash() {
    auto s = base("corridor_thrash", 7, 4, {0, 1}, {6, 1});
    fill(s, 1, 1, 5, 1, Cell::rock());
    fill(s, 0, 3, 6, 3, Cell::rock());
    fill(s, 1, 0, 5, 0, Cell::risk_band(0.01));
    s.seasoning.corridor_a = span(1, 2, 5, 2);
    s.seasoning.corridor_b = span(1, 0, 5, 0);
    s.seasoning.recency_penalty = 0.06;
    s.seasoning.turn_in_place = true;
    return s;
}

WorldSpec optimality_compulsion() {
    auto s = base("optimality_compulsion", 7, 3, {0, 1}, {6, 1});
    put(s, {3, 1}, Cell::rock());
    s.seasoning.jitter = 0.01;
    s.seasoning.accept_nonworse = true;
    return s;
}

WorldSpec metric_mismatch() {
    auto s = base("metric_mismatch", 7, 4, {0, 2}, {6, 2});
    fill(s, 0, 0, 6, 1, Cell::rock());
    fill(s, 0, 3, 6, 3, Cell::rock());
    fill(s, 1, 2, 5, 2, Cell::ice(0.5, 2.0));
    s.seasoning.weights = {1.0, 1.0, 1.0, 1.0};
    return s;
}

// Risky short row next to a safe long row; a threat cue at the fork
// pumps the risk weight back and forth across the switch point.
WorldSpec policy_oscillation() {
    auto s = base("policy_oscillation", 7, 4, {0, 1}, {6, 1});
    fill(s, 1, 0, 5, 1, Cell::rock());
    fill(s, 1, 2, 3, 2, Cell::risk_band(0.7));
    s.seasoning.weights = {1.0, 0.5, 0.0, 1.0};
    s.seasoning.turn_in_place = true;
    s.seasoning.policy_classes = true;
    s.seasoning.threat = {{{0, 2}}, 1, 2, 0.6, 0.3, 0.5, 1.5};
    return s;
}

WorldSpec myopic_pingpong() {
    auto s = base("myopic_pingpong", 7, 4, {1, 1}, {6, 2});
    put(s, {2, 0}, Cell::rock());
    put(s, {2, 1}, Cell::rock());
    put(s, {2, 2}, Cell::rock());
    put(s, {2, 3}, Cell::risk_band(0.6));
    s.visibility = {VisibilityModel::Mode::LV, 1};
    s.seasoning.weights = {1.0, 4.0, 0.0, 1.0};
    s.seasoning.belief_ttl = 0;
    return s;
}

WorldSpec exploration_paralysis() {
    auto s = base("exploration_paralysis", 7, 3, {0, 1}, {6, 1});
    s.visibility = {VisibilityModel::Mode::LV, 1};
    s.seasoning.premapped = {{0, 0, 2, 2}};
    s.seasoning.uncertainty_penalty = 1.0;
    s.seasoning.stay_cost = 9.5;
    return s;
}

WorldSpec healthy() {
    auto s = base("healthy", 10, 10, {0, 0}, {9, 9});
    s.max_ticks = 60;
    return s;
}

// Two foods: the near one sits behind remembered bad experiences, the far
// one is clean. Large w_mem sends the agent to the far food.
WorldSpec phobia() {
    WorldSpec s;
    s.id = "phobia";
    s.width = 10;
    s.height = 10;
    s.start = {0, 0};
    s.max_ticks = 60;
    s.proceed_cue_tick = 0;
    put(s, {4, 0}, Cell::food(10.0));
    put(s, {0, 7}, Cell::food(10.0));
    s.seasoning.memory_seeds = {{{3, 0}, 1.0}, {{5, 0}, 1.0}, {{4, 1}, 1.0}};
    s.seasoning.weights = {1.0, 1.0, 0.0, 5.0};
    s.seasoning.homeostat = {12.0, 0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    s.seasoning.stop_on_meal = true;
    return s;
}

}  // namespace

WorldSpec canonical_scenario(const std::string& modality) {
    if (modality == "flipflop") return flipflop();
    if (modality == "plan_churn") return plan_churn();
    if (modality == "perseveration") return perseveration();
    if (modality == "paralysis") return paralysis();
    if (modality == "hypervigilance") return hypervigilance();
    if (modality == "futile_search") return futile_search();
    if (modality == "belief_incoherence") return belief_incoherence();
    if (modality == "tiebreak_thrash") return tiebreak_thrash();
    if (modality == "corridor_thrash") return corridor_thrash();
    if (modality == "optimality_compulsion") return optimality_compulsion();
    if (modality == "metric_mismatch") return metric_mismatch();
    if (modality == "policy_oscillation") return policy_oscillation();
    if (modality == "myopic_pingpong") return myopic_pingpong();
    if (modality == "exploration_paralysis") return exploration_paralysis();
    throw WorldError("unknown modality: " + modality);
}

WorldSpec named_scenario(const std::string& name) {
    if (name == "healthy") return healthy();
    if (name == "phobia") return phobia();
    return canonical_scenario(name);
}

std::vector<std::string> scenario_names() {
    std::vector<std::string> v(kModalities.begin(), kModalities.end());
    v.push_back("healthy");
    v.push_back("phobia");
    return v;
}

FoodState initial_food(const Grid& grid) {
    FoodState st;
    for (const auto& [p, c] : grid.spec().cells)
        if (c.kind == Kind::Food) st.food[p] = c;
    return st;
}

std::optional<Pos> respawn_food(const Grid& grid, FoodState& state, Pos eaten, Stream& rng) {
    if (!grid.spec().food_respawn) return std::nullopt;
    auto it = state.food.find(eaten);
    if (it == state.food.end()) throw WorldError("respawn on a cell without food");
    Cell meal = it->second;
    state.food.erase(it);
    std::vector<Pos> free;
    for (int y = 0; y < grid.height(); ++y)
        for (int x = 0; x < grid.width(); ++x) {
            Pos p{x, y};
            const Cell& c = grid.at(p);
            if (!c.passable() || p == grid.spec().start || p == eaten || state.food.count(p)) continue;
            if (c.kind != Kind::Open && c.kind != Kind::Food) continue;
            free.push_back(p);
        }
    if (free.empty()) {
        state.food[eaten] = meal;
        throw WorldError("no free cell for respawn");
    }
    Pos np = free[rng.below(free.size())];
    state.food[np] = meal;
    return np;
}

}  // namespace neurosis
