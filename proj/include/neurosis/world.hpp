#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "neurosis/geometry.hpp"
#include "neurosis/rng.hpp"

namespace neurosis {

struct WorldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Kind { Open, Rock, Social, Food, Risk, Ice, Mirage };

const char* kind_name(Kind k);
std::optional<Kind> kind_from_name(const std::string& s);

struct Cell {
    Kind kind = Kind::Open;
    bool poisonous = false;
    double meal = 0.0;
    double risk = 0.0;
    double slip_prob = 0.0;
    double energy_factor = 1.0;
    double lure = 0.0;

    bool passable() const { return kind != Kind::Rock && kind != Kind::Social; }
    bool operator==(const Cell&) const = default;

    static Cell open() { return {}; }
    static Cell rock() { return {Kind::Rock}; }
    static Cell social() { return {Kind::Social}; }
    static Cell food(double meal, bool poison = false) {
        Cell c{Kind::Food};
        c.meal = meal;
        c.poisonous = poison;
        return c;
    }
    static Cell risk_band(double r) {
        Cell c{Kind::Risk};
        c.risk = r;
        return c;
    }
    static Cell ice(double slip, double factor) {
        Cell c{Kind::Ice};
        c.slip_prob = slip;
        c.energy_factor = factor;
        return c;
    }
    static Cell mirage(double lure) {
        Cell c{Kind::Mirage};
        c.lure = lure;
        return c;
    }
};

// Throws WorldError when a parameter is outside its domain.
void validate_cell(const Cell& c);

struct CostWeights {
    double w_dist = 1.0;
    double w_risk = 1.0;
    double w_energy = 0.0;
    double w_mem = 1.0;
    bool operator==(const CostWeights&) const = default;
};

struct VisibilityModel {
    enum class Mode { GV, LV } mode = Mode::GV;
    int r = 1;
    bool operator==(const VisibilityModel&) const = default;
};

struct ThreatSchedule {
    std::vector<Pos> cues;
    int radius = 1;
    int period = 1;
    double spike = 0.0;
    double decay = 1.0;
    double w_min = 0.0;
    double w_max = 0.0;
    bool enabled() const { return !cues.empty() && spike > 0.0; }
    bool operator==(const ThreatSchedule&) const = default;
};

struct MemorySeed {
    Pos p;
    double m = 0.0;
    bool operator==(const MemorySeed&) const = default;
};

struct MemoryParams {
    double gamma = 1.0;
    double rho = 0.0;
    int gen_radius = 0;
    double falloff = 0.5;
    double poison_severity = 1.0;
    double nofood_severity = 0.3;
    bool operator==(const MemoryParams&) const = default;
};

struct HomeostatParams {
    double h0 = 0.0;
    double H_star = 0.0;
    double theta_h = 0.0;
    double dh = 1.0;
    double starve_at = std::numeric_limits<double>::infinity();
    bool operator==(const HomeostatParams&) const = default;
};

// Per-scenario mechanics that provoke a modality. Everything numeric lives
// here so a scenario file is self-contained.
struct Seasoning {
    CostWeights weights;
    MemoryParams memory;
    std::vector<MemorySeed> memory_seeds;
    HomeostatParams homeostat;
    double base_energy = 1.0;
    double poison_energy = 2.0;
    bool replan_every_tick = true;
    bool stop_on_meal = true;

    std::string controller = "global";  // global | local | alternate
    bool local_goal_term = true;
    double local_risk_scale = 1.0;

    double jitter = 0.0;
    std::vector<Pos> jitter_cells;  // empty means every cell

    double recency_penalty = 0.0;
    bool rotate_canon = false;
    Canon canon;
    bool turn_in_place = false;
    std::optional<Dir> initial_heading;

    double deliberation_cost = 0.0;
    double idle_cost = 0.0;
    double tie_eta = 0.02;
    std::optional<double> stay_cost;
    double pause_eta = 0.0;
    bool accept_nonworse = false;

    double mirage_pull = 0.0;
    int mirage_refractory = 0;

    ThreatSchedule threat;
    bool policy_classes = false;
    std::vector<Pos> corridor_a;
    std::vector<Pos> corridor_b;

    double uncertainty_penalty = 0.0;
    std::vector<std::array<int, 4>> premapped;  // x0, y0, x1, y1 inclusive
    int belief_ttl = -1;                         // -1 keeps the map forever

    bool operator==(const Seasoning&) const = default;
};

struct WorldSpec {
    std::string id;
    int width = 0;
    int height = 0;
    std::map<Pos, Cell> cells;  // anything absent is Open
    Pos start;
    std::optional<Pos> goal;
    bool food_respawn = false;
    VisibilityModel visibility;
    std::optional<int> proceed_cue_tick;
    int max_ticks = 200;
    Seasoning seasoning;

    bool operator==(const WorldSpec&) const = default;
};

class Grid {
public:
    explicit Grid(const WorldSpec& spec);

    int width() const { return w_; }
    int height() const { return h_; }
    bool in_bounds(Pos p) const { return p.x >= 0 && p.y >= 0 && p.x < w_ && p.y < h_; }
    int index(Pos p) const { return p.y * w_ + p.x; }
    Pos pos_of(int i) const { return {i % w_, i / w_}; }
    int size() const { return w_ * h_; }

    // Out of bounds reads as Rock.
    const Cell& at(Pos p) const;
    bool passable(Pos p) const { return at(p).passable(); }
    int passable_count() const;
    const WorldSpec& spec() const { return spec_; }

private:
    WorldSpec spec_;
    int w_ = 0;
    int h_ = 0;
    std::vector<Cell> cells_;
};

Grid build_world(const WorldSpec& spec);

std::vector<Pos> visible_set(const Grid& grid, Pos pos, const VisibilityModel& model);

inline constexpr std::array<const char*, 14> kModalities{
    "flipflop",        "plan_churn",          "perseveration",        "paralysis",
    "hypervigilance",  "futile_search",       "belief_incoherence",   "tiebreak_thrash",
    "corridor_thrash", "optimality_compulsion", "metric_mismatch",    "policy_oscillation",
    "myopic_pingpong", "exploration_paralysis"};

int modality_index(const std::string& id);  // -1 when unknown

WorldSpec canonical_scenario(const std::string& modality);
// The fourteen modalities plus "healthy" and "phobia".
WorldSpec named_scenario(const std::string& name);
std::vector<std::string> scenario_names();

// Mutable food layer for one episode.
struct FoodState {
    std::map<Pos, Cell> food;
};

FoodState initial_food(const Grid& grid);

// Replaces the eaten food with a fresh one at a uniformly drawn free cell.
// Returns the new position, or nullopt when respawn is disabled.
std::optional<Pos> respawn_food(const Grid& grid, FoodState& state, Pos eaten, Stream& rng);

}  // namespace neurosis
