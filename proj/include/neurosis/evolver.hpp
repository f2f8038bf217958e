#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurosis/governor.hpp"
#include "neurosis/lawmetrics.hpp"
#include "neurosis/world.hpp"

namespace neurosis {

enum class GeneType { Dims, Wall, Band, Food, MemSeed, Schedule, Noise };
inline constexpr int kGeneTypes = 7;

const char* gene_type_name(GeneType t);
std::optional<GeneType> gene_type_from_name(const std::string& s);

struct ParamSpec {
    const char* name;
    double lo;
    double hi;
    bool integer;
};

// Parameter layout of a gene type, in storage order.
const std::vector<ParamSpec>& gene_params(GeneType t);

struct Gene {
    GeneType type = GeneType::Dims;
    std::vector<double> p;
    bool operator==(const Gene&) const = default;
};

struct Genome {
    std::vector<Gene> genes;
    bool operator==(const Genome&) const = default;
};

inline constexpr int kMaxGenes = 24;

Gene random_gene(Stream& rng);
Genome random_genome(Stream& rng, int max_genes = 6);

struct Decoded {
    bool valid = false;
    std::string error;  // why the genome is invalid
    WorldSpec spec;
};

// Deterministic and never throws; bad genomes come back with valid = false.
// Later genes overwrite earlier ones, the start is always open and food
// survives later walls.
Decoded decode(const Genome& g, const Seasoning& agent = {}, int max_ticks = 60);

struct VaryRates {
    double crossover = 0.7;
    double mutation = 0.2;
};

// One-point crossover over gene lists, then per-gene Gaussian parameter
// mutation clipped to the gene bounds. Children are truncated to max_genes.
std::pair<Genome, Genome> vary(const Genome& a, const Genome& b, const VaryRates& rates, Stream& rng,
                               int max_genes = kMaxGenes);

struct Fitness {
    double law_pressure = 0.0;
    double neurosis = 0.0;
    double explanatory_gap = 0.0;  // mean mismatch run over max_ticks
    double rationale_dominance = 0.0;  // reported only, not in the scalar
    double scalar = 0.0;
    std::vector<std::string> fired;  // union over seeds, modality order
};

struct EvalConfig {
    Seasoning agent;
    int max_ticks = 60;
    GovernorConfig governor = governor_off();
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double a = 1.0;
    double b = 1.0;
    double c = 0.5;
};

// Mean length of the runs of ticks where the local and global first steps
// disagree; 0 when they never do.
double mean_mismatch_run(const Trace& t);

// Fraction of mismatch ticks whose global plan cost is mostly risk: the
// summed w_risk * risk along the plan exceeds the distance and energy terms.
double rationale_dominance(const Trace& t, const WorldSpec& spec);

double law_pressure(const LawScores& s, const WorldSpec& spec);

Fitness evaluate_spec(const WorldSpec& spec, const EvalConfig& cfg);
Fitness evaluate(const Genome& g, const EvalConfig& cfg);

struct BankEntry {
    std::string id;
    std::optional<Genome> genome;  // absent for hand-built entries
    WorldSpec spec;
    Fitness fitness;
    bool shrunk = false;
    std::vector<std::string> counterfactual_ids;
};

struct Bank {
    EvalConfig eval;
    std::vector<BankEntry> entries;
};

struct EvolveConfig {
    int pop = 32;
    int generations = 20;
    int elitism = 2;
    int tournament = 3;
    VaryRates rates;
    int bank_size = 8;
    int max_genes = kMaxGenes;
    int init_genes = 6;
    std::uint64_t master_seed = 1;
    EvalConfig eval;
};

// Throws std::invalid_argument on out-of-range knobs or unknown keys.
void validate(const EvolveConfig& cfg);
nlohmann::ordered_json evolve_config_to_json(const EvolveConfig& cfg);
EvolveConfig evolve_config_from_json(const nlohmann::ordered_json& j);

struct EvolveResult {
    Bank bank;
    std::vector<double> best_per_generation;  // generation 0 is the initial population
    std::uint64_t evaluations = 0;
};

// threads = 0 uses the machine's parallelism. Results do not depend on it.
EvolveResult evolve(const EvolveConfig& cfg, unsigned threads = 0);

// Best of pop * (generations + 1) uniformly drawn genomes.
EvolveResult random_search(const EvolveConfig& cfg, unsigned threads = 0);

// Threads from NEUROSIS_THREADS, else 0.
unsigned threads_from_env();

// Target modality fires on at least one of the seeds.
bool fires(const Genome& g, const std::string& modality, const EvalConfig& cfg);

// Greedy single-gene deletion until every remaining deletion stops the
// firing. Throws std::invalid_argument when g does not fire the target.
Genome shrink(const Genome& g, const std::string& modality, const EvalConfig& cfg);

// Entry built from a scenario rather than a genome.
BankEntry entry_from_spec(const std::string& id, const WorldSpec& spec, const EvalConfig& cfg);

struct SynthConfig {
    int pop = 16;
    int generations = 6;
    int elitism = 2;
    int tournament = 3;
    double mutation = 0.2;
    double eps_regret = 0.05;
    std::uint64_t master_seed = 1;
};

struct GovernorScore {
    bool feasible = false;
    double total = 0.0;  // summed neurosis score over entries and seeds
    std::vector<double> worst_regret_fraction;  // per entry
};

GovernorScore score_governor(const GovernorConfig& g, const Bank& bank, double eps_regret = 0.05);

struct SynthResult {
    GovernorConfig config;
    GovernorScore score;
};

// Searches lever flags and numeric knobs; the initial population holds the
// shipped presets. Feasible configs beat infeasible ones, then the lower
// total wins. Throws std::invalid_argument on an empty bank.
SynthResult synthesize_governor(const Bank& bank, const SynthConfig& cfg = {}, unsigned threads = 0);

enum class Toggle { Governor, Memory, Visibility, Calibration };
const char* toggle_name(Toggle t);
std::optional<Toggle> toggle_from_name(const std::string& s);

struct Counterfactual {
    std::vector<std::vector<Toggle>> assignments;  // first is the baseline
    std::vector<Trace> traces;
    nlohmann::ordered_json diff;
};

// Runs the entry's first seed under every subset of toggles. The diff lists,
// per non-baseline run, the first tick whose position or action differs,
// score deltas and detector firing deltas.
Counterfactual counterfactual_trace(const BankEntry& e, const std::vector<Toggle>& toggles, const EvalConfig& cfg);

nlohmann::ordered_json genome_to_json(const Genome& g);
Genome genome_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json fitness_to_json(const Fitness& f);

// bank/<id>/{genome.json, scenario.json, fitness.json, traces/*.csv, diff.json}
// plus bank.json with the evaluation config and entry order.
void save_bank(const Bank& bank, const std::string& dir);
Bank load_bank(const std::string& dir);
void save_entry(const Bank& bank, const BankEntry& e, const std::string& dir);

std::string spec_hash(const WorldSpec& spec);

}  // namespace neurosis
