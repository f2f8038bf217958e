// Command-line experiment runner.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "neurosis/detectors.hpp"
#include "neurosis/evolver.hpp"
#include "neurosis/lawmetrics.hpp"
#include "neurosis/scenario_io.hpp"

using namespace neurosis;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kBadInput = 2, kMismatch = 3, kGate = 4 };

// A flag value that names nothing we know.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void print_config(const std::string& cmd, ojson j) {
    ojson out;
    out["command"] = cmd;
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
    std::cout << "config " << out.dump() << std::endl;
}

GovernorConfig resolve_governor(const std::string& g) {
    if (g.size() > 5 && g.substr(g.size() - 5) == ".json") {
        ojson j;
        try {
            j = ojson::parse(read_file(g));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(g + ": " + e.what());
        }
        return governor_from_json(j);
    }
    try {
        return governor_preset(g);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Trace load_trace(const std::string& path, const std::string& aux) {
    std::string csv = read_file(path);
    if (!aux.empty()) return trace_from_csv(csv, read_file(aux));
    return trace_from_csv(csv);
}

struct Options {
    std::string modality, out;
    std::string scenario, governor = "off", trace, aux, scores;
    std::uint64_t seed = 1;
    std::string report;
    bool gate = false;
    std::string config, bank;
    bool random = false;
    std::string entry, target;
    int synth_pop = SynthConfig{}.pop, synth_gens = SynthConfig{}.generations;
    std::uint64_t synth_seed = 1;
    std::vector<std::string> toggles;
};

int cmd_scenario(const Options& o) {
    auto names = scenario_names();
    if (std::find(names.begin(), names.end(), o.modality) == names.end())
        throw UsageError("unknown scenario: " + o.modality);
    print_config("scenario", {{"modality", o.modality}, {"out", o.out}});
    save_scenario(named_scenario(o.modality), o.out);
    return kOk;
}

int cmd_run(const Options& o) {
    WorldSpec spec = load_scenario(o.scenario);
    GovernorConfig gov = resolve_governor(o.governor);
    const std::string& aux = o.aux;
    print_config("run", {{"scenario", o.scenario},
                         {"seed", o.seed},
                         {"governor", governor_to_json(gov)},
                         {"trace", o.trace},
                         {"aux", aux},
                         {"scores", o.scores}});
    Trace t = run_episode(spec, gov, o.seed);
    write_file(o.trace, trace_to_csv(t));
    if (!aux.empty()) write_file(aux, trace_aux_csv(t));
    Audit a = audit(t, spec);
    ojson s = scores_to_json(a.scores);
    s["terminal"] = terminal_name(t.terminal);
    s["ticks"] = t.records.size();
    s["fired"] = fired_modalities(a.reports);
    if (!o.scores.empty()) write_file(o.scores, s.dump(2) + "\n");
    std::cout << "terminal " << terminal_name(t.terminal) << " ticks " << t.records.size() << " regret "
              << format_real(a.scores.regret) << "\n";
    return kOk;
}

int cmd_detect(const Options& o) {
    if (o.modality != "all" && modality_index(o.modality) < 0) throw UsageError("unknown modality: " + o.modality);
    Trace t = load_trace(o.trace, o.aux);
    DetectorConfig cfg;
    if (!o.scenario.empty()) cfg = with_paired_baseline(cfg, load_scenario(o.scenario), o.seed);
    print_config("detect", {{"trace", o.trace},
                            {"aux", o.aux},
                            {"scenario", o.scenario},
                            {"seed", o.seed},
                            {"modality", o.modality},
                            {"report", o.report},
                            {"gate", o.gate},
                            {"baseline_arrival", cfg.baseline_arrival ? ojson(*cfg.baseline_arrival) : ojson()}});
    std::vector<DetectorReport> rs;
    if (o.modality == "all")
        rs = detect_all(t, cfg);
    else
        rs.push_back(detect(o.modality, t, cfg));
    ojson j = reports_to_json(rs);
    if (!o.report.empty()) write_file(o.report, j.dump(2) + "\n");
    auto fired = fired_modalities(rs);
    std::cout << "fired " << fired.size();
    for (const auto& m : fired) std::cout << ' ' << m;
    std::cout << "\n";
    return o.gate && !fired.empty() ? kGate : kOk;
}

int cmd_evolve(const Options& o) {
    EvolveConfig cfg;
    if (!o.config.empty()) {
        try {
            cfg = evolve_config_from_json(ojson::parse(read_file(o.config)));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(o.config + ": " + e.what());
        }
    }
    unsigned threads = threads_from_env();
    ojson c = evolve_config_to_json(cfg);
    print_config("evolve", {{"bank", o.bank}, {"random", o.random}, {"threads", threads}, {"evolve", c}});
    EvolveResult r = o.random ? random_search(cfg, threads) : evolve(cfg, threads);
    save_bank(r.bank, o.bank);
    for (size_t g = 0; g < r.best_per_generation.size(); ++g)
        std::cout << "generation " << g << " best " << format_real(r.best_per_generation[g]) << "\n";
    for (const auto& e : r.bank.entries) {
        std::cout << "entry " << e.id << " " << format_real(e.fitness.scalar);
        for (const auto& m : e.fitness.fired) std::cout << ' ' << m;
        std::cout << "\n";
    }
    std::cout << "evaluations " << r.evaluations << "\n";
    return kOk;
}

BankEntry& find_entry(Bank& bank, const std::string& id) {
    for (auto& e : bank.entries)
        if (e.id == id) return e;
    throw UsageError("no entry " + id + " in the bank");
}

// Rewrites bank.json and the named entry.
void store(const Bank& bank, const BankEntry& e, const std::string& dir) {
    Bank only = bank;
    only.entries.clear();
    save_bank(only, dir);
    ojson ids = ojson::array();
    for (const auto& x : bank.entries) ids.push_back(x.id);
    ojson j = ojson::parse(read_file((fs::path(dir) / "bank.json").string()));
    j["entries"] = ids;
    write_file((fs::path(dir) / "bank.json").string(), j.dump(2) + "\n");
    save_entry(bank, e, dir);
}

int cmd_shrink(const Options& o) {
    if (modality_index(o.target) < 0) throw UsageError("unknown modality: " + o.target);
    Bank bank = load_bank(o.bank);
    BankEntry& e = find_entry(bank, o.entry);
    print_config("shrink", {{"bank", o.bank}, {"entry", o.entry}, {"target", o.target}});
    if (!e.genome) throw std::invalid_argument(o.entry + " has no genome to shrink");
    if (!fires(*e.genome, o.target, bank.eval)) throw std::invalid_argument(o.entry + " does not fire " + o.target);
    size_t before = e.genome->genes.size();
    Genome s = shrink(*e.genome, o.target, bank.eval);
    Decoded d = decode(s, bank.eval.agent, bank.eval.max_ticks);
    BankEntry out;
    out.id = o.entry + "-" + o.target;
    out.genome = s;
    out.spec = d.spec;
    out.spec.id = out.id;
    out.fitness = evaluate_spec(d.spec, bank.eval);
    out.shrunk = true;
    std::erase_if(bank.entries, [&](const BankEntry& x) { return x.id == out.id; });
    bank.entries.push_back(out);
    store(bank, bank.entries.back(), o.bank);
    std::cout << "shrunk " << before << " -> " << s.genes.size() << " genes as " << out.id << "\n";
    return kOk;
}

int cmd_synthesize(const Options& o) {
    Bank bank = load_bank(o.bank);
    SynthConfig sc;
    sc.pop = o.synth_pop;
    sc.generations = o.synth_gens;
    sc.master_seed = o.synth_seed;
    print_config("synthesize", {{"bank", o.bank},
                                {"out", o.out},
                                {"pop", sc.pop},
                                {"generations", sc.generations},
                                {"elitism", sc.elitism},
                                {"tournament", sc.tournament},
                                {"mutation", sc.mutation},
                                {"eps_regret", sc.eps_regret},
                                {"master_seed", sc.master_seed}});
    SynthResult r = synthesize_governor(bank, sc, threads_from_env());
    write_file(o.out, governor_to_json(r.config).dump(2) + "\n");
    GovernorScore def = score_governor(governor_preset("default"), bank, sc.eps_regret);
    std::cout << "feasible " << (r.score.feasible ? "yes" : "no") << " total " << format_real(r.score.total)
              << " default " << format_real(def.total) << "\n";
    return kOk;
}

int cmd_counterfactual(const Options& o) {
    std::vector<Toggle> ts;
    for (const auto& name : o.toggles) {
        std::stringstream in(name);
        std::string part;
        while (std::getline(in, part, ',')) {
            auto t = toggle_from_name(part);
            if (!t) throw UsageError("unknown toggle: " + part);
            ts.push_back(*t);
        }
    }
    Bank bank = load_bank(o.bank);
    BankEntry& e = find_entry(bank, o.entry);
    ojson names = ojson::array();
    for (Toggle t : ts) names.push_back(toggle_name(t));
    print_config("counterfactual", {{"bank", o.bank}, {"entry", o.entry}, {"toggles", names}});
    Counterfactual cf = counterfactual_trace(e, ts, bank.eval);
    fs::path dir = fs::path(o.bank) / e.id;
    fs::create_directories(dir / "traces");
    e.counterfactual_ids.clear();
    for (size_t k = 1; k < cf.traces.size(); ++k) {
        std::string id = "cf";
        for (Toggle t : cf.assignments[k]) id += std::string("_") + toggle_name(t);
        e.counterfactual_ids.push_back(id);
        write_file((dir / "traces" / (id + ".csv")).string(), trace_to_csv(cf.traces[k]));
        write_file((dir / "traces" / (id + ".aux.csv")).string(), trace_aux_csv(cf.traces[k]));
    }
    write_file((dir / "diff.json").string(), cf.diff.dump(2) + "\n");
    store(bank, e, o.bank);
    for (const auto& run : cf.diff["runs"]) std::cout << run.dump() << "\n";
    return kOk;
}

int cmd_replay(const Options& o) {
    WorldSpec spec = load_scenario(o.scenario);
    GovernorConfig gov = resolve_governor(o.governor);
    std::string recorded = read_file(o.trace);
    print_config("replay",
                 {{"trace", o.trace}, {"scenario", o.scenario}, {"seed", o.seed}, {"governor", governor_to_json(gov)}});
    std::string fresh = trace_to_csv(run_episode(spec, gov, o.seed));
    if (fresh == recorded) {
        std::cout << "replay identical (" << fresh.size() << " bytes)\n";
        return kOk;
    }
    std::istringstream a(recorded), b(fresh);
    std::string la, lb;
    for (int line = 1;; ++line) {
        bool ga = static_cast<bool>(std::getline(a, la)), gb = static_cast<bool>(std::getline(b, lb));
        if (!ga && !gb) break;
        if (!ga || !gb || la != lb) {
            std::cout << "replay mismatch at line " << line << "\n  recorded: " << (ga ? la : "<eof>")
                      << "\n  replayed: " << (gb ? lb : "<eof>") << "\n";
            break;
        }
    }
    return kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-world agent simulator and behavioural audit toolkit"};
    app.require_subcommand(1);
    Options o;

    auto* scenario = app.add_subcommand("scenario", "Write a named scenario as JSON");
    scenario->add_option("modality", o.modality, "Modality id or named scenario")->required();
    scenario->add_option("--out", o.out, "Output path")->required();

    auto* run = app.add_subcommand("run", "Run one episode");
    run->add_option("--scenario", o.scenario)->required()->check(CLI::ExistingFile);
    run->add_option("--seed", o.seed)->required();
    run->add_option("--governor", o.governor, "Preset name, off, or a governor .json")->capture_default_str();
    run->add_option("--trace", o.trace)->required();
    run->add_option("--aux", o.aux, "Companion audit columns");
    run->add_option("--scores", o.scores);

    auto* detect_cmd = app.add_subcommand("detect", "Run detectors over a trace");
    detect_cmd->add_option("--trace", o.trace)->required()->check(CLI::ExistingFile);
    detect_cmd->add_option("--aux", o.aux)->check(CLI::ExistingFile);
    detect_cmd->add_option("--scenario", o.scenario, "Enables the paired satisficing baseline")
        ->check(CLI::ExistingFile);
    detect_cmd->add_option("--seed", o.seed);
    detect_cmd->add_option("--modality", o.modality)->required();
    detect_cmd->add_option("--report", o.report);
    detect_cmd->add_flag("--gate", o.gate, "Exit 4 when any detector fires");

    auto* evolve_cmd = app.add_subcommand("evolve", "Evolve a bank of trigger worlds");
    evolve_cmd->add_option("--config", o.config)->check(CLI::ExistingFile);
    evolve_cmd->add_option("--bank", o.bank)->required();
    evolve_cmd->add_flag("--random", o.random, "Equal-budget random search instead");

    auto* shrink_cmd = app.add_subcommand("shrink", "Minimize a bank entry for one detector");
    shrink_cmd->add_option("--bank", o.bank)->required()->check(CLI::ExistingDirectory);
    shrink_cmd->add_option("--entry", o.entry)->required();
    shrink_cmd->add_option("--target", o.target)->required();

    auto* synth = app.add_subcommand("synthesize", "Search governor settings against a bank");
    synth->add_option("--bank", o.bank)->required()->check(CLI::ExistingDirectory);
    synth->add_option("--out", o.out)->required();
    synth->add_option("--pop", o.synth_pop)->capture_default_str();
    synth->add_option("--generations", o.synth_gens)->capture_default_str();
    synth->add_option("--seed", o.synth_seed)->capture_default_str();

    auto* cf = app.add_subcommand("counterfactual", "Re-run an entry under toggled components");
    cf->add_option("--bank", o.bank)->required()->check(CLI::ExistingDirectory);
    cf->add_option("--entry", o.entry)->required();
    cf->add_option("--toggles", o.toggles, "governor, memory, visibility, calibration")->required();

    auto* replay = app.add_subcommand("replay", "Re-simulate and byte-compare a trace");
    replay->add_option("--trace", o.trace)->required()->check(CLI::ExistingFile);
    replay->add_option("--scenario", o.scenario)->required()->check(CLI::ExistingFile);
    replay->add_option("--seed", o.seed)->required();
    replay->add_option("--governor", o.governor)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*scenario) return cmd_scenario(o);
        if (*run) return cmd_run(o);
        if (*detect_cmd) return cmd_detect(o);
        if (*evolve_cmd) return cmd_evolve(o);
        if (*shrink_cmd) return cmd_shrink(o);
        if (*synth) return cmd_synthesize(o);
        if (*cf) return cmd_counterfactual(o);
        if (*replay) return cmd_replay(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }
    return kUsage;
}
