#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neurosis/detectors.hpp"
#include "neurosis/evolver.hpp"
#include "neurosis/lawmetrics.hpp"
#include "neurosis/scenario_io.hpp"

namespace py = pybind11;
using namespace neurosis;

namespace {

GovernorConfig governor_arg(const std::string& g) {
    if (!g.empty() && g.front() == '{') return governor_from_json(ojson::parse(g));
    return governor_preset(g);
}

Trace trace_arg(const std::string& csv, const std::string& aux) {
    return aux.empty() ? trace_from_csv(csv) : trace_from_csv(csv, aux);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Grid-world agent simulator and behavioural audit toolkit";

    m.attr("MODALITIES") = std::vector<std::string>(kModalities.begin(), kModalities.end());
    m.def("scenario_names", &scenario_names);
    m.def("preset_names", &preset_names);
    m.def("named_scenario", [](const std::string& name) { return serialize_scenario(named_scenario(name)); },
          py::arg("name"));
    m.def("governor_preset", [](const std::string& name) { return governor_to_json(governor_preset(name)).dump(); },
          py::arg("name"));

    m.def(
        "run",
        [](const std::string& scenario, const std::string& governor, std::uint64_t seed) {
            Trace t = run_episode(parse_scenario(scenario), governor_arg(governor), seed);
            return py::make_tuple(trace_to_csv(t), trace_aux_csv(t));
        },
        py::arg("scenario"), py::arg("governor") = "off", py::arg("seed") = 1,
        "Returns (trace_csv, aux_csv). governor is a preset name or a JSON object.");

    m.def(
        "detect",
        [](const std::string& csv, const std::string& aux, const std::string& modality,
           const std::optional<std::string>& scenario, std::uint64_t seed) {
            Trace t = trace_arg(csv, aux);
            DetectorConfig cfg;
            if (scenario) cfg = with_paired_baseline(cfg, parse_scenario(*scenario), seed);
            std::vector<DetectorReport> rs;
            if (modality == "all")
                rs = detect_all(t, cfg);
            else
                rs.push_back(detect(modality, t, cfg));
            return reports_to_json(rs).dump();
        },
        py::arg("csv"), py::arg("aux") = "", py::arg("modality") = "all", py::arg("scenario") = py::none(),
        py::arg("seed") = 1);

    m.def(
        "audit",
        [](const std::string& csv, const std::string& aux, const std::string& scenario) {
            Trace t = trace_arg(csv, aux);
            Audit a = audit(t, parse_scenario(scenario));
            ojson j = scores_to_json(a.scores);
            j["fired"] = fired_modalities(a.reports);
            return j.dump();
        },
        py::arg("csv"), py::arg("aux"), py::arg("scenario"));

    m.def(
        "replay",
        [](const std::string& csv, const std::string& scenario, std::uint64_t seed, const std::string& governor) {
            return trace_to_csv(run_episode(parse_scenario(scenario), governor_arg(governor), seed)) == csv;
        },
        py::arg("csv"), py::arg("scenario"), py::arg("seed") = 1, py::arg("governor") = "off");

    m.def("prefix_edit_fraction", &prefix_edit_fraction, py::arg("old_steps"), py::arg("new_steps"), py::arg("k"));

    m.def(
        "evolve",
        [](const std::string& config, const std::string& bank_dir, bool random, unsigned threads) {
            EvolveConfig cfg = evolve_config_from_json(ojson::parse(config));
            EvolveResult r;
            {
                py::gil_scoped_release release;
                r = random ? random_search(cfg, threads) : evolve(cfg, threads);
            }
            if (!bank_dir.empty()) save_bank(r.bank, bank_dir);
            ojson j;
            j["best_per_generation"] = r.best_per_generation;
            j["evaluations"] = r.evaluations;
            ojson entries = ojson::array();
            for (const auto& e : r.bank.entries) {
                ojson x = fitness_to_json(e.fitness);
                x["id"] = e.id;
                x["genome"] = e.genome ? genome_to_json(*e.genome) : ojson();
                entries.push_back(x);
            }
            j["entries"] = entries;
            return j.dump();
        },
        py::arg("config") = "{}", py::arg("bank_dir") = "", py::arg("random") = false, py::arg("threads") = 0);

    py::register_exception<WorldError>(m, "WorldError", PyExc_ValueError);
}
