#include "pomdpv/bench.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pomdpv;

namespace {

using Model = Problem<Rational>;
// beliefs cross the boundary as {state: "p/q"}
using TextBelief = std::map<StateId, std::string>;

TextBelief toText(Belief<Rational> const& b) {
    TextBelief out;
    for (std::size_t i = 0; i < b.size(); ++i) {
        out[b.support[i]] = toString(b.probs[i]);
    }
    return out;
}

Belief<Rational> fromText(Model const& m, TextBelief const& b) {
    std::vector<Entry<Rational>> entries;
    for (auto const& [s, p] : b) {
        entries.push_back({s, parseRational(p)});
    }
    return makeBelief(m.pomdp, std::move(entries));
}

py::dict recordDict(RunRecord const& r) {
    py::dict d;
    d["model"] = r.model;
    d["mode"] = r.mode;
    d["heuristic"] = r.heuristic;
    d["arithmetic"] = r.arithmetic;
    d["lower"] = r.lower;
    d["upper"] = r.upper;
    d["iterations"] = r.iterations;
    d["states"] = r.states;
    d["seconds"] = r.seconds;
    d["status"] = r.status;
    d["threshold"] = r.threshold.empty() ? py::object(py::none()) : py::object(py::str(r.threshold));
    return d;
}

}  // namespace

PYBIND11_MODULE(_pomdpv, m) {
    m.doc() = "Sound bounds for partially observable MDPs";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);

    py::class_<Model>(m, "Model")
        .def_property_readonly("num_states", [](Model const& p) { return p.pomdp.numStates(); })
        .def_property_readonly("num_actions", [](Model const& p) { return p.pomdp.numActions(); })
        .def_property_readonly("num_observations", [](Model const& p) { return p.pomdp.numObservations(); })
        .def_property_readonly("action_names", [](Model const& p) { return p.pomdp.mdp().actionNames(); })
        .def_property_readonly("initial_state", [](Model const& p) { return p.pomdp.initialState(); })
        .def("observation", [](Model const& p, StateId s) { return p.pomdp.observation(s); })
        .def("to_text", [](Model const& p) { return writeModel(p); });

    m.def("parse_model", [](std::string const& text) { return parseModelExact(text); }, py::arg("text"));
    m.def("load_model", [](std::string const& path) { return parseModelFile<Rational>(path); }, py::arg("path"));
    m.def("running_example", &makeRunningExample);

    m.def(
        "next_belief",
        [](Model const& p, TextBelief const& b, ActionId a, ObsId z) {
            return toText(nextBelief(p.pomdp, fromText(p, b), a, z));
        },
        py::arg("model"), py::arg("belief"), py::arg("action"), py::arg("observation"));
    m.def(
        "belief_successors",
        [](Model const& p, TextBelief const& b, ActionId a) {
            std::vector<std::pair<std::string, TextBelief>> out;
            for (auto const& succ : beliefSuccessors(p.pomdp, fromText(p, b), a)) {
                out.push_back({toString(succ.prob), toText(succ.belief)});
            }
            return out;
        },
        py::arg("model"), py::arg("belief"), py::arg("action"));

    m.def("heuristic_presets", [] {
        std::map<std::string, std::map<std::string, double>> out;
        for (auto const& name : heuristicPresetNames()) {
            auto h = heuristicPreset(name);
            out[name] = {{"eta_init", static_cast<double>(h.etaInit)}, {"f_res", h.fRes}, {"rho_z", h.rhoZ},
                         {"f_z", h.fZ}, {"f_step", h.fStep}, {"rho_gap", h.rhoGap}, {"f_gap", h.fGap},
                         {"rho_sigma", h.rhoSigma}};
        }
        return out;
    });

    m.def(
        "run",
        [](Model const& p, std::string const& mode, std::optional<std::uint64_t> resolution,
           std::string const& heuristic, double time, std::optional<std::size_t> maxIters, double gap, bool exact,
           std::optional<std::string> threshold, std::string const& name) {
            RunConfig c;
            c.mode = parseRunMode(mode);
            c.resolution = resolution;
            c.heuristic = heuristicPreset(heuristic);
            c.timeLimit = time;
            c.maxIterations = maxIters;
            c.gapTarget = gap;
            c.arithmetic = exact ? Arithmetic::Exact : Arithmetic::Float;
            c.threshold = std::move(threshold);
            RunOutput out;
            {
                py::gil_scoped_release release;
                out = runProblem(c, p, name);
            }
            return recordDict(out.record);
        },
        py::arg("model"), py::arg("mode") = "refine", py::arg("resolution") = py::none(),
        py::arg("heuristic") = "h0", py::arg("time") = 60.0, py::arg("max_iters") = py::none(),
        py::arg("gap") = 1e-4, py::arg("exact") = false, py::arg("threshold") = py::none(),
        py::arg("name") = "<model>");

    m.def(
        "generate",
        [](std::string const& family, std::size_t width, std::size_t height, std::size_t capacity,
           std::size_t rocks, std::string const& noise, std::uint64_t seed) {
            GenParams g{width, height, capacity, rocks, noise};
            return generateBenchmark(parseFamily(family), g, seed);
        },
        py::arg("family"), py::arg("width") = 3, py::arg("height") = 3, py::arg("capacity") = 3,
        py::arg("rocks") = 2, py::arg("noise") = "1/10", py::arg("seed") = 1);
}
