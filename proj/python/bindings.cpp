// =============================================================================
// econoport - Python bindings
// =============================================================================

#include <pybind11/complex.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "econoport/agents.hpp"
#include "econoport/errors.hpp"
#include "econoport/extract.hpp"
#include "econoport/metrics.hpp"
#include "econoport/plot.hpp"
#include "econoport/scenario.hpp"

namespace py = pybind11;
using namespace econoport;

namespace {

SolverOptions deck_options(const FlatCircuit& c, std::optional<std::uint64_t> seed) {
    SolverOptions o = SolverOptions::from_circuit(c);
    if (seed) o.seed = seed;
    return o;
}

/// Every analysis in the deck as a list of (kind, json text).
std::vector<std::pair<std::string, std::string>> run_deck(const std::string& text,
                                                          std::optional<std::uint64_t> seed) {
    const FlatCircuit c = elaborate(parse_netlist(text));
    const SolverOptions opts = deck_options(c, seed);
    std::vector<AnalysisDirective> analyses = c.analyses;
    if (analyses.empty()) analyses.emplace_back(OpDirective{});
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& a : analyses) {
        if (std::holds_alternative<OpDirective>(a)) {
            out.emplace_back("op", to_json(dc_op(c, opts)));
        } else if (const auto* tr = std::get_if<TranDirective>(&a)) {
            out.emplace_back("tran", to_json(transient(c, *tr, opts)));
        } else {
            out.emplace_back("ac", to_json(ac_sweep(c, std::get<AcDirective>(a).grid(), opts)));
        }
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Economic circuit simulation core";

    // -------------------------------------------------------------------------
    // Errors
    // -------------------------------------------------------------------------
    const py::exception<Error>& error = py::register_exception<Error>(m, "Error");
    py::register_exception<ElaborationError>(m, "ElaborationError", error.ptr());
    py::register_exception<SolveError>(m, "SolveError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<AlgebraError>(m, "AlgebraError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParseError& e) {
            const py::object type = py::module_::import("econoport._core").attr("ParseError");
            py::object exc = type(e.what());
            exc.attr("kind") = to_string(e.kind());
            exc.attr("line") = e.line();
            exc.attr("column") = e.column();
            PyErr_SetObject(type.ptr(), exc.ptr());
        }
    });

    // -------------------------------------------------------------------------
    // Rational functions and 2-port models
    // -------------------------------------------------------------------------
    py::class_<RationalFunction>(m, "RationalFunction")
        .def(py::init<>())
        .def(py::init<double>())
        .def(py::init([](std::vector<double> num, std::vector<double> den) {
                 return RationalFunction(Polynomial(std::move(num)), Polynomial(std::move(den)));
             }),
             py::arg("num"), py::arg("den") = std::vector<double>{1.0})
        .def_static("s", &RationalFunction::s)
        .def_property_readonly("num", [](const RationalFunction& f) { return f.num().coeffs(); })
        .def_property_readonly("den", [](const RationalFunction& f) { return f.den().coeffs(); })
        .def("__call__", [](const RationalFunction& f, std::complex<double> s) { return f.eval(s); })
        .def(py::self + py::self)
        .def(py::self - py::self)
        .def(py::self * py::self)
        .def(py::self / py::self)
        .def(-py::self)
        .def("__eq__", [](const RationalFunction& a, const RationalFunction& b) { return a == b; })
        .def("__repr__", &RationalFunction::to_string);

    m.def("pid_policy", &pid_policy, py::arg("kp"), py::arg("ki"), py::arg("kd"), py::arg("wf") = 1e3);

    py::class_<ParameterModel>(m, "ParameterModel")
        .def_property_readonly("kind", [](const ParameterModel& p) { return std::string(to_string(p.kind)); })
        .def("entry", [](const ParameterModel& p, int r, int c) { return p.m.at(r, c); })
        .def("eval", [](const ParameterModel& p, std::complex<double> s) { return p.m.eval(s); })
        .def("convert", [](const ParameterModel& p, const std::string& kind) {
            return convert(p, parse_parameter_kind(kind));
        })
        .def("__eq__", [](const ParameterModel& a, const ParameterModel& b) { return approx_equal(a, b); })
        .def("to_json", [](const ParameterModel& p) {
            nlohmann::json j;
            to_json(j, p);
            return j.dump();
        });

    m.def("trader", &trader, py::arg("eps"), py::arg("b"), py::arg("k"));
    m.def("consumer", &consumer);
    m.def("reserve_bank", &reserve_bank);
    m.def("diminishing_returns", &diminishing_returns, py::arg("mu"), py::arg("kth"), py::arg("capital"),
          py::arg("labor"));
    m.def("aggregate", [](const std::string& kind, const std::vector<ParameterModel>& models) {
        return aggregate(parse_interconnect_kind(kind), models);
    });

    // -------------------------------------------------------------------------
    // Netlists and analyses (results as JSON text)
    // -------------------------------------------------------------------------
    m.def("normalize_netlist", [](const std::string& text) { return print_netlist(parse_netlist(text)); });
    m.def("run_deck", &run_deck, py::arg("text"), py::arg("seed") = py::none());
    m.def(
        "bode",
        [](const std::string& text, const std::string& stimulus, const std::string& probe, const std::string& grid) {
            const FlatCircuit c = elaborate(parse_netlist(text));
            return to_json(bode(c, stimulus, probe, parse_grid(grid), SolverOptions::from_circuit(c)));
        },
        py::arg("text"), py::arg("stimulus"), py::arg("probe"), py::arg("grid") = "log:200:0.01:1000");
    m.def(
        "bode_svg",
        [](const std::string& text, const std::string& stimulus, const std::string& probe, const std::string& grid) {
            const FlatCircuit c = elaborate(parse_netlist(text));
            return bode_svg(bode(c, stimulus, probe, parse_grid(grid), SolverOptions::from_circuit(c)),
                            probe + " / " + stimulus);
        },
        py::arg("text"), py::arg("stimulus"), py::arg("probe"), py::arg("grid") = "log:200:0.01:1000");
    m.def(
        "extract",
        [](const std::string& text, const std::string& subckt, const std::string& kind, const std::string& grid) {
            ExtractionRequest req;
            req.library = parse_netlist(text);
            req.subckt = subckt;
            req.kind = parse_parameter_kind(kind);
            req.freqs = parse_grid(grid);
            return to_json(extract_twoport(req)).dump();
        },
        py::arg("text"), py::arg("subckt"), py::arg("kind") = "Y", py::arg("grid") = "log:50:0.01:1000");

    // -------------------------------------------------------------------------
    // Metrics on plain sample vectors
    // -------------------------------------------------------------------------
    auto sig = [](std::vector<double> t, std::vector<double> v) { return Signal{std::move(t), std::move(v)}; };
    m.def("gdp", [sig](const std::vector<double>& t, const std::vector<double>& c, const std::vector<double>& i,
                       const std::vector<double>& g, const std::vector<double>& nx) {
        return gdp(sig(t, c), sig(t, i), sig(t, g), sig(t, nx)).values;
    });
    m.def("inflation", [sig](const std::vector<double>& t, const std::vector<double>& p) {
        return inflation(sig(t, p)).values;
    });
    m.def("ftp_rate", [sig](const std::vector<double>& t, const std::vector<double>& s, const std::vector<double>& l) {
        return ftp_rate(sig(t, s), sig(t, l)).values;
    });
    m.def("surplus_rate", [sig](const std::vector<double>& t, const std::vector<double>& v,
                                const std::vector<double>& f) { return surplus_rate(sig(t, v), sig(t, f)).values; });

    // -------------------------------------------------------------------------
    // Scenario corpus
    // -------------------------------------------------------------------------
    m.def("check_scenarios", [](const std::string& dir, const std::vector<std::string>& only) {
        ScenarioSuite suite(dir);
        std::vector<std::tuple<std::string, std::string, bool, std::string>> out;
        for (const auto& name : suite.names()) {
            if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
            for (const auto& r : suite.check(name)) out.emplace_back(name, r.id, r.pass, r.detail);
        }
        return out;
    }, py::arg("dir"), py::arg("only") = std::vector<std::string>{});
}
