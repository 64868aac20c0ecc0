// Python bindings for the main engine operations.

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fermirg/commands.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace fermirg;

namespace {

std::string flow_summary(const std::string& config_text) {
    RunConfig cfg = config_text.empty() ? RunConfig::defaults()
                                        : RunConfig::from_json_text(config_text);
    FlowContext ctx(cfg.rg);
    FlowTrace trace =
        recursion_driver(ctx, quartic_fixture(cfg.coupling), cfg.rg.jmax);
    ProjectiveReport proj = projective_audit(ctx, trace);
    LemmaAuditReport lem = lemma_audits(ctx, trace);

    nlohmann::json j;
    j["j0"] = trace.j0;
    j["steps"] = trace.steps.size();
    j["cauchy_differences"] = proj.cauchy_differences;
    j["composition_residual"] = proj.composition_residual;
    j["delta_e_residual"] = proj.delta_e_residual;
    j["cj_additivity"] = lem.cj_additivity;
    j["ir_additivity"] = lem.ir_additivity;
    j["dressing_ratios"] = lem.dressing_ratio;
    nlohmann::json fx = nlohmann::json::array();
    for (const auto& s : trace.steps)
        fx.push_back({{"j", s.j},
                      {"iterations", s.fix.iterations},
                      {"converged", s.fix.converged},
                      {"residual", s.fix.residual}});
    j["fixpoints"] = fx;
    return j.dump();
}

std::string validate_summary(const std::string& config_text) {
    RunConfig cfg = config_text.empty() ? RunConfig::defaults()
                                        : RunConfig::from_json_text(config_text);
    ValidationReport rep = validate_config(cfg);
    nlohmann::json j;
    j["accepted"] = rep.accepted();
    auto lines = nlohmann::json::array();
    for (const auto& l : rep.lines)
        lines.push_back({{"check", l.check},
                         {"constraint", l.constraint},
                         {"ok", l.ok},
                         {"fatal", l.fatal}});
    j["lines"] = lines;
    return j.dump();
}

}  // namespace

PYBIND11_MODULE(_fermirg, m) {
    m.doc() = "multiscale renormalization-group engine for 2d fermion gases";

    // ---- norm domain
    py::class_<TruncationShape>(m, "TruncationShape")
        .def(py::init([](int r, int r0) { return TruncationShape{r, r0}; }),
             py::arg("r") = 2, py::arg("r0") = 1)
        .def_readwrite("r", &TruncationShape::r)
        .def_readwrite("r0", &TruncationShape::r0);

    py::class_<NormSeries>(m, "NormSeries")
        .def(py::init<TruncationShape>())
        .def(py::init<TruncationShape, double>())
        .def("get",
             [](const NormSeries& s, int d0, int d1, int d2) -> py::object {
                 NormCoeff c = s.at({d0, d1, d2});
                 if (c.infinite) return py::none();
                 return py::float_(c.value);
             })
        .def("set",
             [](NormSeries& s, int d0, int d1, int d2, py::object v) {
                 if (v.is_none())
                     s.set({d0, d1, d2}, NormCoeff::inf());
                 else
                     s.set({d0, d1, d2}, NormCoeff::finite(v.cast<double>()));
             })
        .def("__add__", [](const NormSeries& a, const NormSeries& b) { return a + b; })
        .def("__mul__", [](const NormSeries& a, const NormSeries& b) { return a * b; })
        .def("scaled", &NormSeries::scaled)
        .def("leq", [](const NormSeries& a, const NormSeries& b) { return ns_leq(a, b); })
        .def("constant_term", &NormSeries::constant_term)
        .def("to_json", [](const NormSeries& s) { return ns_to_json(s); })
        .def_static("from_json", [](const std::string& t) { return ns_from_json(t); })
        .def("__repr__", [](const NormSeries& s) { return s.to_string(); });
    m.def("ns_cj", &ns_cj);
    m.def("ns_ej", &ns_ej);
    m.def("ns_geom_inverse", &ns_geom_inverse);
    m.def("ns_partial", &ns_partial);

    // ---- geometry
    py::class_<Dispersion>(m, "Dispersion")
        .def_static("builtin", &Dispersion::builtin)
        .def("__call__",
             [](const Dispersion& d, double k1, double k2) { return d(k1, k2); });
    py::class_<ScaleParams>(m, "ScaleParams")
        .def(py::init<>())
        .def_readwrite("M", &ScaleParams::M)
        .def_readwrite("aleph", &ScaleParams::aleph)
        .def_readwrite("j0", &ScaleParams::j0)
        .def_readwrite("jbar", &ScaleParams::jbar)
        .def("sector_length", &ScaleParams::sector_length);
    py::class_<FermiCurve>(m, "FermiCurve")
        .def_static("trace", &FermiCurve::trace, py::arg("dispersion"),
                    py::arg("n_angles") = 512, py::arg("r_max") = 3.0)
        .def("length", &FermiCurve::length)
        .def("at_arc", &FermiCurve::at_arc)
        .def("project", &FermiCurve::project)
        .def("project_arc",
             [](const FermiCurve& c, Vec2 k) { return c.project_arc(k); });
    py::class_<Sectorization>(m, "Sectorization")
        .def_static("build", &Sectorization::build)
        .def("size", &Sectorization::size)
        .def("sector_length", &Sectorization::sector_length)
        .def("overlap", &Sectorization::overlap)
        .def("covering", &Sectorization::covering)
        .def("curve_length", &Sectorization::curve_length);
    m.def("nu_ge", &nu_ge);
    m.def("nu_single", &nu_single);
    m.def("neighbourhood_radius", &neighbourhood_radius);

    // ---- grassmann
    py::class_<AlgebraShape>(m, "AlgebraShape")
        .def(py::init([](int np, int nq) { return AlgebraShape{np, nq}; }),
             py::arg("n_phi"), py::arg("n_psi"))
        .def_readonly("n_phi", &AlgebraShape::n_phi)
        .def_readonly("n_psi", &AlgebraShape::n_psi)
        .def("phi", &AlgebraShape::phi)
        .def("psi", &AlgebraShape::psi)
        .def("zeta", &AlgebraShape::zeta);
    py::class_<GrassmannFunction>(m, "GrassmannFunction")
        .def(py::init<AlgebraShape>())
        .def("get", [](const GrassmannFunction& f, std::uint32_t m) { return f.at(m); })
        .def("set",
             [](GrassmannFunction& f, std::uint32_t m, cplx v) { f[m] = v; })
        .def("max_abs", &GrassmannFunction::max_abs)
        .def("scalar", &GrassmannFunction::scalar)
        .def("component", &GrassmannFunction::component);
    py::class_<Pairing>(m, "Pairing")
        .def_static("zero", &Pairing::zero)
        .def("set", &Pairing::set)
        .def("at", &Pairing::at)
        .def("__add__", [](const Pairing& a, const Pairing& b) { return a + b; });
    py::class_<SourceCoupling>(m, "SourceCoupling")
        .def(py::init<>())
        .def("add", [](SourceCoupling& s, int phi, int zeta, cplx w) {
            s.terms.push_back({phi, zeta, w});
        });
    m.def("gr_mul", &gr_mul);
    m.def("gr_exp", &gr_exp);
    m.def("gr_log", &gr_log);
    m.def("gaussian_integral_zeta", &gaussian_integral_zeta);
    m.def("gaussian_convolve", &gaussian_convolve);
    m.def("wick_order", &wick_order);
    m.def(
        "omega_tilde",
        [](const GrassmannFunction& w, const Pairing& c, const SourceCoupling& j,
           bool scalar_normalization) {
            return omega_tilde(w, c, j,
                               scalar_normalization ? ZNormalization::Scalar
                                                    : ZNormalization::PhiDependent);
        },
        py::arg("w"), py::arg("pairing"), py::arg("source"),
        py::arg("scalar_normalization") = true);

    // ---- high level runs
    m.def("default_config", [] { return RunConfig::defaults().to_json_text(); });
    m.def("validate_config", &validate_summary, py::arg("config_text") = "");
    m.def("flow_summary", &flow_summary, py::arg("config_text") = "",
          "run the recursion driver and return the audit summary as JSON");
    m.def(
        "pp_scan",
        [](const std::string& dispersion, double M, double aleph,
           std::vector<int> scales) {
            ScaleParams sp;
            sp.M = M;
            sp.aleph = aleph;
            auto rows = pp_suppression_scan(dispersion, sp, scales, 1, 1.0);
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["j"] = r.j;
                d["norm_pp"] = r.norm_pp;
                d["norm_full"] = r.norm_full;
                out.append(d);
            }
            return out;
        },
        py::arg("dispersion"), py::arg("M") = 2.0, py::arg("aleph") = 0.6,
        py::arg("scales") = std::vector<int>{2, 3, 4});
}
