#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "rowfinite/harness.hpp"

namespace py = pybind11;
using namespace rowfinite;

namespace {

// pybind11 holders require non-const element types; the core API hands out
// shared_ptr<const Configuration>, so the binding carries it inside a wrapper.
struct ConfigHandle {
    ConfigPtr ptr;
    const Configuration& ref() const { return *ptr; }
};

ConfigHandle shared(Configuration cfg) {
    return ConfigHandle{std::make_shared<const Configuration>(std::move(cfg))};
}

py::dict op_norm_dict(const OpNormReport& r) {
    py::dict d;
    d["estimate"] = r.estimate;
    d["bound"] = r.bound;
    d["ratio"] = r.ratio;
    d["violation"] = r.violation;
    d["B_op"] = r.constants.B_op;
    d["w_r"] = r.constants.w_r;
    d["z_r"] = r.constants.z_r;
    d["D"] = r.constants.D;
    return d;
}

Stepping make_stepping(const std::string& scheme, double dt, double rel_tol, double abs_tol) {
    if (scheme == "rk4") return FixedStep{dt};
    if (scheme == "rk45") return AdaptiveStep{rel_tol, abs_tol, dt};
    throw ConfigError("unknown scheme: " + scheme);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "row-finite spin systems: quenched graphs, weighted scales, the "
              "linear comparison operator and its series solution, cutoff dynamics";

    py::register_exception<ResourceLimitError>(m, "ResourceLimitError");
    py::register_exception<SolverError>(m, "SolverSolverError");
    py::register_exception<ConfigError>(m, "ConfigError");

    // ---- geometry ----------------------------------------------------------
    py::class_<ConfigHandle>(m, "Configuration")
        .def_property_readonly("dim", [](const ConfigHandle& c) { return c.ref().dim; })
        .def_property_readonly("radius", [](const ConfigHandle& c) { return c.ref().radius; })
        .def_property_readonly("size", [](const ConfigHandle& c) { return c.ref().size(); })
        .def_property_readonly("counts", [](const ConfigHandle& c) { return c.ref().counts; })
        .def_property_readonly("neighbors", [](const ConfigHandle& c) { return c.ref().neighbors; })
        .def_property_readonly("radial", [](const ConfigHandle& c) { return c.ref().radial; })
        .def_property_readonly("points",
                               [](const ConfigHandle& c) {
                                   std::vector<std::vector<double>> pts;
                                   pts.reserve(c.ref().size());
                                   for (std::size_t i = 0; i < c.ref().size(); ++i) {
                                       auto p = c.ref().point(i);
                                       pts.emplace_back(p.begin(), p.end());
                                   }
                                   return pts;
                               })
        .def("to_json", [](const ConfigHandle& c) { return c.ref().to_json().dump(2); })
        .def_static("from_json", [](const std::string& text) {
            return shared(Configuration::from_json(nlohmann::json::parse(text)));
        });

    m.def(
        "gen_lattice",
        [](int dim, int extent, double spacing, double radius, std::size_t max_points) {
            return shared(gen_lattice(dim, extent, spacing, radius, max_points));
        },
        py::arg("dim"), py::arg("extent"), py::arg("spacing") = 1.0, py::arg("radius") = 1.0,
        py::arg("max_points") = kDefaultMaxPoints);
    m.def(
        "gen_poisson",
        [](int dim, double intensity, double box_halfwidth, double radius, std::uint64_t seed,
           std::size_t max_points) {
            return shared(gen_poisson(dim, intensity, Box::centered(dim, box_halfwidth), radius,
                                      seed, max_points));
        },
        py::arg("dim"), py::arg("intensity"), py::arg("box_halfwidth"), py::arg("radius"),
        py::arg("seed"), py::arg("max_points") = kDefaultMaxPoints);

    m.def("check_growth", [](const ConfigHandle& cfg, const WeightFunction& z) {
        auto rep = check_growth(cfg.ref(), z);
        py::dict d;
        d["ok"] = rep.ok();
        d["max_ratio"] = rep.max_ratio;
        std::vector<py::tuple> v;
        for (const auto& viol : rep.violations)
            v.push_back(py::make_tuple(viol.index, viol.count, viol.allowed));
        d["violations"] = v;
        return d;
    });
    m.def("calibrate_front_factor", [](const ConfigHandle& cfg, const WeightFunction& shape) {
        return calibrate_front_factor(cfg.ref(), shape);
    });

    // ---- scales ------------------------------------------------------------
    py::class_<WeightFunction>(m, "WeightFunction")
        .def("__call__", &WeightFunction::operator())
        .def_property_readonly("family", &WeightFunction::family_name)
        .def("floored", &WeightFunction::floored)
        .def("to_json", [](const WeightFunction& w) { return w.to_json().dump(); });
    m.def("constant_weight", &WeightFunction::constant, py::arg("c"));
    m.def("linear_weight", &WeightFunction::linear);
    m.def("exp_weight", &WeightFunction::exponential, py::arg("nu"));
    m.def("log_weight", &WeightFunction::log, py::arg("a"));
    m.def("loglog_weight", &WeightFunction::loglog, py::arg("upsilon"));
    m.def("loglog_of", &WeightFunction::loglog_of, py::arg("upsilon"), py::arg("base"));

    py::class_<WeightPair>(m, "WeightPair")
        .def(py::init([](WeightFunction w, WeightFunction z) {
                 return WeightPair{std::move(w), std::move(z), {}};
             }),
             py::arg("w"), py::arg("z"))
        .def_readonly("w", &WeightPair::w)
        .def_readonly("z", &WeightPair::z);
    m.def("loglog_pair", &loglog_pair, py::arg("w_base"), py::arg("upsilon"));

    m.def(
        "shift_ratio_sup",
        [](const WeightFunction& f, double tau, double s_max) {
            auto r = shift_ratio_sup(f, tau, s_max);
            py::dict d;
            d["value"] = r.value;
            d["grid_value"] = r.grid_value;
            d["argmax"] = r.argmax;
            d["divergence_flag"] = r.divergence_flag;
            if (r.closed_form) d["closed_form"] = *r.closed_form;
            return d;
        },
        py::arg("f"), py::arg("tau"), py::arg("s_max") = 1e6);
    m.def(
        "admissibility_margin",
        [](const WeightPair& pair, double alpha, double mu) {
            auto r = admissibility_margin(pair, alpha, mu);
            py::dict d;
            d["sup_value"] = r.sup_value;
            d["argmax"] = r.argmax;
            d["divergence_flag"] = r.divergence_flag;
            if (r.analytic_bound) d["analytic_bound"] = *r.analytic_bound;
            return d;
        },
        py::arg("pair"), py::arg("alpha"), py::arg("mu"));
    m.def(
        "measure_D",
        [](const WeightPair& pair, double beta, double mu) {
            auto c = measure_D(pair, beta, mu);
            py::dict d;
            d["D"] = c.D;
            d["beta"] = c.beta;
            d["mu"] = c.mu;
            d["divergence_flag"] = c.divergence_flag;
            return d;
        },
        py::arg("pair"), py::arg("beta"), py::arg("mu"));
    m.def(
        "scale_norm",
        [](const std::vector<double>& values, int nu, const WeightFunction& w, double alpha,
           const ConfigHandle& cfg) { return scale_norm(values, nu, w, alpha, cfg.ref()); },
        py::arg("values"), py::arg("nu"), py::arg("w"), py::arg("alpha"), py::arg("config"));
    m.def("d_mu", &d_mu, py::arg("mu"));

    // ---- linear operator ---------------------------------------------------
    py::class_<Volume>(m, "Volume")
        .def_static("ball", &Volume::ball, py::arg("radius"))
        .def_static("box_centered", [](int dim, double halfwidth) {
            return Volume::box(Box::centered(dim, halfwidth));
        });

    py::class_<RowFiniteOperator>(m, "RowFiniteOperator")
        .def_property_readonly("C", [](const RowFiniteOperator& A) { return A.C; })
        .def_property_readonly("m", [](const RowFiniteOperator& A) { return A.m; })
        .def_property_readonly("size", &RowFiniteOperator::size)
        .def("is_zero", &RowFiniteOperator::is_zero)
        .def("max_row_sum", &RowFiniteOperator::max_row_sum)
        .def("apply",
             [](const RowFiniteOperator& A, const std::vector<double>& x) {
                 std::vector<double> y(x.size());
                 A.apply(x, y);
                 return y;
             })
        .def("exact_norm", &RowFiniteOperator::exact_norm, py::arg("w"), py::arg("alpha_from"),
             py::arg("alpha_to"))
        .def("coordinate_list", [](const RowFiniteOperator& A) {
            std::ostringstream os;
            A.export_coordinate_list(os);
            return os.str();
        });

    m.def(
        "build_A",
        [](const ConfigHandle& cfg, double C, int mm) { return build_A(cfg.ptr, C, mm); },
        py::arg("config"), py::arg("C"), py::arg("m"));
    m.def("cutoff", &cutoff, py::arg("A"), py::arg("volume"));
    m.def(
        "empirical_op_norm",
        [](const RowFiniteOperator& A, const WeightPair& pair, double alpha_lo, double alpha_hi,
           double p, double beta, int trials, std::uint64_t seed) {
            return op_norm_dict(
                empirical_op_norm(A, pair, alpha_lo, alpha_hi, p, beta, trials, seed));
        },
        py::arg("A"), py::arg("pair"), py::arg("alpha_lo"), py::arg("alpha_hi"), py::arg("p") = 2.0,
        py::arg("beta") = 1.0, py::arg("trials") = 16, py::arg("seed") = 1);

    py::class_<MajorantParams>(m, "MajorantParams")
        .def_static("from_c", &MajorantParams::from_c, py::arg("c"), py::arg("q"),
                    py::arg("alpha"), py::arg("beta"))
        .def_static("from_B", &MajorantParams::from_B, py::arg("B"), py::arg("q"),
                    py::arg("alpha"), py::arg("beta"))
        .def_property_readonly("B", &MajorantParams::B)
        .def_readonly("c", &MajorantParams::c)
        .def_readonly("q", &MajorantParams::q)
        .def_readonly("alpha", &MajorantParams::alpha)
        .def_readonly("beta", &MajorantParams::beta);

    m.def(
        "lemma_majorant_params",
        [](const RowFiniteOperator& A, const WeightPair& pair, double alpha, double beta,
           double p) {
            return lemma_majorant_params(operator_bound_constants(A, pair, p, beta), alpha, beta);
        },
        py::arg("A"), py::arg("pair"), py::arg("alpha"), py::arg("beta"), py::arg("p") = 2.0);
    m.def(
        "ovsyannikov_series",
        [](const RowFiniteOperator& A, const std::vector<double>& u0, double t,
           const MajorantParams& params, const WeightFunction& w, double tol, int max_terms) {
            auto r = ovsyannikov_series(A, u0, t, params, w, tol, max_terms);
            py::dict d;
            d["u"] = r.u;
            d["terms_used"] = r.terms_used;
            d["tail_bound"] = r.tail_bound;
            return d;
        },
        py::arg("A"), py::arg("u0"), py::arg("t"), py::arg("params"), py::arg("w"),
        py::arg("tol") = 1e-10, py::arg("max_terms") = 100000);
    m.def("order_and_type", [](const MajorantParams& p) {
        auto ot = order_and_type(p);
        return py::make_tuple(ot.rho, ot.sigma);
    });
    m.def(
        "empirical_order",
        [](const MajorantParams& p, const std::vector<double>& grid) {
            auto r = empirical_order(p, grid);
            py::dict d;
            d["rho_hat"] = r.rho_hat;
            d["rho_analytic"] = r.rho_analytic;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("params"), py::arg("t_grid"));
    m.def("log_majorant", &log_majorant, py::arg("params"), py::arg("t"),
          py::arg("direct_cap") = 200000);

    // ---- models -------------------------------------------------------------
    py::class_<PotentialSpec>(m, "PotentialSpec")
        .def_static("quadratic", &PotentialSpec::quadratic, py::arg("a"), py::arg("b") = 0.0)
        .def_static("even_power", &PotentialSpec::even_power, py::arg("coeff"), py::arg("k"))
        .def_property_readonly("j", &PotentialSpec::j);
    py::class_<KernelSpec>(m, "KernelSpec")
        .def_static("none", &KernelSpec::none)
        .def_static("linear_pull", &KernelSpec::linear_pull, py::arg("J"))
        .def_static("difference", &KernelSpec::difference, py::arg("Jv"), py::arg("k") = 1);
    py::class_<InfluenceSpec>(m, "InfluenceSpec")
        .def_static("constant", &InfluenceSpec::constant, py::arg("phi0"))
        .def_static("rational_decay", &InfluenceSpec::rational_decay, py::arg("phi0"),
                    py::arg("theta"));

    py::enum_<Normalization>(m, "Normalization")
        .value("per_count", Normalization::PerCount)
        .value("self_normalized", Normalization::SelfNormalized);

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("gradient_pair", &ModelSpec::gradient_pair, py::arg("potential"),
                    py::arg("kernel"), py::arg("spin_dim") = 1)
        .def_static("hamiltonian", &ModelSpec::hamiltonian, py::arg("potential"),
                    py::arg("kernel"), py::arg("spin_dim") = 1)
        .def_static("self_align", &ModelSpec::self_align, py::arg("influence"),
                    py::arg("normalization") = Normalization::PerCount, py::arg("spin_dim") = 1)
        .def_static("flocking", &ModelSpec::flocking, py::arg("influence"),
                    py::arg("normalization") = Normalization::PerCount, py::arg("spin_dim") = 1)
        .def_property_readonly("state_dim", &ModelSpec::state_dim)
        .def_property_readonly("spin_dim", [](const ModelSpec& s) { return s.spin_dim; })
        .def_property_readonly("variant", &ModelSpec::variant_name)
        .def("to_json", [](const ModelSpec& s) { return s.to_json().dump(); });

    m.def("rhs", [](const ModelSpec& model, const ConfigHandle& cfg, const std::vector<double>& q) {
        std::vector<double> out(q.size());
        rhs(model, cfg.ref(), q, out);
        return out;
    });
    m.def("lyapunov",
          [](const ModelSpec& model, const ConfigHandle& cfg, const std::vector<double>& q) {
              std::vector<double> out(cfg.ref().size());
              lyapunov(model, cfg.ref(), q, out);
              return out;
          });
    m.def("dissipativity_residual",
          [](const ModelSpec& model, const ConfigHandle& cfg, const std::vector<double>& q, double C,
             int mm) { return dissipativity_residual(model, cfg.ref(), q, C, mm); },
          py::arg("model"), py::arg("config"), py::arg("state"), py::arg("C"), py::arg("m") = 1);
    m.def("calibrate_C",
          [](const ModelSpec& model, const ConfigHandle& cfg,
             const std::vector<std::vector<double>>& states, int mm) {
              auto r = calibrate_C(model, cfg.ref(), states, mm);
              py::dict d;
              d["C"] = r.C;
              d["unbounded_flag"] = r.unbounded_flag;
              return d;
          },
          py::arg("model"), py::arg("config"), py::arg("states"), py::arg("m") = 1);
    m.def("closed_form_C", [](const ModelSpec& model) -> py::object {
        auto c = closed_form_C(model);
        if (!c) return py::none();
        return py::float_(*c);
    });
    m.def("grad_norm",
          [](const ModelSpec& model, const ConfigHandle& cfg, const std::vector<double>& q,
             std::int32_t i) { return grad_norm(model, cfg.ref(), q, i); });
    m.def("jacobian_block",
          [](const ModelSpec& model, const ConfigHandle& cfg, const std::vector<double>& q,
             std::int32_t i, std::int32_t j) {
              SmallMat blk;
              jacobian_block(model, cfg.ref(), q, i, j, blk);
              std::vector<std::vector<double>> out(blk.n, std::vector<double>(blk.n));
              for (int r = 0; r < blk.n; ++r)
                  for (int c = 0; c < blk.n; ++c) out[r][c] = blk(r, c);
              return out;
          });

    // ---- integrator ----------------------------------------------------------
    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("times", &Trajectory::times)
        .def_readonly("states", &Trajectory::states)
        .def_readonly("lyapunov", &Trajectory::lyapunov)
        .def_readonly("frozen", &Trajectory::frozen)
        .def_readonly("state_dim", &Trajectory::state_dim);

    m.def(
        "integrate_cutoff",
        [](const ModelSpec& model, const ConfigHandle& cfg, py::object volume,
           const std::vector<double>& q0, double T, const std::string& scheme, double dt,
           double rel_tol, double abs_tol, int records) {
            std::optional<Volume> vol;
            if (!volume.is_none()) vol = volume.cast<Volume>();
            RecordSpec rec;
            rec.n_records = records;
            return integrate_cutoff(model, cfg.ptr, vol, q0, T,
                                    make_stepping(scheme, dt, rel_tol, abs_tol), rec);
        },
        py::arg("model"), py::arg("config"), py::arg("volume"), py::arg("q0"), py::arg("T"),
        py::arg("scheme") = "rk4", py::arg("dt") = 1e-3, py::arg("rel_tol") = 1e-8,
        py::arg("abs_tol") = 1e-10, py::arg("records") = 21);
    m.def(
        "comparison_trajectory",
        [](const RowFiniteOperator& A, const std::vector<double>& L0, double T,
           const std::string& scheme, double dt, int records) {
            RecordSpec rec;
            rec.n_records = records;
            return comparison_trajectory(A, L0, T, Stepping{make_stepping(scheme, dt, 1e-8, 1e-10)},
                                         rec);
        },
        py::arg("A"), py::arg("L0"), py::arg("T"), py::arg("scheme") = "rk4",
        py::arg("dt") = 1e-3, py::arg("records") = 21);
    m.def(
        "comparison_series",
        [](const RowFiniteOperator& A, const std::vector<double>& L0, double T,
           const MajorantParams& params, const WeightFunction& w, double tol, int records) {
            RecordSpec rec;
            rec.n_records = records;
            SeriesStepping ss{params, w, tol, 200000};
            return comparison_trajectory(A, L0, T, ss, rec);
        },
        py::arg("A"), py::arg("L0"), py::arg("T"), py::arg("params"), py::arg("w"),
        py::arg("tol") = 1e-10, py::arg("records") = 21);
    m.def(
        "check_comparison",
        [](const Trajectory& traj, const Trajectory& psi, double tol) {
            auto r = check_comparison(traj, psi, tol);
            py::dict d;
            d["pass"] = r.pass;
            d["max_violation"] = r.max_violation;
            d["worst_time"] = r.worst_time;
            d["worst_point"] = r.worst_point;
            return d;
        },
        py::arg("trajectory"), py::arg("psi"), py::arg("tol") = 1e-6);
    m.def(
        "norm_growth_check",
        [](const Trajectory& traj, const WeightPair& pair, const ConfigHandle& cfg,
           const RowFiniteOperator& A, double alpha, double beta, int j, double p, double C1,
           double C3) {
            GrowthBoundConstants gc;
            gc.op = operator_bound_constants(A, pair, p, beta);
            gc.C1 = C1;
            gc.C3 = C3;
            gc.r = cfg.ref().radius;
            auto r = norm_growth_check(traj, pair, cfg.ref(), alpha, beta, j, gc);
            py::dict d;
            d["pass"] = r.pass;
            d["lhs"] = r.lhs;
            d["log_rhs"] = r.log_rhs;
            d["max_log_margin"] = r.max_log_margin;
            d["rho"] = r.rho;
            d["sigma_exp_weight"] = r.sigma_exp_weight;
            d["sigma_shift_weight"] = r.sigma_shift_weight;
            return d;
        },
        py::arg("trajectory"), py::arg("pair"), py::arg("config"), py::arg("A"), py::arg("alpha"),
        py::arg("beta"), py::arg("j"), py::arg("p") = 2.0, py::arg("C1") = 0.5,
        py::arg("C3") = 0.5);

    // ---- harness --------------------------------------------------------------
    m.def(
        "run_scenario",
        [](const std::string& name, py::object out_dir) {
            std::optional<std::string> dir;
            if (!out_dir.is_none()) dir = out_dir.cast<std::string>();
            return run_scenario(scenario_from_string(name), dir).dump();
        },
        py::arg("name"), py::arg("out_dir") = py::none());
}
