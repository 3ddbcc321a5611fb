#include "rowfinite/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace rowfinite::cli {

namespace {

void reject_unknown(const nlohmann::json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

Stepping parse_stepping(const nlohmann::json& j) {
    const std::string scheme = j.value("scheme", "rk4");
    if (scheme == "rk4") {
        FixedStep fs;
        fs.dt = j.value("dt", 1e-3);
        if (fs.dt <= 0) throw ConfigError("integration: dt must be > 0");
        return fs;
    }
    if (scheme == "rk45") {
        AdaptiveStep as;
        as.rel_tol = j.value("rel_tol", 1e-8);
        as.abs_tol = j.value("abs_tol", 1e-10);
        as.dt_initial = j.value("dt", 1e-3);
        if (as.rel_tol <= 0 || as.abs_tol <= 0)
            throw ConfigError("integration: tolerances must be > 0");
        return as;
    }
    throw ConfigError("integration: unknown scheme " + scheme);
}

}  // namespace

RunConfig RunConfig::parse(const nlohmann::json& j) {
    RunConfig rc;
    reject_unknown(j, "run config",
                   {"schema", "geometry", "weights", "model", "operator", "integration", "ladder",
                    "checks", "output"});
    rc.schema = j.value("schema", std::string{});
    if (rc.schema != "rowfinite-run/1")
        throw ConfigError("run config: schema must be \"rowfinite-run/1\"");

    {
        const auto& g = j.at("geometry");
        reject_unknown(g, "geometry",
                       {"generator", "file", "dim", "extent", "spacing", "intensity",
                        "box_halfwidth", "radius", "seed", "max_points"});
        rc.plan.geometry = GeometrySource::from_json(g);
    }
    {
        const auto& w = j.at("weights");
        reject_unknown(w, "weights", {"w", "z", "alpha", "beta", "calibrate_z"});
        rc.plan.pair.w = WeightFunction::from_json(w.at("w"));
        rc.plan.pair.z = WeightFunction::from_json(w.at("z"));
        rc.plan.alpha = w.value("alpha", 0.1);
        rc.plan.beta = w.value("beta", 0.5);
        rc.calibrate_z = w.value("calibrate_z", false);
        if (rc.plan.alpha <= 0 || rc.plan.beta <= rc.plan.alpha)
            throw ConfigError("weights: need 0 < alpha < beta");
    }
    {
        const auto& m = j.at("model");
        reject_unknown(m, "model",
                       {"variant", "spin_dim", "potential", "kernel", "influence",
                        "normalization"});
        rc.plan.model = ModelSpec::from_json(m);
        rc.plan.j = rc.plan.model.lyap_j();
        if (rc.plan.beta <= rc.plan.j * rc.plan.alpha)
            throw ConfigError("weights: need beta > j*alpha for the growth bound");
    }
    if (j.contains("operator")) {
        const auto& op = j.at("operator");
        reject_unknown(op, "operator", {"C", "m", "p"});
        rc.plan.C = op.value("C", 0.0);
        rc.plan.m = op.value("m", 1);
        rc.plan.p = op.value("p", 2.0);
        if (rc.plan.C < 0) throw ConfigError("operator: C must be >= 0 (0 = derive)");
        if (rc.plan.m < 1) throw ConfigError("operator: m must be >= 1");
        if (rc.plan.p <= 1) throw ConfigError("operator: p must be > 1");
    }
    if (j.contains("integration")) {
        const auto& it = j.at("integration");
        reject_unknown(it, "integration",
                       {"scheme", "dt", "rel_tol", "abs_tol", "t_final", "records", "volume",
                        "initial"});
        rc.plan.stepping = parse_stepping(it);
        rc.plan.T = it.value("t_final", 2.0);
        if (rc.plan.T <= 0) throw ConfigError("integration: t_final must be > 0");
        rc.plan.n_records = it.value("records", 21);
        if (rc.plan.n_records < 2) throw ConfigError("integration: records must be >= 2");
        if (it.contains("volume")) rc.plan.volume = Volume::from_json(it.at("volume"));
        if (it.contains("initial")) {
            reject_unknown(it.at("initial"), "initial", {"amplitude", "alpha", "seed"});
            rc.plan.initial = InitialState::from_json(it.at("initial"));
        }
    }
    if (j.contains("ladder")) {
        const auto& ld = j.at("ladder");
        reject_unknown(ld, "ladder", {"radii", "window_radius"});
        rc.plan.ladder_radii = ld.at("radii").get<std::vector<double>>();
        rc.plan.window_radius = ld.value("window_radius", 2.0);
        for (std::size_t k = 1; k < rc.plan.ladder_radii.size(); ++k)
            if (rc.plan.ladder_radii[k] <= rc.plan.ladder_radii[k - 1])
                throw ConfigError("ladder: radii must be strictly increasing");
    }
    rc.checks = ChecksSelect{};
    rc.checks.growth = rc.checks.op_norm = rc.checks.dissipativity = rc.checks.comparison =
        rc.checks.norm_growth = rc.checks.uniqueness = rc.checks.convergence = false;
    if (j.contains("checks")) {
        const auto& ck = j.at("checks");
        reject_unknown(ck, "checks",
                       {"growth", "op_norm", "dissipativity", "comparison", "norm_growth",
                        "uniqueness", "convergence", "bounded_fixed_space"});
        rc.checks.growth = ck.value("growth", false);
        rc.checks.op_norm = ck.value("op_norm", false);
        rc.checks.dissipativity = ck.value("dissipativity", false);
        rc.checks.comparison = ck.value("comparison", false);
        rc.checks.norm_growth = ck.value("norm_growth", false);
        rc.checks.uniqueness = ck.value("uniqueness", false);
        rc.checks.convergence = ck.value("convergence", false);
        rc.checks.bounded_fixed_space = ck.value("bounded_fixed_space", false);
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        reject_unknown(o, "output", {"dir", "csv", "json"});
        rc.out_dir = o.value("dir", "out");
        rc.write_csv = o.value("csv", true);
        rc.write_json = o.value("json", true);
    }
    return rc;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open run config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run config parse error: ") + e.what());
    }
    return parse(j);
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os << text;
}

struct GenerateArgs {
    bool lattice = false, poisson = false;
    int dim = 1;
    int extent = -1;
    double spacing = 1.0;
    double intensity = 0.0;
    double box_halfwidth = 0.0;
    double radius = -1.0;
    std::uint64_t seed = 1;
    std::size_t max_points = kDefaultMaxPoints;
    std::string out;
};

int run_generate(const GenerateArgs& a) {
    if (a.lattice == a.poisson) {
        std::cerr << "generate: pass exactly one of --lattice / --poisson\n";
        return kExitUsage;
    }
    Configuration cfg;
    if (a.lattice) {
        if (a.extent < 0) {
            std::cerr << "generate: --extent is required with --lattice\n";
            return kExitUsage;
        }
        cfg = gen_lattice(a.dim, a.extent, a.spacing, a.radius, a.max_points);
    } else {
        if (a.intensity <= 0 || a.box_halfwidth <= 0) {
            std::cerr << "generate: --intensity and --box are required with --poisson\n";
            return kExitUsage;
        }
        cfg = gen_poisson(a.dim, a.intensity, Box::centered(a.dim, a.box_halfwidth), a.radius,
                          a.seed, a.max_points);
    }
    write_text(a.out, cfg.to_json().dump(2) + "\n");
    std::cout << "wrote " << cfg.size() << " points to " << a.out << "\n";
    return kExitOk;
}

// Prepares the plan shared by simulate / linear-solve / verify / study.
struct LoadedRun {
    RunConfig rc;
    ConfigPtr config;
};

LoadedRun prepare(const std::string& config_path) {
    LoadedRun lr{RunConfig::load(config_path), nullptr};
    lr.config = std::make_shared<const Configuration>(lr.rc.plan.geometry.generate());
    if (lr.rc.calibrate_z) calibrate_pair(lr.rc.plan.pair, *lr.config);
    return lr;
}

int run_simulate(const std::string& config_path) {
    auto lr = prepare(config_path);
    auto& plan = lr.rc.plan;
    const int sd = plan.model.state_dim();
    const auto q0 = plan.initial.build(*lr.config, sd, plan.pair.w);
    RecordSpec rec;
    rec.n_records = plan.n_records;
    rec.norms.push_back({plan.pair.w, plan.beta});
    auto traj =
        integrate_cutoff(plan.model, lr.config, plan.volume, q0, plan.T, plan.stepping, rec);
    if (lr.rc.write_csv) {
        std::ostringstream os;
        write_trajectory_csv(os, traj, *lr.config);
        write_text(lr.rc.out_dir + "/trajectory.csv", os.str());
    }
    if (lr.rc.write_json) {
        auto summary = trajectory_summary(traj, rec);
        summary["schema"] = "rowfinite-summary/1";
        write_text(lr.rc.out_dir + "/summary.json", summary.dump(2) + "\n");
    }
    std::cout << "simulated " << lr.config->size() << " points to t=" << plan.T << "\n";
    return kExitOk;
}

int run_linear_solve(const std::string& config_path) {
    auto lr = prepare(config_path);
    auto& plan = lr.rc.plan;
    const double Cval = plan.resolve_C(*lr.config);
    auto A = build_A(lr.config, Cval, plan.m);
    auto A_cut = plan.volume ? cutoff(A, *plan.volume) : A;

    std::vector<double> q0 = plan.initial.build(*lr.config, plan.model.state_dim(), plan.pair.w);
    std::vector<double> L0(lr.config->size());
    lyapunov(plan.model, *lr.config, q0, L0);

    const auto kc = operator_bound_constants(A, plan.pair, plan.p, plan.beta);
    const int jj = plan.model.lyap_j();
    SeriesStepping ss{lemma_majorant_params(kc, jj * plan.alpha, plan.beta), plan.pair.w, 1e-10,
                      200000};
    RecordSpec rec;
    rec.n_records = plan.n_records;
    auto psi = comparison_trajectory(A_cut, L0, plan.T, ss, rec);

    if (lr.rc.write_csv) {
        std::ostringstream os;
        write_trajectory_csv(os, psi, *lr.config);
        write_text(lr.rc.out_dir + "/psi.csv", os.str());
        std::ostringstream ol;
        A_cut.export_coordinate_list(ol);
        write_text(lr.rc.out_dir + "/operator.txt", ol.str());
    }
    if (lr.rc.write_json) {
        const auto ot = order_and_type(ss.params);
        const double pexp = 1.0 / (plan.p - 1.0);
        const double gap = plan.beta - jj * plan.alpha;
        nlohmann::json diag;
        diag["schema"] = "rowfinite-linear/1";
        diag["C"] = Cval;
        diag["terms_used_max"] = psi.diagnostics.steps;
        diag["tail_bound_max"] = psi.diagnostics.max_error_estimate;
        diag["order"] = ot.rho;
        diag["type"] = ot.sigma;
        // the two published forms of the type constant (exponential-weight
        // specialisation vs the shift-factor route); they differ by design
        diag["type_exp_weight"] =
            std::pow(kc.B_op, ot.rho) *
            std::exp(ot.rho * (plan.beta * lr.config->radius + plan.beta - jj * plan.alpha + 1)) /
            (std::exp(1.0) * ot.rho) * std::pow(gap, -pexp);
        diag["type_shift_weight"] = std::pow(kc.B_op, ot.rho) *
                                    std::pow(kc.w_r, plan.beta * ot.rho) *
                                    std::exp(ot.rho - 1.0) / ot.rho * std::pow(gap, -pexp);
        diag["constants"] = {{"B_op", kc.B_op}, {"w_r", kc.w_r}, {"z_r", kc.z_r},
                             {"D", kc.D},       {"M", kc.M},     {"p", kc.p}};
        write_text(lr.rc.out_dir + "/linear.json", diag.dump(2) + "\n");
    }
    std::cout << "linear comparison system solved on " << lr.config->size() << " points\n";
    return kExitOk;
}

int run_verify_config(const std::string& config_path) {
    auto lr = prepare(config_path);
    if (!lr.rc.checks.any()) {
        nlohmann::json rep = {{"schema", "rowfinite-report/1"},
                              {"checks", nlohmann::json::array()},
                              {"pass", true}};
        write_text(lr.rc.out_dir + "/report.json", rep.dump(2) + "\n");
        std::cout << "no checks enabled\n";
        return kExitOk;
    }
    auto run = run_checks(lr.rc.plan, lr.rc.checks);
    write_text(lr.rc.out_dir + "/report.json", run.report.dump(2) + "\n");
    for (const auto& c : run.report.at("checks"))
        std::cout << (c.at("pass").get<bool>() ? "[PASS] " : "[FAIL] ")
                  << c.at("name").get<std::string>() << "\n";
    return run.pass ? kExitOk : kExitCheckFailed;
}

int run_verify_scenario(const std::string& name, const std::string& out_dir) {
    auto report = run_scenario(scenario_from_string(name), out_dir);
    for (const auto& c : report.at("checks"))
        std::cout << (c.at("pass").get<bool>() ? "[PASS] " : "[FAIL] ")
                  << c.at("name").get<std::string>() << "\n";
    return report.at("pass").get<bool>() ? kExitOk : kExitCheckFailed;
}

int run_study(const std::string& config_path, const std::string& scenario,
              const std::string& out_dir_flag) {
    ExperimentPlan plan;
    std::string out_dir = out_dir_flag;
    if (!scenario.empty()) {
        plan = scenario_plan(scenario_from_string(scenario));
        auto config = std::make_shared<const Configuration>(plan.geometry.generate());
        calibrate_pair(plan.pair, *config);
    } else {
        auto lr = prepare(config_path);
        plan = lr.rc.plan;
        plan.pair = lr.rc.plan.pair;
        if (out_dir.empty()) out_dir = lr.rc.out_dir;
    }
    if (out_dir.empty()) out_dir = "out";
    auto conv = convergence_study(plan);
    auto uniq = uniqueness_probe(plan, 2);
    nlohmann::json rep;
    rep["schema"] = "rowfinite-study/1";
    rep["convergence"] = conv.to_json();
    rep["uniqueness"] = uniq.to_json();
    write_text(out_dir + "/study.json", rep.dump(2) + "\n");
    std::cout << "convergence: first=" << format_g17(conv.first)
              << " last=" << format_g17(conv.last) << (conv.monotone_decay ? " (monotone)" : "")
              << "\n";
    return kExitOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"row-finite spin system simulator and bound checker"};
    app.require_subcommand(1);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "write a configuration JSON");
    gen->add_flag("--lattice", ga.lattice, "integer lattice generator");
    gen->add_flag("--poisson", ga.poisson, "Poisson point generator");
    gen->add_option("--dim", ga.dim, "space dimension")->check(CLI::PositiveNumber);
    gen->add_option("--extent", ga.extent, "lattice extent per axis");
    gen->add_option("--spacing", ga.spacing, "lattice spacing");
    gen->add_option("--intensity", ga.intensity, "Poisson intensity (points per unit volume)");
    gen->add_option("--box", ga.box_halfwidth, "box half-width (centered at the origin)");
    gen->add_option("--radius", ga.radius, "interaction radius")->required();
    gen->add_option("--seed", ga.seed, "random seed");
    gen->add_option("--max-points", ga.max_points, "resource guard on the point count");
    gen->add_option("--out", ga.out, "output path")->required();

    std::string sim_config;
    auto* sim = app.add_subcommand("simulate", "integrate the cutoff system");
    sim->add_option("config", sim_config, "run config JSON")->required();

    std::string lin_config;
    auto* lin = app.add_subcommand("linear-solve", "solve the linear comparison system");
    lin->add_option("config", lin_config, "run config JSON")->required();

    std::string ver_config, ver_scenario, ver_out = "out";
    auto* ver = app.add_subcommand("verify", "run the enabled bound checks");
    ver->add_option("config", ver_config, "run config JSON");
    ver->add_option("--scenario", ver_scenario,
                    "canned scenario: min_growth|max_growth|medium_growth|flocking");
    ver->add_option("--out", ver_out, "output directory for scenario reports");

    std::string st_config, st_scenario, st_out;
    auto* st = app.add_subcommand("study", "convergence ladder + uniqueness probe");
    st->add_option("config", st_config, "run config JSON");
    st->add_option("--scenario", st_scenario, "canned scenario name");
    st->add_option("--out", st_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return run_generate(ga);
        if (sim->parsed()) return run_simulate(sim_config);
        if (lin->parsed()) return run_linear_solve(lin_config);
        if (ver->parsed()) {
            if (!ver_scenario.empty()) return run_verify_scenario(ver_scenario, ver_out);
            if (ver_config.empty()) {
                std::cerr << "verify: pass a config path or --scenario\n";
                return kExitUsage;
            }
            return run_verify_config(ver_config);
        }
        if (st->parsed()) {
            if (st_config.empty() && st_scenario.empty()) {
                std::cerr << "study: pass a config path or --scenario\n";
                return kExitUsage;
            }
            return run_study(st_config, st_scenario, st_out);
        }
    } catch (const ResourceLimitError& e) {
        std::cerr << "resource guard: " << e.what() << "\n";
        return kExitResource;
    } catch (const SolverError& e) {
        std::cerr << "solver abort: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ConfigError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace rowfinite::cli
