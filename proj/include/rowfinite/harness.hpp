#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rowfinite/integrator.hpp"

namespace rowfinite {

/// Sources of the quenched configuration in an experiment plan.
struct GeometrySource {
    enum class Kind { Lattice, Poisson, File };
    Kind kind = Kind::Lattice;
    int dim = 1;
    int extent = 8;
    double spacing = 1.0;
    double intensity = 1.0;
    double box_halfwidth = 10.0;
    double radius = 1.0;
    std::uint64_t seed = 1;
    std::string file;
    std::size_t max_points = kDefaultMaxPoints;

    Configuration generate() const;
    nlohmann::json to_json() const;
    static GeometrySource from_json(const nlohmann::json& j);
};

/// Deterministic initial state: per-component uniform in [-amplitude,
/// amplitude], scaled by w(|x|)^alpha so that ||q0||_alpha stays O(amplitude).
struct InitialState {
    double amplitude = 1.0;
    double alpha = 0.0;
    std::uint64_t seed = 1;

    std::vector<double> build(const Configuration& config, int state_dim,
                              const WeightFunction& w) const;
    nlohmann::json to_json() const;
    static InitialState from_json(const nlohmann::json& j);
};

/// Everything one orchestrated experiment needs.
struct ExperimentPlan {
    GeometrySource geometry;
    ModelSpec model;
    WeightPair pair;
    InitialState initial;
    double C = 0.0;          // dissipativity constant; 0 = derive (closed form or calibration)
    int m = 1;
    double p = 2.0;
    double alpha = 0.1;
    double beta = 0.5;
    int j = 2;
    double T = 2.0;
    Stepping stepping = FixedStep{1e-3};
    int n_records = 21;
    std::vector<double> ladder_radii = {4, 8, 16, 32};
    double window_radius = 2.0;
    std::optional<Volume> volume;  // single-run cutoff; default = whole box

    /// The C actually used: explicit value, else closed form, else calibrated
    /// on sampled states (initial + random perturbations).
    double resolve_C(const Configuration& config) const;
};

struct ConvergenceStep {
    double volume_lo = 0.0, volume_hi = 0.0;
    double sup_difference = 0.0;  // sup over t <= T and window points
};

struct ConvergenceReport {
    std::vector<ConvergenceStep> steps;
    std::vector<std::int32_t> window_points;
    bool monotone_decay = true;
    double first = 0.0, last = 0.0;
    nlohmann::json to_json() const;
};

/// Integrates the plan on every ladder volume and tabulates pairwise
/// sup-differences over the observation window.
ConvergenceReport convergence_study(const ExperimentPlan& plan);

struct UniquenessReport {
    std::vector<double> times;
    std::vector<std::vector<double>> delta;  // per n = 1..N, per time
    double budget = 0.0;
    bool pass = true;
    nlohmann::json to_json() const;
};

/// delta_n(t) = sup_{|x| <= n r} |q^(1) - q^(2)| for two runs from the same
/// initial data: same model, step dt vs dt/2 (an empirical echo of the
/// uniqueness statement, not a proof).
UniquenessReport uniqueness_probe(const ExperimentPlan& plan, int n_shells,
                                  std::optional<double> budget = std::nullopt);

/// Which checks a verify run executes.
struct ChecksSelect {
    bool growth = true;
    bool op_norm = true;
    bool dissipativity = true;
    bool comparison = true;
    bool norm_growth = true;
    bool uniqueness = true;
    bool convergence = true;
    bool bounded_fixed_space = false;  // single-space norm probe (bounded-degree setups)

    bool any() const {
        return growth || op_norm || dissipativity || comparison || norm_growth || uniqueness ||
               convergence || bounded_fixed_space;
    }
};

struct CheckRun {
    nlohmann::json report;
    Trajectory trajectory;  // populated when a check integrated the system
    ConfigPtr config;
    RecordSpec record;
    bool pass = true;
};

/// Fills in configuration-dependent weight parameters (log / loglog front
/// factors) so that n_x <= z(|x|) holds on this concrete configuration.
void calibrate_pair(WeightPair& pair, const Configuration& config);

/// Runs the selected checks for the plan; the report lists one entry per
/// executed check.
CheckRun run_checks(const ExperimentPlan& plan, const ChecksSelect& sel);

/// Canned end-to-end scenarios wiring weights, geometry and model defaults.
enum class ScenarioName { MinGrowth, MaxGrowth, MediumGrowth, Flocking };

ScenarioName scenario_from_string(const std::string& s);
std::string scenario_to_string(ScenarioName name);

ExperimentPlan scenario_plan(ScenarioName name);

/// Runs the scenario's full check battery; returns the consolidated report
/// and (optionally) writes the JSON/CSV bundle under out_dir.
nlohmann::json run_scenario(ScenarioName name, const std::optional<std::string>& out_dir);

/// One row per (time, point): t, point_id, state components, L. Floats are
/// printed with 17 significant digits so files diff byte-for-byte.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Configuration& config);

/// Norm traces plus step diagnostics, without timestamps.
nlohmann::json trajectory_summary(const Trajectory& traj, const RecordSpec& record);

}  // namespace rowfinite
