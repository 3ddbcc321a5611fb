#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rowfinite/linop.hpp"
#include "rowfinite/models.hpp"

namespace rowfinite {

struct FixedStep {
    double dt = 1e-3;
};

struct AdaptiveStep {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double dt_initial = 1e-3;
};

using Stepping = std::variant<FixedStep, AdaptiveStep>;

struct NormSpec {
    WeightFunction w;
    double beta = 1.0;
};

/// What to record along a run: n_records evenly spaced times in [0,T]
/// (always including both ends) and the scale norms to trace.
struct RecordSpec {
    int n_records = 21;
    std::vector<NormSpec> norms;
};

struct StepDiagnostics {
    std::vector<double> accepted_dt;
    double max_error_estimate = 0.0;  // adaptive only
    long steps = 0;
    long rejected = 0;
};

/// Time-sampled run: states per record time, per-point Lyapunov trace,
/// requested scale-norm traces, and the frozen mask of the cutoff.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;     // per time, size()*state_dim
    std::vector<std::uint8_t> frozen;            // per point
    std::vector<std::vector<double>> lyapunov;   // per time, per point
    std::vector<std::vector<double>> norm_trace; // per time, per NormSpec
    StepDiagnostics diagnostics;
    int state_dim = 1;

    std::size_t n_times() const { return times.size(); }
};

/// Integrates the cutoff system: points inside the volume evolve under the
/// model's rhs evaluated on the full state; points outside keep their initial
/// value bitwise (they still feed interactions). No volume = evolve all.
Trajectory integrate_cutoff(const ModelSpec& model, const ConfigPtr& config,
                            const std::optional<Volume>& volume, std::span<const double> q0,
                            double T, const Stepping& stepping, const RecordSpec& record);

struct SeriesStepping {
    MajorantParams params;
    WeightFunction w;
    double tol = 1e-10;
    int max_terms = 100000;
};

/// Solves dPsi/dt = A_cutoff Psi (Psi(0) = L0 >= 0) on the record grid,
/// either by the truncated series at each record time or by the same RK
/// schemes as the nonlinear runs.
Trajectory comparison_trajectory(const RowFiniteOperator& A_cutoff, std::span<const double> L0,
                                 double T, const std::variant<Stepping, SeriesStepping>& method,
                                 const RecordSpec& record);

struct ComparisonReport {
    double max_violation = 0.0;  // max over t,x of (L-Psi)^+ / (1+Psi)
    double worst_time = 0.0;
    std::int32_t worst_point = -1;
    double tol = 0.0;
    bool pass = true;
};

/// Checks 0 <= L_x(t) <= Psi_x(t) on matching grids, relative to 1+Psi.
ComparisonReport check_comparison(const Trajectory& traj, const Trajectory& psi,
                                  double tol_model = 1e-6);

/// Constants feeding the closed growth bound
/// ||q(t)||_beta <= C_p(alpha,beta;t)(||q0||_alpha^j + 1).
struct GrowthBoundConstants {
    OperatorBoundConstants op;  // B_op, w_r, p, D
    double C1 = 1.0;            // lower Lyapunov constant
    double C3 = 1.0;            // ||L(0)||_{j alpha} <= C3 (||q0||_alpha^j + 1)
    double r = 0.0;             // interaction radius (type constants)
};

struct NormGrowthReport {
    std::vector<double> lhs;      // ||q(t)||_beta
    std::vector<double> log_rhs;  // log of C_p(alpha,beta;t)(||q0||_alpha^j+1)
    bool pass = true;
    double max_log_margin = -1e300;        // max log(lhs) - log(rhs); negative = pass
    double rho = 0.0;
    double sigma_exp_weight = 0.0;    // type constant specialised to w = e^s
    double sigma_shift_weight = 0.0;  // type constant through the shift factor w_r
};

/// Evaluates both sides of the growth bound on the trajectory grid.
/// Requires beta > j*alpha.
NormGrowthReport norm_growth_check(const Trajectory& traj, const WeightPair& pair,
                                   const Configuration& config, double alpha, double beta, int j,
                                   const GrowthBoundConstants& constants);

}  // namespace rowfinite
