#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rowfinite/scales.hpp"

namespace rowfinite {

/// Cutoff volume: a centered ball (by radius) or an explicit box.
struct Volume {
    std::variant<double, Box> shape;  // radius or box

    bool contains(std::span<const double> x) const;
    static Volume ball(double radius) { return Volume{radius}; }
    static Volume box(Box b) { return Volume{std::move(b)}; }
    nlohmann::json to_json() const;
    static Volume from_json(const nlohmann::json& j);
};

/// Sparse nonnegative matrix supported on the interaction graph:
/// entry (i,j) = C (n_i n_j)^m for j ~ i, rows emptied outside the cutoff.
struct RowFiniteOperator {
    ConfigPtr config;
    double C = 0.0;
    int m = 1;
    std::optional<Volume> cutoff_volume;
    std::vector<std::vector<std::pair<std::int32_t, double>>> rows;  // sorted by column

    std::size_t size() const { return rows.size(); }
    bool is_zero() const;
    double max_row_sum() const;

    /// y = A x. Row sums accumulate in fixed (sorted) order; the result is
    /// identical for any worker count.
    void apply(std::span<const double> x, std::span<double> y) const;

    /// Exact operator norm between weighted sup spaces:
    /// max_i sum_j A_ij w_j^{a'} / w_i^{a''} (nonnegative entries).
    double exact_norm(const WeightFunction& w, double alpha_from, double alpha_to) const;

    void export_coordinate_list(std::ostream& os) const;
};

RowFiniteOperator build_A(ConfigPtr config, double C, int m);
RowFiniteOperator cutoff(const RowFiniteOperator& A, const Volume& volume);

/// Constants assembled from the admissibility route to the operator bound
/// ||A||_{a',a''} <= B_op w_r^{a'} (a''-a')^{-1/p}.
struct OperatorBoundConstants {
    double p = 2.0;
    double beta = 1.0;   // scale ceiling used for D(p*beta, p(2m+1))
    double w_r = 1.0;    // shift constant of w at tau = r
    double z_r = 1.0;    // shift constant of z at tau = r
    double M = 0.0;      // C * z_r^m
    double D = 1.0;      // measured D(p*beta, p(2m+1))
    double B_op = 0.0;   // M (D/p)^{1/p}
    bool divergence_flag = false;
};

OperatorBoundConstants operator_bound_constants(const RowFiniteOperator& A, const WeightPair& pair,
                                                double p, double beta,
                                                const SupGrid& grid = {});

struct OpNormReport {
    double estimate = 0.0;  // sup over probe vectors (includes the extremal one)
    double bound = 0.0;     // B_op w_r^{a'} (a''-a')^{-1/p}
    double ratio = 0.0;
    bool violation = false;
    OperatorBoundConstants constants;
};

/// Probes ||A||_{a',a''} with random unit vectors, all basis vectors and the
/// extremal vector q_j = w_j^{a'}, then compares with the certified bound.
OpNormReport empirical_op_norm(const RowFiniteOperator& A, const WeightPair& pair,
                               double alpha_lo, double alpha_hi, double p, double beta,
                               int trials, std::uint64_t seed, const SupGrid& grid = {});

/// Parameters of the entire majorant  a(t) = sum_n (Be)^n n^{-(1-q)n} t^n
/// with B = c (beta-alpha)^{-q}; governs series truncation and growth bounds.
struct MajorantParams {
    double c = 0.0;      // loss-rate constant in ||Ax||_{a''} <= c (a''-a')^{-q} ||x||_{a'}
    double q = 0.5;      // in (0,1)
    double alpha = 0.0;  // 0 <= alpha < beta
    double beta = 1.0;

    double B() const { return c * std::pow(beta - alpha, -q); }
    static MajorantParams from_c(double c, double q, double alpha, double beta);
    static MajorantParams from_B(double B, double q, double alpha, double beta);
};

/// Majorant params for a concrete operator: c = B_op w_r^beta, q = 1/p.
MajorantParams lemma_majorant_params(const OperatorBoundConstants& k, double alpha, double beta);

/// log a(t). Direct log-sum-exp for moderate peaks; saddle-point form
/// log a ~ sigma t^rho + 0.5 log(2 pi rho n*) once the peak index n* exceeds
/// direct_cap (the two agree to O(1/n*) at the switch).
double log_majorant(const MajorantParams& params, double t, std::size_t direct_cap = 200000);

struct SeriesResult {
    std::vector<double> u;
    int terms_used = 0;
    double tail_bound = 0.0;  // certified ||.||_beta error: majorant tail * ||u0||_alpha
};

/// u(t) = sum_{n<=N} t^n/n! A^n u0, truncated at the first N whose majorant
/// tail falls below tol. Throws SolverError if N would exceed max_terms.
SeriesResult ovsyannikov_series(const RowFiniteOperator& A, std::span<const double> u0, double t,
                                const MajorantParams& params, const WeightFunction& w, double tol,
                                int max_terms = 100000);

struct OrderType {
    double rho = 1.0;
    double sigma = 0.0;
};

/// rho = 1/(1-q), sigma = (Be)^rho / (e rho).
OrderType order_and_type(const MajorantParams& params);

struct EmpiricalOrderResult {
    double rho_hat = 0.0;
    double rho_analytic = 0.0;
    bool degenerate = false;  // B <= 0 or grid unusable
};

/// Slope of log log a(t) vs log t over the largest decade of t_grid.
EmpiricalOrderResult empirical_order(const MajorantParams& params, std::span<const double> t_grid);

}  // namespace rowfinite
