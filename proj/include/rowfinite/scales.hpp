#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rowfinite/geometry.hpp"

namespace rowfinite {

/// Non-decreasing weight w : [0,inf) -> [1,inf).
///
/// Families:
///   constant   s -> c                      (c >= 1)
///   linear     s -> 1 + s
///   exp        s -> max(e^{nu s}, 1)
///   log        s -> a (1 + log(1+s))       (a >= 1)
///   loglog     s -> u (1 + log log(e+s))   (u >= 1)
///   loglog_of  s -> u log log base(s)      (base floored at e^e; u >= 1)
/// An optional e^e floor can be applied to any family (floor_ee), used when
/// a weight serves as the base of a loglog_of construction.
class WeightFunction {
  public:
    enum class Family { Constant, Linear, Exp, Log, LogLog, LogLogOf };

    WeightFunction() = default;

    static WeightFunction constant(double c);
    static WeightFunction linear();
    static WeightFunction exponential(double nu);
    static WeightFunction log(double a);
    static WeightFunction loglog(double upsilon);
    /// u * log log (max(base, e^e))
    static WeightFunction loglog_of(double upsilon, WeightFunction base);

    WeightFunction floored() const;  // same family with the e^e floor applied

    double operator()(double s) const;

    Family family() const { return family_; }
    double param() const { return param_; }
    bool has_floor() const { return floor_ee_; }

    /// sup_s f(tau+s)/f(s) where a closed form exists (constant: 1, exp: e^{nu tau}).
    std::optional<double> shift_ratio_closed_form(double tau) const;

    std::string family_name() const;
    nlohmann::json to_json() const;
    static WeightFunction from_json(const nlohmann::json& j);

  private:
    Family family_ = Family::Constant;
    double param_ = 1.0;
    bool floor_ee_ = false;
    std::shared_ptr<WeightFunction> base_;
    void validate() const;
};

/// Geometric evaluation grid for suprema over [0, s_max]: s=0 plus
/// log-spaced samples. Finite grids cannot certify divergence; the
/// divergence flag marks suprema still climbing at s_max.
struct SupGrid {
    double s_max = 1e6;
    int points_per_decade = 96;
    double s_min = 1e-3;

    std::vector<double> samples() const;
};

struct ShiftRatioResult {
    double value = 1.0;          // grid (or closed-form) supremum
    double grid_value = 1.0;     // grid supremum alone
    double argmax = 0.0;
    bool divergence_flag = false;
    std::optional<double> closed_form;
};

/// f_tau = sup_s f(tau+s)/f(s). Grid evaluation; exact constants where known.
ShiftRatioResult shift_ratio_sup(const WeightFunction& f, double tau, double s_max = 1e6,
                                 int points_per_decade = 96);

/// Certificate of an admissibility measurement: the D in
/// sup_s z(s)^mu w(s)^{-alpha} <= D / alpha, measured over an alpha grid.
struct AdmissibilityCertificate {
    double beta = 0.0;
    double mu = 0.0;
    double D = 1.0;
    bool divergence_flag = false;
};

/// The weight pair (w, z): w drives the scale norms, z bounds neighbor counts.
struct WeightPair {
    WeightFunction w;
    WeightFunction z;
    std::optional<AdmissibilityCertificate> certificate;
};

/// Pair construction in the double-logarithm style: w floored at e^e,
/// z = upsilon * log log w; admissible with the analytic margin bound.
WeightPair loglog_pair(const WeightFunction& w_base, double upsilon);

/// sup_{tau>0} (log tau)^mu / tau  =  (mu/e)^mu.
double d_mu(double mu);

struct AdmissibilityResult {
    double sup_value = 0.0;      // grid sup of z^mu w^{-alpha}
    double argmax = 0.0;
    bool divergence_flag = false;
    std::optional<double> analytic_bound;  // u^mu d_mu / (e alpha) for loglog_of pairs
    bool passes = false;         // sup_value * alpha <= certified D
};

/// Evaluates the balance margin sup_s z(s)^mu w(s)^{-alpha} and compares it
/// against the pair's certificate (if any).
AdmissibilityResult admissibility_margin(const WeightPair& pair, double alpha, double mu,
                                         const SupGrid& grid = {});

/// Measures D(beta, mu) = max(1, sup_{alpha in (0,beta)} alpha * sup_s z^mu w^{-alpha}).
AdmissibilityCertificate measure_D(const WeightPair& pair, double beta, double mu,
                                   const SupGrid& grid = {}, int alpha_points = 96);

/// Weighted sup norm sup_i |q_i| / w(|x_i|)^alpha; values is size()*nu flat.
double scale_norm(std::span<const double> values, int nu, const WeightFunction& w, double alpha,
                  const Configuration& config);

}  // namespace rowfinite
