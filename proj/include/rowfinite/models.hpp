#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rowfinite/geometry.hpp"
#include "rowfinite/util.hpp"

namespace rowfinite {

/// On-site potential U with recorded growth constants:
///   U >= C1|q| for |q|>=1,  U <= C2(|q|^j + 1),  ||Hess U|| <= K_U(|q|^{j-2}+1).
class PotentialSpec {
  public:
    enum class Family { Quadratic, EvenPower, Custom };

    /// U = a|q|^2 + b, a > 0, b >= 0
    static PotentialSpec quadratic(double a, double b = 0.0);
    /// U = coeff |q|^{2k}, coeff > 0, k >= 1
    static PotentialSpec even_power(double coeff, int k);
    /// Caller supplies value/gradient/hessian and declares every constant.
    static PotentialSpec custom(std::function<double(std::span<const double>)> value,
                                std::function<void(std::span<const double>, std::span<double>)> gradient,
                                std::function<void(std::span<const double>, SmallMat&)> hessian,
                                double C1, double C2, int j, double K_U);

    double value(std::span<const double> q) const;
    void gradient(std::span<const double> q, std::span<double> out) const;
    void hessian(std::span<const double> q, SmallMat& out) const;

    double C1() const { return C1_; }
    double C2() const { return C2_; }
    int j() const { return j_; }
    double K_U() const { return K_U_; }
    /// Lower quadratic/power coefficient (J_U in U >= J_U |q|^{2k}); used by
    /// the closed-form dissipativity constants.
    double power_lower() const { return power_lower_; }
    int power_k() const { return k_; }

    Family family() const { return family_; }
    nlohmann::json to_json() const;
    static PotentialSpec from_json(const nlohmann::json& j);

  private:
    Family family_ = Family::Quadratic;
    double a_ = 0.5, b_ = 0.0;
    double coeff_ = 0.5;
    int k_ = 1;
    double C1_ = 0.5, C2_ = 0.5, K_U_ = 0.5, power_lower_ = 0.5;
    int j_ = 2;
    std::function<double(std::span<const double>)> custom_value_;
    std::function<void(std::span<const double>, std::span<double>)> custom_grad_;
    std::function<void(std::span<const double>, SmallMat&)> custom_hess_;
};

/// Pair kernel W(q1,q2) with growth exponent k and recorded constants
///   |W| <= J_W(|q1|^k + |q2|^k + 1),  ||dW/dq2|| <= K_W(|q1|^{k-1}+|q2|^{k-1}+1).
class KernelSpec {
  public:
    enum class Family { None, LinearPull, Difference, Custom };

    static KernelSpec none();
    /// W(q1,q2) = J q2
    static KernelSpec linear_pull(double J);
    /// W(q1,q2) = Jv |q1-q2|^{k-1} (q1-q2); k=1 is the plain difference pull.
    static KernelSpec difference(double Jv, int k = 1);
    static KernelSpec custom(std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> value,
                             std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> d_q1,
                             std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> d_q2,
                             double J_W, int k, double K_W);

    void value(std::span<const double> q1, std::span<const double> q2, std::span<double> out) const;
    void d_q1(std::span<const double> q1, std::span<const double> q2, SmallMat& out) const;
    void d_q2(std::span<const double> q1, std::span<const double> q2, SmallMat& out) const;

    bool is_none() const { return family_ == Family::None; }
    double J_W() const { return J_W_; }
    int k() const { return k_; }
    double K_W() const { return K_W_; }
    double coupling() const { return J_; }

    Family family() const { return family_; }
    nlohmann::json to_json() const;
    static KernelSpec from_json(const nlohmann::json& j);

  private:
    Family family_ = Family::None;
    double J_ = 0.0;  // linear_pull J or difference Jv
    int k_ = 1;
    double J_W_ = 0.0, K_W_ = 0.0;
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> custom_value_;
    std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> custom_d1_;
    std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> custom_d2_;
};

/// Influence profile phi for alignment dynamics: 0 < phi(s) <= phi0, with
/// recorded derivative bounds (absolute phi1; relative phi1_rel for the
/// self-normalized weights).
class InfluenceSpec {
  public:
    enum class Family { Constant, RationalDecay };

    static InfluenceSpec constant(double phi0);
    /// phi(s) = phi0 / (1+s^2)^theta  (Cucker-Smale style communication rate)
    static InfluenceSpec rational_decay(double phi0, double theta);

    double operator()(double s) const;
    double derivative(double s) const;
    double phi0() const { return phi0_; }
    double phi1() const;      // sup |phi'|
    double phi1_rel() const;  // sup |phi'|/phi

    Family family() const { return family_; }
    nlohmann::json to_json() const;
    static InfluenceSpec from_json(const nlohmann::json& j);

  private:
    Family family_ = Family::Constant;
    double phi0_ = 1.0;
    double theta_ = 0.0;
};

enum class Normalization { PerCount, SelfNormalized };

/// One of the four right-hand-side families.
struct ModelSpec {
    enum class Variant { GradientPair, Hamiltonian, SelfAlign, Flocking };

    Variant variant = Variant::GradientPair;
    int spin_dim = 1;  // nu
    std::optional<PotentialSpec> potential;      // GradientPair, Hamiltonian
    std::optional<KernelSpec> kernel;            // GradientPair, Hamiltonian
    std::optional<InfluenceSpec> influence;      // SelfAlign, Flocking
    Normalization normalization = Normalization::PerCount;

    static ModelSpec gradient_pair(PotentialSpec U, KernelSpec W, int nu);
    static ModelSpec hamiltonian(PotentialSpec U, KernelSpec W, int nu);
    static ModelSpec self_align(InfluenceSpec phi, Normalization norm, int nu);
    static ModelSpec flocking(InfluenceSpec phi, Normalization norm, int nu);

    bool has_momenta() const {
        return variant == Variant::Hamiltonian || variant == Variant::Flocking;
    }
    /// Per-point state dimension: nu, or 2*nu with momenta.
    int state_dim() const { return has_momenta() ? 2 * spin_dim : spin_dim; }

    /// Lyapunov growth constants of the per-point family (U or H).
    double lyap_C1() const;
    double lyap_C2() const;
    int lyap_j() const;

    std::string variant_name() const;
    nlohmann::json to_json() const;
    static ModelSpec from_json(const nlohmann::json& j);
};

/// dq/dt for every point; frozen handling lives in the integrator.
void rhs(const ModelSpec& model, const Configuration& config, std::span<const double> state,
         std::span<double> out);

/// Per-point Lyapunov values L_i = U_i(q_i) (or H_i with momenta).
void lyapunov(const ModelSpec& model, const Configuration& config, std::span<const double> state,
              std::span<double> out);

/// F_i . grad U_i - C sum_{j~i} (n_i n_j)^m U_j, per point; the dissipativity
/// condition holds at this state iff every entry is <= 0.
std::vector<double> dissipativity_residual(const ModelSpec& model, const Configuration& config,
                                           std::span<const double> state, double C, int m);

struct CalibrationResult {
    double C = 0.0;
    bool unbounded_flag = false;  // positive numerator over zero denominator
};

/// Smallest C making all sampled residuals <= 0.
CalibrationResult calibrate_C(const ModelSpec& model, const Configuration& config,
                              std::span<const std::vector<double>> sample_states, int m);

/// Closed-form dissipativity constant (m=1) where the family supports one:
/// alignment G, linear-pull J^2/J_U (power-matched kernels included),
/// Hamiltonian 1 + C_grad/2, flocking G + 1.
std::optional<double> closed_form_C(const ModelSpec& model);

/// Jacobian block dF_i/dq_j (state_dim x state_dim); zero unless j ~ i.
void jacobian_block(const ModelSpec& model, const Configuration& config,
                    std::span<const double> state, std::int32_t i, std::int32_t j, SmallMat& out);

/// Row gradient norm: sum over j~i of the spectral norm of dF_i/dq_j.
double grad_norm(const ModelSpec& model, const Configuration& config,
                 std::span<const double> state, std::int32_t i);

}  // namespace rowfinite
