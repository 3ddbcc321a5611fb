#include "rowfinite/models.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace rowfinite {

// ---------------------------------------------------------------------------
// PotentialSpec

PotentialSpec PotentialSpec::quadratic(double a, double b) {
    if (a <= 0) throw ConfigError("potential quadratic: a must be > 0");
    if (b < 0) throw ConfigError("potential quadratic: b must be >= 0");
    PotentialSpec p;
    p.family_ = Family::Quadratic;
    p.a_ = a;
    p.b_ = b;
    p.k_ = 1;
    p.j_ = 2;
    p.C1_ = a;
    p.C2_ = std::max(a, b);
    p.K_U_ = a;
    p.power_lower_ = a;
    return p;
}

PotentialSpec PotentialSpec::even_power(double coeff, int k) {
    if (coeff <= 0) throw ConfigError("potential even_power: coeff must be > 0");
    if (k < 1) throw ConfigError("potential even_power: k must be >= 1");
    PotentialSpec p;
    p.family_ = Family::EvenPower;
    p.coeff_ = coeff;
    p.k_ = k;
    p.j_ = 2 * k;
    p.C1_ = coeff;
    p.C2_ = coeff;
    p.K_U_ = 2.0 * k * (2.0 * k - 1.0) * coeff;
    p.power_lower_ = coeff;
    return p;
}

PotentialSpec PotentialSpec::custom(std::function<double(std::span<const double>)> value,
                                    std::function<void(std::span<const double>, std::span<double>)> gradient,
                                    std::function<void(std::span<const double>, SmallMat&)> hessian,
                                    double C1, double C2, int j, double K_U) {
    if (C1 <= 0 || C2 <= 0 || j < 1 || K_U < 0) throw ConfigError("potential custom: bad constants");
    PotentialSpec p;
    p.family_ = Family::Custom;
    p.custom_value_ = std::move(value);
    p.custom_grad_ = std::move(gradient);
    p.custom_hess_ = std::move(hessian);
    p.C1_ = C1;
    p.C2_ = C2;
    p.j_ = j;
    p.K_U_ = K_U;
    p.power_lower_ = C1;
    p.k_ = std::max(1, j / 2);
    return p;
}

double PotentialSpec::value(std::span<const double> q) const {
    switch (family_) {
        case Family::Quadratic: {
            double r2 = 0;
            for (double x : q) r2 += x * x;
            return a_ * r2 + b_;
        }
        case Family::EvenPower: {
            double r2 = 0;
            for (double x : q) r2 += x * x;
            return coeff_ * std::pow(r2, k_);
        }
        case Family::Custom: return custom_value_(q);
    }
    return 0;
}

void PotentialSpec::gradient(std::span<const double> q, std::span<double> out) const {
    switch (family_) {
        case Family::Quadratic:
            for (std::size_t i = 0; i < q.size(); ++i) out[i] = 2.0 * a_ * q[i];
            return;
        case Family::EvenPower: {
            double r2 = 0;
            for (double x : q) r2 += x * x;
            const double f = 2.0 * coeff_ * k_ * (k_ > 1 ? std::pow(r2, k_ - 1) : 1.0);
            for (std::size_t i = 0; i < q.size(); ++i) out[i] = f * q[i];
            return;
        }
        case Family::Custom: custom_grad_(q, out); return;
    }
}

void PotentialSpec::hessian(std::span<const double> q, SmallMat& out) const {
    const int nu = static_cast<int>(q.size());
    if (out.n != nu) out = SmallMat(nu);
    out.set_zero();
    switch (family_) {
        case Family::Quadratic: out.add_identity(2.0 * a_); return;
        case Family::EvenPower: {
            double r2 = 0;
            for (double x : q) r2 += x * x;
            const double c1 = 2.0 * coeff_ * k_ * (k_ > 1 ? std::pow(r2, k_ - 1) : 1.0);
            out.add_identity(c1);
            if (k_ > 1) {
                const double c2 = 4.0 * coeff_ * k_ * (k_ - 1) *
                                  (k_ > 2 ? std::pow(r2, k_ - 2) : 1.0);
                out.add_outer(c2, q, q);
            }
            return;
        }
        case Family::Custom: custom_hess_(q, out); return;
    }
}

nlohmann::json PotentialSpec::to_json() const {
    switch (family_) {
        case Family::Quadratic: return {{"family", "quadratic"}, {"a", a_}, {"b", b_}};
        case Family::EvenPower: return {{"family", "even_power"}, {"coeff", coeff_}, {"k", k_}};
        case Family::Custom: break;
    }
    throw ConfigError("potential: custom potentials are not serializable");
}

PotentialSpec PotentialSpec::from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "quadratic") return quadratic(j.at("a").get<double>(), j.value("b", 0.0));
    if (fam == "even_power") return even_power(j.at("coeff").get<double>(), j.at("k").get<int>());
    throw ConfigError("unknown potential family: " + fam);
}

// ---------------------------------------------------------------------------
// KernelSpec

KernelSpec KernelSpec::none() {
    KernelSpec k;
    k.family_ = Family::None;
    return k;
}

KernelSpec KernelSpec::linear_pull(double J) {
    KernelSpec k;
    k.family_ = Family::LinearPull;
    k.J_ = J;
    k.k_ = 1;
    k.J_W_ = std::abs(J);
    k.K_W_ = std::abs(J);
    return k;
}

KernelSpec KernelSpec::difference(double Jv, int k) {
    if (k < 1) throw ConfigError("kernel difference: k must be >= 1");
    KernelSpec ks;
    ks.family_ = Family::Difference;
    ks.J_ = Jv;
    ks.k_ = k;
    ks.J_W_ = std::abs(Jv) * std::pow(2.0, k - 1);
    ks.K_W_ = std::abs(Jv) * k * std::pow(2.0, std::max(k - 2, 0));
    return ks;
}

KernelSpec KernelSpec::custom(std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> value,
                              std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> d_q1,
                              std::function<void(std::span<const double>, std::span<const double>, SmallMat&)> d_q2,
                              double J_W, int k, double K_W) {
    if (J_W < 0 || k < 1 || K_W < 0) throw ConfigError("kernel custom: bad constants");
    KernelSpec ks;
    ks.family_ = Family::Custom;
    ks.custom_value_ = std::move(value);
    ks.custom_d1_ = std::move(d_q1);
    ks.custom_d2_ = std::move(d_q2);
    ks.J_W_ = J_W;
    ks.k_ = k;
    ks.K_W_ = K_W;
    return ks;
}

void KernelSpec::value(std::span<const double> q1, std::span<const double> q2,
                       std::span<double> out) const {
    switch (family_) {
        case Family::None:
            for (auto& v : out) v = 0.0;
            return;
        case Family::LinearPull:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = J_ * q2[i];
            return;
        case Family::Difference: {
            double d2 = 0;
            for (std::size_t i = 0; i < out.size(); ++i) d2 += sq(q1[i] - q2[i]);
            const double f = J_ * (k_ > 1 ? std::pow(std::sqrt(d2), k_ - 1) : 1.0);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = f * (q1[i] - q2[i]);
            return;
        }
        case Family::Custom: custom_value_(q1, q2, out); return;
    }
}

namespace {

// dV(d) = Jv(|d|^{k-1} I + (k-1)|d|^{k-3} d d^T); zero at d = 0 for k >= 2
void difference_dV(double Jv, int k, std::span<const double> d, SmallMat& out) {
    const int nu = static_cast<int>(d.size());
    if (out.n != nu) out = SmallMat(nu);
    out.set_zero();
    const double dn = vec_norm(d);
    if (k == 1) {
        out.add_identity(Jv);
        return;
    }
    if (dn == 0.0) return;
    out.add_identity(Jv * std::pow(dn, k - 1));
    out.add_outer(Jv * (k - 1) * std::pow(dn, k - 3), d, d);
}

}  // namespace

void KernelSpec::d_q1(std::span<const double> q1, std::span<const double> q2, SmallMat& out) const {
    const int nu = static_cast<int>(q1.size());
    if (out.n != nu) out = SmallMat(nu);
    switch (family_) {
        case Family::None:
        case Family::LinearPull: out.set_zero(); return;
        case Family::Difference: {
            std::vector<double> d(q1.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = q1[i] - q2[i];
            difference_dV(J_, k_, d, out);
            return;
        }
        case Family::Custom: custom_d1_(q1, q2, out); return;
    }
}

void KernelSpec::d_q2(std::span<const double> q1, std::span<const double> q2, SmallMat& out) const {
    const int nu = static_cast<int>(q1.size());
    if (out.n != nu) out = SmallMat(nu);
    switch (family_) {
        case Family::None: out.set_zero(); return;
        case Family::LinearPull:
            out.set_zero();
            out.add_identity(J_);
            return;
        case Family::Difference: {
            std::vector<double> d(q1.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = q1[i] - q2[i];
            difference_dV(J_, k_, d, out);
            for (auto& v : out.a) v = -v;
            return;
        }
        case Family::Custom: custom_d2_(q1, q2, out); return;
    }
}

nlohmann::json KernelSpec::to_json() const {
    switch (family_) {
        case Family::None: return {{"family", "none"}};
        case Family::LinearPull: return {{"family", "linear_pull"}, {"J", J_}};
        case Family::Difference: return {{"family", "difference"}, {"Jv", J_}, {"k", k_}};
        case Family::Custom: break;
    }
    throw ConfigError("kernel: custom kernels are not serializable");
}

KernelSpec KernelSpec::from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "none") return none();
    if (fam == "linear_pull") return linear_pull(j.at("J").get<double>());
    if (fam == "difference") return difference(j.at("Jv").get<double>(), j.value("k", 1));
    throw ConfigError("unknown kernel family: " + fam);
}

// ---------------------------------------------------------------------------
// InfluenceSpec

InfluenceSpec InfluenceSpec::constant(double phi0) {
    if (phi0 <= 0) throw ConfigError("influence constant: phi0 must be > 0");
    InfluenceSpec s;
    s.family_ = Family::Constant;
    s.phi0_ = phi0;
    return s;
}

InfluenceSpec InfluenceSpec::rational_decay(double phi0, double theta) {
    if (phi0 <= 0) throw ConfigError("influence rational_decay: phi0 must be > 0");
    if (theta < 0) throw ConfigError("influence rational_decay: theta must be >= 0");
    InfluenceSpec s;
    s.family_ = Family::RationalDecay;
    s.phi0_ = phi0;
    s.theta_ = theta;
    return s;
}

double InfluenceSpec::operator()(double s) const {
    if (family_ == Family::Constant) return phi0_;
    return phi0_ * std::pow(1.0 + s * s, -theta_);
}

double InfluenceSpec::derivative(double s) const {
    if (family_ == Family::Constant) return 0.0;
    return -2.0 * theta_ * s * phi0_ * std::pow(1.0 + s * s, -theta_ - 1.0);
}

double InfluenceSpec::phi1() const { return family_ == Family::Constant ? 0.0 : theta_ * phi0_; }

double InfluenceSpec::phi1_rel() const { return family_ == Family::Constant ? 0.0 : theta_; }

nlohmann::json InfluenceSpec::to_json() const {
    if (family_ == Family::Constant) return {{"family", "constant"}, {"phi0", phi0_}};
    return {{"family", "rational_decay"}, {"phi0", phi0_}, {"theta", theta_}};
}

InfluenceSpec InfluenceSpec::from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "constant") return constant(j.at("phi0").get<double>());
    if (fam == "rational_decay")
        return rational_decay(j.at("phi0").get<double>(), j.at("theta").get<double>());
    throw ConfigError("unknown influence family: " + fam);
}

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec ModelSpec::gradient_pair(PotentialSpec U, KernelSpec W, int nu) {
    if (nu < 1) throw ConfigError("model: spin_dim must be >= 1");
    ModelSpec m;
    m.variant = Variant::GradientPair;
    m.spin_dim = nu;
    m.potential = std::move(U);
    m.kernel = std::move(W);
    return m;
}

ModelSpec ModelSpec::hamiltonian(PotentialSpec U, KernelSpec W, int nu) {
    ModelSpec m = gradient_pair(std::move(U), std::move(W), nu);
    m.variant = Variant::Hamiltonian;
    return m;
}

ModelSpec ModelSpec::self_align(InfluenceSpec phi, Normalization norm, int nu) {
    if (nu < 1) throw ConfigError("model: spin_dim must be >= 1");
    ModelSpec m;
    m.variant = Variant::SelfAlign;
    m.spin_dim = nu;
    m.influence = std::move(phi);
    m.normalization = norm;
    return m;
}

ModelSpec ModelSpec::flocking(InfluenceSpec phi, Normalization norm, int nu) {
    ModelSpec m = self_align(std::move(phi), norm, nu);
    m.variant = Variant::Flocking;
    return m;
}

double ModelSpec::lyap_C1() const {
    switch (variant) {
        case Variant::GradientPair: return potential->C1();
        case Variant::Hamiltonian:
            return std::min(0.25, potential->power_lower() /
                                      std::pow(2.0, potential->power_k()));
        case Variant::SelfAlign:
        case Variant::Flocking: return 0.5;
    }
    return 0.5;
}

double ModelSpec::lyap_C2() const {
    switch (variant) {
        case Variant::GradientPair: return potential->C2();
        case Variant::Hamiltonian: return 0.5 + potential->C2();
        case Variant::SelfAlign:
        case Variant::Flocking: return 0.5;
    }
    return 0.5;
}

int ModelSpec::lyap_j() const {
    switch (variant) {
        case Variant::GradientPair:
        case Variant::Hamiltonian: return potential->j();
        case Variant::SelfAlign:
        case Variant::Flocking: return 2;
    }
    return 2;
}

std::string ModelSpec::variant_name() const {
    switch (variant) {
        case Variant::GradientPair: return "gradient_pair";
        case Variant::Hamiltonian: return "hamiltonian";
        case Variant::SelfAlign: return "self_align";
        case Variant::Flocking: return "flocking";
    }
    return "?";
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j;
    j["variant"] = variant_name();
    j["spin_dim"] = spin_dim;
    if (potential) j["potential"] = potential->to_json();
    if (kernel) j["kernel"] = kernel->to_json();
    if (influence) {
        j["influence"] = influence->to_json();
        j["normalization"] =
            normalization == Normalization::PerCount ? "per_count" : "self_normalized";
    }
    return j;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    const std::string v = j.at("variant").get<std::string>();
    const int nu = j.at("spin_dim").get<int>();
    if (v == "gradient_pair" || v == "hamiltonian") {
        auto U = PotentialSpec::from_json(j.at("potential"));
        auto W = j.contains("kernel") ? KernelSpec::from_json(j.at("kernel")) : KernelSpec::none();
        return v == "gradient_pair" ? gradient_pair(std::move(U), std::move(W), nu)
                                    : hamiltonian(std::move(U), std::move(W), nu);
    }
    if (v == "self_align" || v == "flocking") {
        auto phi = InfluenceSpec::from_json(j.at("influence"));
        const std::string ns = j.value("normalization", "per_count");
        Normalization norm;
        if (ns == "per_count") norm = Normalization::PerCount;
        else if (ns == "self_normalized") norm = Normalization::SelfNormalized;
        else throw ConfigError("unknown normalization: " + ns);
        return v == "self_align" ? self_align(std::move(phi), norm, nu)
                                 : flocking(std::move(phi), norm, nu);
    }
    throw ConfigError("unknown model variant: " + v);
}

// ---------------------------------------------------------------------------
// Right-hand sides

namespace {

std::span<const double> point_state(std::span<const double> state, std::size_t i, int sd) {
    return state.subspan(i * static_cast<std::size_t>(sd), static_cast<std::size_t>(sd));
}

void rhs_gradient_like(const ModelSpec& model, const Configuration& config,
                       std::span<const double> state, std::span<double> out, bool hamiltonian) {
    const int nu = model.spin_dim;
    const int sd = model.state_dim();
    parallel_ranges(config.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> acc(nu), wv(nu), gu(nu);
        for (std::size_t i = b; i < e; ++i) {
            auto xi = point_state(state, i, sd);
            auto qi = xi.first(nu);
            std::fill(acc.begin(), acc.end(), 0.0);
            if (!model.kernel->is_none()) {
                for (std::int32_t jn : config.neighbors[i]) {
                    if (static_cast<std::size_t>(jn) == i) continue;
                    auto qj = point_state(state, static_cast<std::size_t>(jn), sd).first(nu);
                    model.kernel->value(qi, qj, wv);
                    for (int c = 0; c < nu; ++c) acc[c] += wv[c];
                }
            }
            model.potential->gradient(qi, gu);
            double* o = out.data() + i * static_cast<std::size_t>(sd);
            if (hamiltonian) {
                auto pi = xi.subspan(nu, nu);
                for (int c = 0; c < nu; ++c) o[c] = pi[c];
                for (int c = 0; c < nu; ++c) o[nu + c] = acc[c] - gu[c];
            } else {
                for (int c = 0; c < nu; ++c) o[c] = acc[c] - gu[c];
            }
        }
    });
}

void rhs_align_like(const ModelSpec& model, const Configuration& config,
                    std::span<const double> state, std::span<double> out, bool flocking) {
    const int nu = model.spin_dim;
    const int sd = model.state_dim();
    const auto& phi = *model.influence;
    const bool self_norm = model.normalization == Normalization::SelfNormalized;
    // influence distances use spins for alignment, momenta for flocking
    const int doff = flocking ? nu : 0;
    parallel_ranges(config.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> acc(nu);
        for (std::size_t i = b; i < e; ++i) {
            auto xi = point_state(state, i, sd);
            auto qi = xi.first(nu);
            auto di = xi.subspan(doff, nu);
            std::fill(acc.begin(), acc.end(), 0.0);
            double den = static_cast<double>(config.counts[i]);
            if (self_norm) {
                den = 0.0;
                for (std::int32_t jn : config.neighbors[i]) {
                    auto dj = point_state(state, static_cast<std::size_t>(jn), sd).subspan(doff, nu);
                    double dist2 = 0;
                    for (int c = 0; c < nu; ++c) dist2 += sq(dj[c] - di[c]);
                    den += phi(std::sqrt(dist2));
                }
            }
            for (std::int32_t jn : config.neighbors[i]) {
                if (static_cast<std::size_t>(jn) == i) continue;
                auto xj = point_state(state, static_cast<std::size_t>(jn), sd);
                auto qj = xj.first(nu);
                auto dj = xj.subspan(doff, nu);
                double dist2 = 0;
                for (int c = 0; c < nu; ++c) dist2 += sq(dj[c] - di[c]);
                const double g = phi(std::sqrt(dist2)) / den;
                for (int c = 0; c < nu; ++c) acc[c] += g * (qj[c] - qi[c]);
            }
            double* o = out.data() + i * static_cast<std::size_t>(sd);
            for (int c = 0; c < nu; ++c) o[c] = acc[c];
            if (flocking)
                for (int c = 0; c < nu; ++c) o[nu + c] = qi[c];
        }
    });
}

}  // namespace

void rhs(const ModelSpec& model, const Configuration& config, std::span<const double> state,
         std::span<double> out) {
    const std::size_t want = config.size() * static_cast<std::size_t>(model.state_dim());
    if (state.size() != want || out.size() != want)
        throw ConfigError("rhs: state size mismatch");
    switch (model.variant) {
        case ModelSpec::Variant::GradientPair:
            rhs_gradient_like(model, config, state, out, false);
            return;
        case ModelSpec::Variant::Hamiltonian:
            rhs_gradient_like(model, config, state, out, true);
            return;
        case ModelSpec::Variant::SelfAlign:
            rhs_align_like(model, config, state, out, false);
            return;
        case ModelSpec::Variant::Flocking:
            rhs_align_like(model, config, state, out, true);
            return;
    }
}

void lyapunov(const ModelSpec& model, const Configuration& config, std::span<const double> state,
              std::span<double> out) {
    const int nu = model.spin_dim;
    const int sd = model.state_dim();
    if (out.size() != config.size()) throw ConfigError("lyapunov: output size mismatch");
    for (std::size_t i = 0; i < config.size(); ++i) {
        auto xi = point_state(state, i, sd);
        auto qi = xi.first(nu);
        switch (model.variant) {
            case ModelSpec::Variant::GradientPair: out[i] = model.potential->value(qi); break;
            case ModelSpec::Variant::Hamiltonian: {
                auto pi = xi.subspan(nu, nu);
                double p2 = 0;
                for (double v : pi) p2 += v * v;
                out[i] = 0.5 * p2 + model.potential->value(qi);
                break;
            }
            case ModelSpec::Variant::SelfAlign: {
                double q2 = 0;
                for (double v : qi) q2 += v * v;
                out[i] = 0.5 * q2;
                break;
            }
            case ModelSpec::Variant::Flocking: {
                double s2 = 0;
                for (double v : xi) s2 += v * v;
                out[i] = 0.5 * s2;
                break;
            }
        }
    }
}

namespace {

// gradient of the per-point Lyapunov function w.r.t. the full point state
void lyap_gradient(const ModelSpec& model, std::span<const double> xi, std::span<double> out) {
    const int nu = model.spin_dim;
    switch (model.variant) {
        case ModelSpec::Variant::GradientPair:
            model.potential->gradient(xi.first(nu), out);
            return;
        case ModelSpec::Variant::Hamiltonian:
            model.potential->gradient(xi.first(nu), out.first(nu));
            for (int c = 0; c < nu; ++c) out[nu + c] = xi[nu + c];
            return;
        case ModelSpec::Variant::SelfAlign:
            for (int c = 0; c < nu; ++c) out[c] = xi[c];
            return;
        case ModelSpec::Variant::Flocking:
            for (std::size_t c = 0; c < xi.size(); ++c) out[c] = xi[c];
            return;
    }
}

}  // namespace

std::vector<double> dissipativity_residual(const ModelSpec& model, const Configuration& config,
                                           std::span<const double> state, double C, int m) {
    const int sd = model.state_dim();
    const std::size_t n = config.size();
    std::vector<double> F(n * sd), L(n), res(n), g(sd);
    rhs(model, config, state, F);
    lyapunov(model, config, state, L);
    for (std::size_t i = 0; i < n; ++i) {
        auto xi = point_state(state, i, sd);
        lyap_gradient(model, xi, g);
        double fdotg = 0;
        for (int c = 0; c < sd; ++c) fdotg += F[i * sd + c] * g[c];
        double sum = 0;
        const double ni = config.counts[i];
        for (std::int32_t jn : config.neighbors[i])
            sum += std::pow(ni * config.counts[jn], m) * L[static_cast<std::size_t>(jn)];
        res[i] = fdotg - C * sum;
    }
    return res;
}

CalibrationResult calibrate_C(const ModelSpec& model, const Configuration& config,
                              std::span<const std::vector<double>> sample_states, int m) {
    CalibrationResult out;
    const int sd = model.state_dim();
    const std::size_t n = config.size();
    std::vector<double> F(n * sd), L(n), g(sd);
    for (const auto& state : sample_states) {
        rhs(model, config, state, F);
        lyapunov(model, config, state, L);
        for (std::size_t i = 0; i < n; ++i) {
            auto xi = point_state(state, i, sd);
            lyap_gradient(model, xi, g);
            double fdotg = 0;
            for (int c = 0; c < sd; ++c) fdotg += F[i * sd + c] * g[c];
            if (fdotg <= 0) continue;
            double denom = 0;
            const double ni = config.counts[i];
            for (std::int32_t jn : config.neighbors[i])
                denom += std::pow(ni * config.counts[jn], m) * L[static_cast<std::size_t>(jn)];
            if (denom == 0.0) {
                out.unbounded_flag = true;
                continue;
            }
            out.C = std::max(out.C, fdotg / denom);
        }
    }
    return out;
}

std::optional<double> closed_form_C(const ModelSpec& model) {
    switch (model.variant) {
        case ModelSpec::Variant::SelfAlign:
            return model.normalization == Normalization::PerCount ? model.influence->phi0() : 1.0;
        case ModelSpec::Variant::Flocking:
            return (model.normalization == Normalization::PerCount ? model.influence->phi0()
                                                                   : 1.0) +
                   1.0;
        case ModelSpec::Variant::GradientPair:
        case ModelSpec::Variant::Hamiltonian: {
            const auto& U = *model.potential;
            const auto& W = *model.kernel;
            std::optional<double> grad_C;
            if (W.is_none()) {
                grad_C = 0.0;
            } else if (W.family() == KernelSpec::Family::LinearPull && U.power_k() == 1) {
                grad_C = sq(W.coupling()) / U.power_lower();
            } else if (W.family() == KernelSpec::Family::Difference && U.power_k() == W.k()) {
                grad_C = std::pow(2.0, 2 * W.k() - 1) * sq(W.coupling()) / U.power_lower();
            }
            if (!grad_C) return std::nullopt;
            if (model.variant == ModelSpec::Variant::GradientPair) return grad_C;
            return 1.0 + *grad_C / 2.0;  // p.R <= |p|^2/2 + |R|^2/2, then U,H swap
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Jacobians

namespace {

// dF_i/dq_j for the alignment/flocking families, j != i; translation
// invariance gives the diagonal block as minus the sum of the others.
void align_offdiag_block(const ModelSpec& model, const Configuration& config,
                         std::span<const double> state, std::size_t i, std::size_t j,
                         SmallMat& out) {
    const int nu = model.spin_dim;
    const int sd = model.state_dim();
    const bool flock = model.variant == ModelSpec::Variant::Flocking;
    const int doff = flock ? nu : 0;
    const auto& phi = *model.influence;
    const bool self_norm = model.normalization == Normalization::SelfNormalized;

    auto xi = point_state(state, i, sd);
    auto qi = xi.first(nu);
    auto di = xi.subspan(doff, nu);

    double den = static_cast<double>(config.counts[i]);
    if (self_norm) {
        den = 0.0;
        for (std::int32_t zn : config.neighbors[i]) {
            auto dz = point_state(state, static_cast<std::size_t>(zn), sd).subspan(doff, nu);
            double d2 = 0;
            for (int c = 0; c < nu; ++c) d2 += sq(dz[c] - di[c]);
            den += phi(std::sqrt(d2));
        }
    }

    auto xj = point_state(state, j, sd);
    auto qj = xj.first(nu);
    auto dj = xj.subspan(doff, nu);
    std::vector<double> diff(nu), qdiff(nu);
    double dist2 = 0;
    for (int c = 0; c < nu; ++c) {
        diff[c] = dj[c] - di[c];
        qdiff[c] = qj[c] - qi[c];
        dist2 += sq(diff[c]);
    }
    const double dist = std::sqrt(dist2);
    const double ph = phi(dist);
    const double dph = phi.derivative(dist);

    out = SmallMat(sd);

    // d q_dot_i / d (driving variable of j): phi(|d_j|)/den * Id acting on the
    // q-difference, plus the phi' correction; the self-normalized case adds
    // the quotient-rule term -F_i (d den/d var_j)/den.
    if (!flock) {
        // variable = q_j: both the difference and the weight depend on it
        for (int c = 0; c < nu; ++c) out(c, c) += ph / den;
        if (dist > 0 && dph != 0.0) {
            for (int a = 0; a < nu; ++a)
                for (int b2 = 0; b2 < nu; ++b2)
                    out(a, b2) += (dph / den) * qdiff[a] * diff[b2] / dist;
        }
        if (self_norm && dist > 0 && dph != 0.0) {
            // F_i = sum_y phi(...)(q_y - q_i)/den
            std::vector<double> Fi(nu, 0.0);
            for (std::int32_t yn : config.neighbors[i]) {
                if (static_cast<std::size_t>(yn) == i) continue;
                auto xy = point_state(state, static_cast<std::size_t>(yn), sd);
                double d2 = 0;
                for (int c = 0; c < nu; ++c) d2 += sq(xy[doff + c] - di[c]);
                const double w = phi(std::sqrt(d2)) / den;
                for (int c = 0; c < nu; ++c) Fi[c] += w * (xy[c] - qi[c]);
            }
            for (int a = 0; a < nu; ++a)
                for (int b2 = 0; b2 < nu; ++b2)
                    out(a, b2) -= Fi[a] * (dph / den) * diff[b2] / dist;
        }
    } else {
        // q-block: d q_dot_i / d q_j = g_{ij} Id
        for (int c = 0; c < nu; ++c) out(c, c) += ph / den;
        // p-block: d q_dot_i / d p_j through the weights
        if (dist > 0 && dph != 0.0) {
            for (int a = 0; a < nu; ++a)
                for (int b2 = 0; b2 < nu; ++b2)
                    out(a, nu + b2) += (dph / den) * qdiff[a] * diff[b2] / dist;
            if (self_norm) {
                std::vector<double> Fi(nu, 0.0);
                for (std::int32_t yn : config.neighbors[i]) {
                    if (static_cast<std::size_t>(yn) == i) continue;
                    auto xy = point_state(state, static_cast<std::size_t>(yn), sd);
                    double d2 = 0;
                    for (int c = 0; c < nu; ++c) d2 += sq(xy[doff + c] - di[c]);
                    const double w = phi(std::sqrt(d2)) / den;
                    for (int c = 0; c < nu; ++c) Fi[c] += w * (xy[c] - qi[c]);
                }
                for (int a = 0; a < nu; ++a)
                    for (int b2 = 0; b2 < nu; ++b2)
                        out(a, nu + b2) -= Fi[a] * (dph / den) * diff[b2] / dist;
            }
        }
        // d p_dot_i / d anything_j = 0 for j != i
    }
}

}  // namespace

void jacobian_block(const ModelSpec& model, const Configuration& config,
                    std::span<const double> state, std::int32_t i, std::int32_t j, SmallMat& out) {
    const int nu = model.spin_dim;
    const int sd = model.state_dim();
    const std::size_t ui = static_cast<std::size_t>(i);
    const auto& nbrs = config.neighbors[ui];
    out = SmallMat(sd);
    const bool is_neighbor = std::binary_search(nbrs.begin(), nbrs.end(), j);
    if (!is_neighbor) return;  // row-finiteness: zero block

    switch (model.variant) {
        case ModelSpec::Variant::GradientPair:
        case ModelSpec::Variant::Hamiltonian: {
            const bool ham = model.variant == ModelSpec::Variant::Hamiltonian;
            auto qi = point_state(state, ui, sd).first(nu);
            SmallMat blk(nu);
            if (i == j) {
                SmallMat acc(nu), h(nu);
                if (!model.kernel->is_none()) {
                    SmallMat d1(nu);
                    for (std::int32_t yn : nbrs) {
                        if (yn == i) continue;
                        auto qy = point_state(state, static_cast<std::size_t>(yn), sd).first(nu);
                        model.kernel->d_q1(qi, qy, d1);
                        for (std::size_t c = 0; c < d1.a.size(); ++c) acc.a[c] += d1.a[c];
                    }
                }
                model.potential->hessian(qi, h);
                for (int a = 0; a < nu; ++a)
                    for (int b = 0; b < nu; ++b) blk(a, b) = acc(a, b) - h(a, b);
            } else {
                auto qj = point_state(state, static_cast<std::size_t>(j), sd).first(nu);
                model.kernel->d_q2(qi, qj, blk);
            }
            if (!ham) {
                out = blk;
            } else {
                // [[0, Id],[blk, 0]] for j = i; [[0,0],[blk,0]] otherwise
                for (int a = 0; a < nu; ++a)
                    for (int b = 0; b < nu; ++b) out(nu + a, b) = blk(a, b);
                if (i == j)
                    for (int c = 0; c < nu; ++c) out(c, nu + c) = 1.0;
            }
            return;
        }
        case ModelSpec::Variant::SelfAlign:
        case ModelSpec::Variant::Flocking: {
            const bool flock = model.variant == ModelSpec::Variant::Flocking;
            if (i != j) {
                align_offdiag_block(model, config, state, ui, static_cast<std::size_t>(j), out);
                return;
            }
            // diagonal block by translation invariance of the differences
            SmallMat acc(sd), blk(sd);
            for (std::int32_t yn : nbrs) {
                if (yn == i) continue;
                align_offdiag_block(model, config, state, ui, static_cast<std::size_t>(yn), blk);
                for (std::size_t c = 0; c < blk.a.size(); ++c) acc.a[c] += blk.a[c];
            }
            for (std::size_t c = 0; c < acc.a.size(); ++c) out.a[c] = -acc.a[c];
            if (flock) {
                // d p_dot_i / d q_i = Id (p_dot = q); the alignment rows above
                // cover only the q_dot block
                for (int c = 0; c < nu; ++c) out(nu + c, c) += 1.0;
            }
            return;
        }
    }
}

double grad_norm(const ModelSpec& model, const Configuration& config,
                 std::span<const double> state, std::int32_t i) {
    SmallMat blk;
    double total = 0.0;
    for (std::int32_t j : config.neighbors[static_cast<std::size_t>(i)]) {
        jacobian_block(model, config, state, i, j, blk);
        total += spectral_norm(blk);
    }
    return total;
}

}  // namespace rowfinite
