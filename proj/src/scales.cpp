#include "rowfinite/scales.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace rowfinite {

namespace {
const double kEE = std::exp(std::exp(1.0));  // e^e floor of the loglog construction
}

WeightFunction WeightFunction::constant(double c) {
    WeightFunction f;
    f.family_ = Family::Constant;
    f.param_ = c;
    f.validate();
    return f;
}

WeightFunction WeightFunction::linear() {
    WeightFunction f;
    f.family_ = Family::Linear;
    f.param_ = 1.0;
    return f;
}

WeightFunction WeightFunction::exponential(double nu) {
    WeightFunction f;
    f.family_ = Family::Exp;
    f.param_ = nu;
    f.validate();
    return f;
}

WeightFunction WeightFunction::log(double a) {
    WeightFunction f;
    f.family_ = Family::Log;
    f.param_ = a;
    f.validate();
    return f;
}

WeightFunction WeightFunction::loglog(double upsilon) {
    WeightFunction f;
    f.family_ = Family::LogLog;
    f.param_ = upsilon;
    f.validate();
    return f;
}

WeightFunction WeightFunction::loglog_of(double upsilon, WeightFunction base) {
    WeightFunction f;
    f.family_ = Family::LogLogOf;
    f.param_ = upsilon;
    f.base_ = std::make_shared<WeightFunction>(std::move(base));
    f.validate();
    return f;
}

WeightFunction WeightFunction::floored() const {
    WeightFunction f = *this;
    f.floor_ee_ = true;
    return f;
}

void WeightFunction::validate() const {
    switch (family_) {
        case Family::Constant:
            if (param_ < 1.0) throw ConfigError("weight constant: c must be >= 1");
            break;
        case Family::Exp:
            if (param_ <= 0.0) throw ConfigError("weight exp: nu must be > 0");
            break;
        case Family::Log:
            if (param_ < 1.0) throw ConfigError("weight log: a must be >= 1");
            break;
        case Family::LogLog:
            if (param_ < 1.0) throw ConfigError("weight loglog: upsilon must be >= 1");
            break;
        case Family::LogLogOf:
            if (param_ < 1.0) throw ConfigError("weight loglog_of: upsilon must be >= 1");
            if (!base_) throw ConfigError("weight loglog_of: missing base");
            break;
        case Family::Linear:
            break;
    }
}

double WeightFunction::operator()(double s) const {
    double v = 1.0;
    switch (family_) {
        case Family::Constant: v = param_; break;
        case Family::Linear: v = 1.0 + s; break;
        case Family::Exp: v = std::max(std::exp(param_ * s), 1.0); break;
        case Family::Log: v = param_ * (1.0 + std::log1p(s)); break;
        case Family::LogLog: v = param_ * (1.0 + std::log(std::log(std::exp(1.0) + s))); break;
        case Family::LogLogOf: {
            double b = std::max((*base_)(s), kEE);
            v = param_ * std::log(std::log(b));
            break;
        }
    }
    if (floor_ee_) v = std::max(v, kEE);
    return v;
}

std::optional<double> WeightFunction::shift_ratio_closed_form(double tau) const {
    switch (family_) {
        case Family::Constant: return 1.0;
        // the e^e floor never increases the shift ratio of an increasing exp
        case Family::Exp: return std::exp(param_ * tau);
        default: return std::nullopt;
    }
}

std::string WeightFunction::family_name() const {
    switch (family_) {
        case Family::Constant: return "constant";
        case Family::Linear: return "linear";
        case Family::Exp: return "exp";
        case Family::Log: return "log";
        case Family::LogLog: return "loglog";
        case Family::LogLogOf: return "loglog_of";
    }
    return "?";
}

nlohmann::json WeightFunction::to_json() const {
    nlohmann::json j;
    j["family"] = family_name();
    switch (family_) {
        case Family::Constant: j["c"] = param_; break;
        case Family::Linear: break;
        case Family::Exp: j["nu"] = param_; break;
        case Family::Log: j["a"] = param_; break;
        case Family::LogLog: j["upsilon"] = param_; break;
        case Family::LogLogOf:
            j["upsilon"] = param_;
            j["base"] = base_->to_json();
            break;
    }
    if (floor_ee_) j["floor_ee"] = true;
    return j;
}

WeightFunction WeightFunction::from_json(const nlohmann::json& j) {
    const std::string fam = j.at("family").get<std::string>();
    WeightFunction f;
    if (fam == "constant") f = constant(j.at("c").get<double>());
    else if (fam == "linear") f = linear();
    else if (fam == "exp") f = exponential(j.at("nu").get<double>());
    else if (fam == "log") f = log(j.at("a").get<double>());
    else if (fam == "loglog") f = loglog(j.at("upsilon").get<double>());
    else if (fam == "loglog_of")
        f = loglog_of(j.at("upsilon").get<double>(), from_json(j.at("base")));
    else
        throw ConfigError("unknown weight family: " + fam);
    if (j.value("floor_ee", false)) f = f.floored();
    return f;
}

std::vector<double> SupGrid::samples() const {
    std::vector<double> s{0.0};
    const double decades = std::log10(s_max / s_min);
    const int n = std::max(2, static_cast<int>(std::ceil(decades * points_per_decade)));
    for (int i = 0; i <= n; ++i)
        s.push_back(s_min * std::pow(s_max / s_min, static_cast<double>(i) / n));
    return s;
}

ShiftRatioResult shift_ratio_sup(const WeightFunction& f, double tau, double s_max,
                                 int points_per_decade) {
    if (tau <= 0) throw ConfigError("shift_ratio_sup: tau must be > 0");
    SupGrid grid;
    grid.s_max = s_max;
    grid.points_per_decade = points_per_decade;
    const auto ss = grid.samples();

    ShiftRatioResult res;
    res.grid_value = 1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        const double r = f(tau + ss[i]) / f(ss[i]);
        if (r > res.grid_value) {
            res.grid_value = r;
            arg = i;
        }
    }
    res.argmax = ss[arg];
    res.divergence_flag = (arg == ss.size() - 1);
    res.closed_form = f.shift_ratio_closed_form(tau);
    res.value = res.closed_form ? std::max(*res.closed_form, res.grid_value) : res.grid_value;
    return res;
}

double d_mu(double mu) { return std::pow(mu / std::exp(1.0), mu); }

namespace {

// log of z(s)^mu w(s)^{-alpha}; keeps huge powers representable
double log_margin_at(const WeightPair& pair, double s, double mu, double alpha) {
    return mu * std::log(pair.z(s)) - alpha * std::log(pair.w(s));
}

}  // namespace

WeightPair loglog_pair(const WeightFunction& w_base, double upsilon) {
    WeightPair pair;
    pair.w = w_base.floored();
    pair.z = WeightFunction::loglog_of(upsilon, w_base);
    return pair;
}

AdmissibilityResult admissibility_margin(const WeightPair& pair, double alpha, double mu,
                                         const SupGrid& grid) {
    if (alpha <= 0) throw ConfigError("admissibility_margin: alpha must be > 0");
    AdmissibilityResult res;
    const auto ss = grid.samples();
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        const double lv = log_margin_at(pair, ss[i], mu, alpha);
        if (lv > best) {
            best = lv;
            arg = i;
        }
    }
    res.sup_value = std::exp(best);
    res.argmax = ss[arg];
    res.divergence_flag = (arg == ss.size() - 1);
    if (pair.z.family() == WeightFunction::Family::LogLogOf) {
        // z = u log log w~ with w >= w~ (floored base): sup <= u^mu d_mu / (e alpha)
        res.analytic_bound = std::pow(pair.z.param(), mu) * d_mu(mu) / (std::exp(1.0) * alpha);
    }
    if (pair.certificate) res.passes = res.sup_value * alpha <= pair.certificate->D;
    return res;
}

AdmissibilityCertificate measure_D(const WeightPair& pair, double beta, double mu,
                                   const SupGrid& grid, int alpha_points) {
    if (beta <= 0 || mu <= 0) throw ConfigError("measure_D: beta, mu must be > 0");
    AdmissibilityCertificate cert;
    cert.beta = beta;
    cert.mu = mu;
    const auto ss = grid.samples();
    double D = 1.0;
    for (int i = 0; i < alpha_points; ++i) {
        // alpha log-spaced over (beta*1e-7, beta]
        const double alpha =
            beta * std::pow(1e-7, 1.0 - static_cast<double>(i + 1) / alpha_points);
        double best = -1e300;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < ss.size(); ++k) {
            const double lv = log_margin_at(pair, ss[k], mu, alpha);
            if (lv > best) {
                best = lv;
                arg = k;
            }
        }
        if (arg == ss.size() - 1) cert.divergence_flag = true;
        D = std::max(D, alpha * std::exp(best));
    }
    cert.D = D;
    return cert;
}

double scale_norm(std::span<const double> values, int nu, const WeightFunction& w, double alpha,
                  const Configuration& config) {
    if (alpha < 0) throw ConfigError("scale_norm: alpha must be >= 0");
    if (values.size() != config.size() * static_cast<std::size_t>(nu))
        throw ConfigError("scale_norm: value/configuration length mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) {
        const double qn = vec_norm(values.subspan(i * nu, nu));
        best = std::max(best, qn / std::pow(w(config.radial[i]), alpha));
    }
    return best;
}

}  // namespace rowfinite
