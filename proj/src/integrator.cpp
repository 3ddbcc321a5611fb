#include "rowfinite/integrator.hpp"

#include <cmath>
#include <functional>

namespace rowfinite {

namespace {

using RhsFn = std::function<void(std::span<const double>, std::span<double>)>;

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// One classic RK4 step on the unfrozen entries; frozen entries never move.
void rk4_step(const RhsFn& f, std::vector<double>& y, double h,
              const std::vector<std::uint8_t>& frozen_entry, std::vector<double>& k1,
              std::vector<double>& k2, std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
    const std::size_t n = y.size();
    f(y, k1);
    for (std::size_t i = 0; i < n; ++i)
        tmp[i] = frozen_entry[i] ? y[i] : y[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i)
        tmp[i] = frozen_entry[i] ? y[i] : y[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i)
        tmp[i] = frozen_entry[i] ? y[i] : y[i] + h * k3[i];
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
        if (!frozen_entry[i]) y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Dormand-Prince 5(4) coefficients.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                 E6 = 22.0 / 525, E7 = -1.0 / 40;

struct Dopri {
    std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp, ynew;

    void resize(std::size_t n) {
        for (auto* v : {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &tmp, &ynew}) v->assign(n, 0.0);
    }

    // returns scaled error estimate; fills ynew
    double step(const RhsFn& f, const std::vector<double>& y, double h,
                const std::vector<std::uint8_t>& fz, double rel, double abs) {
        const std::size_t n = y.size();
        f(y, k1);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = fz[i] ? y[i] : y[i] + h * (A21 * k1[i]);
        f(tmp, k2);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = fz[i] ? y[i] : y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        f(tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = fz[i] ? y[i] : y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        f(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = fz[i] ? y[i]
                           : y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        f(tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = fz[i] ? y[i]
                           : y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] +
                                         A65 * k5[i]);
        f(tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = fz[i] ? y[i]
                            : y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] +
                                          B6 * k6[i]);
        f(ynew, k7);
        double err2 = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (fz[i]) continue;
            const double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] +
                                  E7 * k7[i]);
            const double sc = abs + rel * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err2 += sq(e / sc);
            ++cnt;
        }
        return cnt ? std::sqrt(err2 / static_cast<double>(cnt)) : 0.0;
    }
};

std::vector<double> record_times(double T, int n_records) {
    if (n_records < 2) n_records = 2;
    std::vector<double> ts(n_records);
    for (int k = 0; k < n_records; ++k) ts[k] = T * static_cast<double>(k) / (n_records - 1);
    ts.back() = T;
    return ts;
}

struct Recorder {
    const RecordSpec* spec;
    const Configuration* config;
    int state_dim;
    Trajectory* out;

    void push(double t, const std::vector<double>& y,
              const std::function<void(std::span<const double>, std::span<double>)>& lyap_fn) {
        out->times.push_back(t);
        out->states.push_back(y);
        std::vector<double> L(config->size());
        lyap_fn(y, L);
        out->lyapunov.push_back(std::move(L));
        std::vector<double> norms;
        norms.reserve(spec->norms.size());
        for (const auto& ns : spec->norms)
            norms.push_back(scale_norm(y, state_dim, ns.w, ns.beta, *config));
        out->norm_trace.push_back(std::move(norms));
    }
};

Trajectory integrate_generic(const RhsFn& f, const ConfigPtr& config, int state_dim,
                             const std::vector<std::uint8_t>& frozen_points,
                             std::span<const double> y0, double T, const Stepping& stepping,
                             const RecordSpec& record,
                             const std::function<void(std::span<const double>, std::span<double>)>& lyap_fn) {
    const std::size_t n = y0.size();
    std::vector<std::uint8_t> fz(n, 0);
    for (std::size_t i = 0; i < config->size(); ++i)
        if (frozen_points[i])
            for (int c = 0; c < state_dim; ++c) fz[i * state_dim + c] = 1;

    Trajectory traj;
    traj.state_dim = state_dim;
    traj.frozen = frozen_points;
    Recorder rec{&record, config.get(), state_dim, &traj};

    std::vector<double> y(y0.begin(), y0.end());
    if (!all_finite(y)) throw SolverError("integrate: non-finite initial state");
    const auto ts = record_times(T, record.n_records);
    rec.push(0.0, y, lyap_fn);

    if (std::holds_alternative<FixedStep>(stepping)) {
        const double dt = std::get<FixedStep>(stepping).dt;
        if (dt <= 0) throw ConfigError("integrate: dt must be > 0");
        std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
        double t = 0.0;
        for (std::size_t k = 1; k < ts.size(); ++k) {
            while (t < ts[k] - 1e-14 * T) {
                const double h = std::min(dt, ts[k] - t);
                rk4_step(f, y, h, fz, k1, k2, k3, k4, tmp);
                t += h;
                ++traj.diagnostics.steps;
                if (!all_finite(y))
                    throw SolverError("integrate: non-finite state at t=" + format_g17(t));
            }
            t = ts[k];
            rec.push(t, y, lyap_fn);
        }
        traj.diagnostics.accepted_dt.push_back(dt);
        return traj;
    }

    const auto& ad = std::get<AdaptiveStep>(stepping);
    if (ad.rel_tol <= 0 || ad.abs_tol <= 0) throw ConfigError("integrate: tolerances must be > 0");
    Dopri st;
    st.resize(n);
    double t = 0.0, h = std::min(ad.dt_initial, T);
    std::size_t next_rec = 1;
    std::vector<double> y_prev(n), f_prev(n), f_new(n);
    f(y, f_prev);
    while (t < T && next_rec < ts.size()) {
        h = std::min(h, T - t);
        if (h < 1e-12 * T)
            throw SolverError("integrate: adaptive step underflow at t=" + format_g17(t));
        const double err = st.step(f, y, h, fz, ad.rel_tol, ad.abs_tol);
        if (err <= 1.0) {
            y_prev = y;
            y = st.ynew;
            f_new = st.k7;  // FSAL stage = f(y_new)
            const double t_new = t + h;
            ++traj.diagnostics.steps;
            traj.diagnostics.accepted_dt.push_back(h);
            traj.diagnostics.max_error_estimate =
                std::max(traj.diagnostics.max_error_estimate, err);
            if (!all_finite(y))
                throw SolverError("integrate: non-finite state at t=" + format_g17(t_new));
            // cubic Hermite dense output for every record time inside the step
            while (next_rec < ts.size() && ts[next_rec] <= t_new + 1e-14 * T) {
                const double th = (ts[next_rec] - t) / h;
                std::vector<double> yi(n);
                for (std::size_t i = 0; i < n; ++i) {
                    if (fz[i]) {
                        yi[i] = y[i];
                        continue;
                    }
                    const double d = y[i] - y_prev[i];
                    yi[i] = y_prev[i] + th * d +
                            th * (th - 1.0) *
                                ((1.0 - 2.0 * th) * d + (th - 1.0) * h * f_prev[i] +
                                 th * h * f_new[i]);
                }
                rec.push(ts[next_rec], yi, lyap_fn);
                ++next_rec;
            }
            t = t_new;
            std::swap(f_prev, f_new);
            const double grow = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            ++traj.diagnostics.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    return traj;
}

}  // namespace

Trajectory integrate_cutoff(const ModelSpec& model, const ConfigPtr& config,
                            const std::optional<Volume>& volume, std::span<const double> q0,
                            double T, const Stepping& stepping, const RecordSpec& record) {
    if (T <= 0) throw ConfigError("integrate_cutoff: T must be > 0");
    const int sd = model.state_dim();
    if (q0.size() != config->size() * static_cast<std::size_t>(sd))
        throw ConfigError("integrate_cutoff: initial state size mismatch");

    std::vector<std::uint8_t> frozen(config->size(), 0);
    if (volume)
        for (std::size_t i = 0; i < config->size(); ++i)
            frozen[i] = volume->contains(config->point(i)) ? 0 : 1;

    RhsFn f = [&](std::span<const double> y, std::span<double> dy) {
        rhs(model, *config, y, dy);
    };
    auto lyap_fn = [&](std::span<const double> y, std::span<double> L) {
        lyapunov(model, *config, y, L);
    };
    return integrate_generic(f, config, sd, frozen, q0, T, stepping, record, lyap_fn);
}

Trajectory comparison_trajectory(const RowFiniteOperator& A_cutoff, std::span<const double> L0,
                                 double T, const std::variant<Stepping, SeriesStepping>& method,
                                 const RecordSpec& record) {
    if (T <= 0) throw ConfigError("comparison_trajectory: T must be > 0");
    const auto& config = A_cutoff.config;
    if (L0.size() != config->size()) throw ConfigError("comparison_trajectory: L0 size mismatch");
    for (double v : L0)
        if (v < 0) throw ConfigError("comparison_trajectory: L0 must be entrywise >= 0");

    auto lyap_fn = [](std::span<const double> y, std::span<double> L) {
        std::copy(y.begin(), y.end(), L.begin());
    };

    if (std::holds_alternative<Stepping>(method)) {
        std::vector<std::uint8_t> frozen(config->size(), 0);  // zero rows stay constant anyway
        RhsFn f = [&](std::span<const double> y, std::span<double> dy) {
            A_cutoff.apply(y, dy);
        };
        return integrate_generic(f, config, 1, frozen, L0, T, std::get<Stepping>(method), record,
                                 lyap_fn);
    }

    const auto& ss = std::get<SeriesStepping>(method);
    Trajectory traj;
    traj.state_dim = 1;
    traj.frozen.assign(config->size(), 0);
    const auto ts = record_times(T, record.n_records);
    for (double t : ts) {
        auto res = ovsyannikov_series(A_cutoff, L0, t, ss.params, ss.w, ss.tol, ss.max_terms);
        traj.times.push_back(t);
        traj.lyapunov.push_back(res.u);
        std::vector<double> norms;
        for (const auto& ns : record.norms)
            norms.push_back(scale_norm(res.u, 1, ns.w, ns.beta, *config));
        traj.norm_trace.push_back(std::move(norms));
        traj.diagnostics.steps = std::max<long>(traj.diagnostics.steps, res.terms_used);
        traj.diagnostics.max_error_estimate =
            std::max(traj.diagnostics.max_error_estimate, res.tail_bound);
        traj.states.push_back(std::move(res.u));
    }
    return traj;
}

ComparisonReport check_comparison(const Trajectory& traj, const Trajectory& psi, double tol_model) {
    ComparisonReport rep;
    rep.tol = tol_model;
    if (traj.n_times() != psi.n_times())
        throw ConfigError("check_comparison: time grids differ in length");
    for (std::size_t k = 0; k < traj.n_times(); ++k)
        if (std::abs(traj.times[k] - psi.times[k]) > 1e-12 * (1.0 + std::abs(traj.times[k])))
            throw ConfigError("check_comparison: time grids differ");
    const std::size_t npts = traj.lyapunov.empty() ? 0 : traj.lyapunov[0].size();
    for (std::size_t k = 0; k < traj.n_times(); ++k) {
        const auto& L = traj.lyapunov[k];
        const auto& P = psi.lyapunov[k];
        if (L.size() != npts || P.size() != npts)
            throw ConfigError("check_comparison: point grids differ");
        for (std::size_t i = 0; i < npts; ++i) {
            const double viol = (L[i] - P[i]) / (1.0 + P[i]);
            if (viol > rep.max_violation) {
                rep.max_violation = viol;
                rep.worst_time = traj.times[k];
                rep.worst_point = static_cast<std::int32_t>(i);
            }
        }
    }
    rep.pass = rep.max_violation <= tol_model;
    return rep;
}

NormGrowthReport norm_growth_check(const Trajectory& traj, const WeightPair& pair,
                                   const Configuration& config, double alpha, double beta, int j,
                                   const GrowthBoundConstants& constants) {
    if (!(beta > j * alpha)) throw ConfigError("norm_growth_check: need beta > j*alpha");
    NormGrowthReport rep;
    const auto params = lemma_majorant_params(constants.op, j * alpha, beta);
    const double norm0 = scale_norm(traj.states.at(0), traj.state_dim, pair.w, alpha, config);
    const double log_data = std::log(std::pow(norm0, j) + 1.0);
    const double log_c31 = std::log(constants.C3 / constants.C1);

    const auto ot = order_and_type(params);
    rep.rho = ot.rho;
    const double pexp = 1.0 / (constants.op.p - 1.0);
    rep.sigma_exp_weight = std::pow(constants.op.B_op, ot.rho) *
                           std::exp(ot.rho * (beta * constants.r + beta - j * alpha + 1.0)) /
                           (std::exp(1.0) * ot.rho) * std::pow(beta - j * alpha, -pexp);
    rep.sigma_shift_weight = std::pow(constants.op.B_op, ot.rho) *
                             std::pow(constants.op.w_r, beta * ot.rho) *
                             std::exp(ot.rho - 1.0) / ot.rho * std::pow(beta - j * alpha, -pexp);

    for (std::size_t k = 0; k < traj.n_times(); ++k) {
        const double lhs = scale_norm(traj.states[k], traj.state_dim, pair.w, beta, config);
        const double lm = log_majorant(params, traj.times[k]);
        // C_p(t) = (C3/C1) a(t) + 1
        double log_cp = log_c31 + lm;
        log_cp = log_cp > 0 ? log_cp + std::log1p(std::exp(-log_cp))
                            : std::log1p(std::exp(log_cp));
        const double log_rhs = log_cp + log_data;
        rep.lhs.push_back(lhs);
        rep.log_rhs.push_back(log_rhs);
        if (lhs > 0) {
            const double margin = std::log(lhs) - log_rhs;
            rep.max_log_margin = std::max(rep.max_log_margin, margin);
            if (margin > 0) rep.pass = false;
        }
    }
    return rep;
}

}  // namespace rowfinite
