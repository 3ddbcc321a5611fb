#include "rowfinite/linop.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

namespace rowfinite {

bool Volume::contains(std::span<const double> x) const {
    if (std::holds_alternative<double>(shape)) {
        return vec_norm(x) <= std::get<double>(shape);
    }
    return std::get<Box>(shape).contains(x);
}

nlohmann::json Volume::to_json() const {
    if (std::holds_alternative<double>(shape)) return {{"radius", std::get<double>(shape)}};
    const auto& b = std::get<Box>(shape);
    return {{"box", {{"lo", b.lo}, {"hi", b.hi}}}};
}

Volume Volume::from_json(const nlohmann::json& j) {
    if (j.contains("radius")) return Volume::ball(j.at("radius").get<double>());
    if (j.contains("box")) {
        Box b;
        b.lo = j.at("box").at("lo").get<std::vector<double>>();
        b.hi = j.at("box").at("hi").get<std::vector<double>>();
        return Volume::box(std::move(b));
    }
    throw ConfigError("volume: expected 'radius' or 'box'");
}

RowFiniteOperator build_A(ConfigPtr config, double C, int m) {
    if (!config) throw ConfigError("build_A: null configuration");
    if (C <= 0) throw ConfigError("build_A: C must be > 0");
    if (m < 1) throw ConfigError("build_A: m must be >= 1");
    RowFiniteOperator A;
    A.config = std::move(config);
    A.C = C;
    A.m = m;
    const auto& cfg = *A.config;
    A.rows.resize(cfg.size());
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        auto& row = A.rows[i];
        row.reserve(cfg.neighbors[i].size());
        const double ni = cfg.counts[i];
        for (std::int32_t j : cfg.neighbors[i]) {
            const double nj = cfg.counts[static_cast<std::size_t>(j)];
            row.emplace_back(j, C * std::pow(ni * nj, m));
        }
    }
    return A;
}

RowFiniteOperator cutoff(const RowFiniteOperator& A, const Volume& volume) {
    RowFiniteOperator B = A;
    B.cutoff_volume = volume;
    const auto& cfg = *A.config;
    for (std::size_t i = 0; i < B.rows.size(); ++i)
        if (!volume.contains(cfg.point(i))) B.rows[i].clear();
    return B;
}

bool RowFiniteOperator::is_zero() const {
    for (const auto& row : rows)
        if (!row.empty()) return false;
    return true;
}

double RowFiniteOperator::max_row_sum() const {
    double best = 0.0;
    for (const auto& row : rows) {
        double s = 0;
        for (const auto& [j, a] : row) s += a;
        best = std::max(best, s);
    }
    return best;
}

void RowFiniteOperator::apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != rows.size() || y.size() != rows.size())
        throw ConfigError("operator apply: size mismatch");
    parallel_ranges(rows.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            double s = 0.0;
            for (const auto& [j, a] : rows[i]) s += a * x[static_cast<std::size_t>(j)];
            y[i] = s;
        }
    });
}

double RowFiniteOperator::exact_norm(const WeightFunction& w, double alpha_from,
                                     double alpha_to) const {
    const auto& cfg = *config;
    std::vector<double> wf(cfg.size());
    for (std::size_t i = 0; i < cfg.size(); ++i) wf[i] = std::pow(w(cfg.radial[i]), alpha_from);
    double best = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double s = 0.0;
        for (const auto& [j, a] : rows[i]) s += a * wf[static_cast<std::size_t>(j)];
        best = std::max(best, s / std::pow(w(cfg.radial[i]), alpha_to));
    }
    return best;
}

void RowFiniteOperator::export_coordinate_list(std::ostream& os) const {
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (const auto& [j, a] : rows[i])
            os << i << ' ' << j << ' ' << format_g17(a) << '\n';
}

OperatorBoundConstants operator_bound_constants(const RowFiniteOperator& A, const WeightPair& pair,
                                                double p, double beta, const SupGrid& grid) {
    if (p <= 1) throw ConfigError("operator_bound_constants: p must be > 1");
    if (beta <= 0) throw ConfigError("operator_bound_constants: beta must be > 0");
    OperatorBoundConstants k;
    k.p = p;
    k.beta = beta;
    const double r = A.config->radius;
    if (r > 0) {
        k.w_r = shift_ratio_sup(pair.w, r, grid.s_max, grid.points_per_decade).value;
        k.z_r = shift_ratio_sup(pair.z, r, grid.s_max, grid.points_per_decade).value;
    }
    k.M = A.C * std::pow(k.z_r, A.m);
    auto cert = measure_D(pair, p * beta, p * (2 * A.m + 1), grid);
    k.D = cert.D;
    k.divergence_flag = cert.divergence_flag;
    k.B_op = k.M * std::pow(k.D / p, 1.0 / p);
    return k;
}

OpNormReport empirical_op_norm(const RowFiniteOperator& A, const WeightPair& pair, double alpha_lo,
                               double alpha_hi, double p, double beta, int trials,
                               std::uint64_t seed, const SupGrid& grid) {
    if (!(0 < alpha_lo && alpha_lo < alpha_hi && alpha_hi <= beta))
        throw ConfigError("empirical_op_norm: need 0 < alpha' < alpha'' <= beta");
    const auto& cfg = *A.config;
    const std::size_t n = cfg.size();
    std::vector<double> wlo(n), whi(n);
    for (std::size_t i = 0; i < n; ++i) {
        wlo[i] = std::pow(pair.w(cfg.radial[i]), alpha_lo);
        whi[i] = std::pow(pair.w(cfg.radial[i]), alpha_hi);
    }

    double estimate = 0.0;
    // all basis vectors at once: ratio_j = max_i A_ij w_j^{a'} / w_i^{a''}
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, a] : A.rows[i])
            estimate = std::max(estimate, a * wlo[static_cast<std::size_t>(j)] / whi[i]);
    // the extremal vector q_j = w_j^{a'} attains the exact norm
    estimate = std::max(estimate, A.exact_norm(pair.w, alpha_lo, alpha_hi));

    std::mt19937_64 rng(seed);
    std::vector<double> q(n), Aq(n);
    for (int t = 0; t < trials; ++t) {
        double umax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
            q[i] = u * wlo[i];
            umax = std::max(umax, std::abs(u));
        }
        if (umax == 0.0) continue;
        for (auto& v : q) v /= umax;  // now ||q||_{a'} = 1
        A.apply(q, Aq);
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm = std::max(nrm, std::abs(Aq[i]) / whi[i]);
        estimate = std::max(estimate, nrm);
    }

    OpNormReport rep;
    rep.constants = operator_bound_constants(A, pair, p, beta, grid);
    rep.estimate = estimate;
    rep.bound = rep.constants.B_op * std::pow(rep.constants.w_r, alpha_lo) *
                std::pow(alpha_hi - alpha_lo, -1.0 / p);
    rep.ratio = rep.bound > 0 ? rep.estimate / rep.bound : (rep.estimate > 0 ? 1e300 : 0.0);
    rep.violation = rep.ratio > 1.0;
    return rep;
}

MajorantParams MajorantParams::from_c(double c, double q, double alpha, double beta) {
    if (!(q > 0 && q < 1)) throw ConfigError("majorant: q must be in (0,1)");
    if (!(beta > alpha && alpha >= 0)) throw ConfigError("majorant: need 0 <= alpha < beta");
    if (c < 0) throw ConfigError("majorant: c must be >= 0");
    return MajorantParams{c, q, alpha, beta};
}

MajorantParams MajorantParams::from_B(double B, double q, double alpha, double beta) {
    if (!(q > 0 && q < 1)) throw ConfigError("majorant: q must be in (0,1)");
    if (!(beta > alpha && alpha >= 0)) throw ConfigError("majorant: need 0 <= alpha < beta");
    if (B < 0) throw ConfigError("majorant: B must be >= 0");
    return MajorantParams{B * std::pow(beta - alpha, q), q, alpha, beta};
}

MajorantParams lemma_majorant_params(const OperatorBoundConstants& k, double alpha, double beta) {
    const double c = k.B_op * std::pow(k.w_r, beta);
    return MajorantParams::from_c(c, 1.0 / k.p, alpha, beta);
}

namespace {

// log of term n of the majorant: n log(Bet) - (1-q) n log n  (term 0 = 1)
inline double log_term(double n, double x, double one_minus_q) {
    return n * x - one_minus_q * n * std::log(n);
}

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -1e300 || a - b > 45.0) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace

double log_majorant(const MajorantParams& params, double t, std::size_t direct_cap) {
    const double B = params.B();
    if (t <= 0 || B <= 0) return 0.0;  // a(t) = 1
    const double one_minus_q = 1.0 - params.q;
    const double x = std::log(B * std::exp(1.0) * t);
    const double n_star = std::exp(x / one_minus_q - 1.0);

    if (n_star > static_cast<double>(direct_cap)) {
        // Laplace approximation around the peak term
        const double rho = 1.0 / one_minus_q;
        const double log_peak = one_minus_q * n_star;  // = sigma t^rho
        return log_peak + 0.5 * std::log(2.0 * M_PI * rho * n_star);
    }

    double lse = 0.0;  // term n = 0
    const std::size_t n_end = static_cast<std::size_t>(n_star) + 8;
    for (std::size_t n = 1;; ++n) {
        const double v = log_term(static_cast<double>(n), x, one_minus_q);
        lse = log_add(lse, v);
        if (n > n_end && v < lse - 45.0) break;
    }
    return lse;
}

namespace {

// log_tails[N] = log of a certified upper bound of sum_{n>N} (Be)^n n^{-(1-q)n} t^n.
// The table extends until the tail can fall below log_target; empty result
// means certification is impossible within max_terms.
std::vector<double> majorant_log_suffix_tails(const MajorantParams& params, double t,
                                              int max_terms, double log_target) {
    const double B = params.B();
    if (t <= 0 || B <= 0) return {-1e300};
    const double one_minus_q = 1.0 - params.q;
    const double x = std::log(B * std::exp(1.0) * t);
    const double n_star = std::exp(x / one_minus_q - 1.0);

    std::vector<double> lt{0.0};  // log terms, n = 0..
    double prev = 0.0;
    while (true) {
        const std::size_t n = lt.size();
        if (n > static_cast<std::size_t>(max_terms) + 1) return {};
        const double v = log_term(static_cast<double>(n), x, one_minus_q);
        lt.push_back(v);
        // stop once past the peak, below the target depth and decaying briskly
        if (static_cast<double>(n) > n_star + 2 && v < log_target - 3.0 && v - prev < std::log(0.7))
            break;
        prev = v;
    }
    const std::size_t n_end = lt.size() - 1;
    // geometric remainder past n_end: term ratios only shrink there
    const double log_r = log_term(static_cast<double>(n_end + 1), x, one_minus_q) - lt[n_end];
    const double log_rem =
        log_term(static_cast<double>(n_end + 1), x, one_minus_q) - std::log1p(-std::exp(log_r));

    std::vector<double> tails(n_end + 1);
    tails[n_end] = log_rem;
    for (std::size_t n = n_end; n-- > 0;) tails[n] = log_add(tails[n + 1], lt[n + 1]);
    return tails;
}

}  // namespace

SeriesResult ovsyannikov_series(const RowFiniteOperator& A, std::span<const double> u0, double t,
                                const MajorantParams& params, const WeightFunction& w, double tol,
                                int max_terms) {
    if (tol <= 0) throw ConfigError("ovsyannikov_series: tol must be > 0");
    if (u0.size() != A.size()) throw ConfigError("ovsyannikov_series: u0 size mismatch");
    SeriesResult res;
    res.u.assign(u0.begin(), u0.end());
    if (t == 0) return res;

    const double norm_u0 = scale_norm(u0, 1, w, params.alpha, *A.config);
    if (norm_u0 == 0.0) return res;  // u stays identically zero

    const double log_target = std::log(tol) - std::log(norm_u0);
    const auto log_tails = majorant_log_suffix_tails(params, t, max_terms, log_target);
    if (log_tails.empty())
        throw SolverError("ovsyannikov_series: majorant tail not certifiable within " +
                          std::to_string(max_terms) + " terms (B*t too large)");

    std::size_t N = log_tails.size() - 1;
    bool reached = false;
    for (std::size_t n = 0; n < log_tails.size(); ++n) {
        if (log_tails[n] < log_target) {
            N = n;
            reached = true;
            break;
        }
    }
    if (!reached)
        throw SolverError("ovsyannikov_series: requested tolerance unreachable under term cap");

    std::vector<double> v(u0.begin(), u0.end()), Av(A.size());
    for (std::size_t n = 1; n <= N; ++n) {
        A.apply(v, Av);
        const double s = t / static_cast<double>(n);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = s * Av[i];
            res.u[i] += v[i];
        }
    }
    res.terms_used = static_cast<int>(N);
    res.tail_bound = std::exp(log_tails[N]) * norm_u0;
    return res;
}

OrderType order_and_type(const MajorantParams& params) {
    OrderType ot;
    ot.rho = 1.0 / (1.0 - params.q);
    const double Be = params.B() * std::exp(1.0);
    ot.sigma = std::pow(Be, ot.rho) / (std::exp(1.0) * ot.rho);
    return ot;
}

EmpiricalOrderResult empirical_order(const MajorantParams& params, std::span<const double> t_grid) {
    EmpiricalOrderResult res;
    res.rho_analytic = 1.0 / (1.0 - params.q);
    if (params.B() <= 0 || t_grid.size() < 2) {
        res.degenerate = true;
        return res;
    }
    double t_min = 1e300, t_max = 0;
    for (double t : t_grid) {
        if (t <= 0) throw ConfigError("empirical_order: t_grid must be positive");
        t_min = std::min(t_min, t);
        t_max = std::max(t_max, t);
    }
    if (t_max / t_min < 1e3)
        throw ConfigError("empirical_order: t_grid must span at least 3 decades");

    // least-squares slope of log log a(t) vs log t over the largest decade
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (double t : t_grid) {
        if (t < t_max / 10.0) continue;
        const double la = log_majorant(params, t);
        if (la <= 0) {
            res.degenerate = true;
            return res;
        }
        const double xx = std::log(t), yy = std::log(la);
        sx += xx;
        sy += yy;
        sxx += xx * xx;
        sxy += xx * yy;
        ++cnt;
    }
    if (cnt < 2) {
        res.degenerate = true;
        return res;
    }
    const double denom = cnt * sxx - sx * sx;
    if (denom == 0) {
        res.degenerate = true;
        return res;
    }
    res.rho_hat = (cnt * sxy - sx * sy) / denom;
    return res;
}

}  // namespace rowfinite
