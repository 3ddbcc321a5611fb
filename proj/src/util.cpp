#include "rowfinite/util.hpp"

#include <cmath>

namespace rowfinite {

double spectral_norm(const SmallMat& m, double tol, int max_iter) {
    const int n = m.n;
    if (n == 0) return 0.0;
    if (n == 1) return std::abs(m(0, 0));

    // power iteration on M^T M; the iterate can only stall on a degenerate
    // start, so perturb deterministically and retry once
    auto run = [&](std::vector<double> v) {
        double lam = 0.0;
        std::vector<double> w(n), u(n);
        for (int it = 0; it < max_iter; ++it) {
            // u = M v; w = M^T u
            for (int i = 0; i < n; ++i) {
                double s = 0;
                for (int j = 0; j < n; ++j) s += m(i, j) * v[j];
                u[i] = s;
            }
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int i = 0; i < n; ++i) s += m(i, j) * u[i];
                w[j] = s;
            }
            double nw = vec_norm(w);
            if (nw == 0.0) return 0.0;
            double lam_new = 0.0;
            for (int j = 0; j < n; ++j) lam_new += v[j] * w[j];
            for (int j = 0; j < n; ++j) v[j] = w[j] / nw;
            if (it > 0 && std::abs(lam_new - lam) <= tol * std::max(1.0, std::abs(lam_new))) {
                lam = lam_new;
                break;
            }
            lam = lam_new;
        }
        return lam > 0 ? std::sqrt(lam) : 0.0;
    };

    std::vector<double> v0(n);
    for (int i = 0; i < n; ++i) v0[i] = 1.0 + 0.25 * i;
    double nv = vec_norm(v0);
    for (auto& x : v0) x /= nv;
    double s1 = run(v0);
    for (int i = 0; i < n; ++i) v0[i] = (i % 2 ? -1.0 : 1.0) * (1.0 + 0.5 * i);
    nv = vec_norm(v0);
    for (auto& x : v0) x /= nv;
    double s2 = run(v0);
    return std::max(s1, s2);
}

}  // namespace rowfinite
