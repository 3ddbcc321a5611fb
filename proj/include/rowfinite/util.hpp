#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rowfinite {

/// Thrown when a generator would exceed the configured point budget.
struct ResourceLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an integration or series evaluation cannot proceed
/// (step underflow, non-finite state, term cap exceeded).
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on invalid parameters or malformed configuration documents.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Worker cap from ROWFINITE_THREADS (default 1; clamped to hardware).
inline int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("ROWFINITE_THREADS");
        long v = env ? std::strtol(env, nullptr, 10) : 1;
        long hw = static_cast<long>(std::thread::hardware_concurrency());
        if (hw <= 0) hw = 1;
        if (v < 1) v = 1;
        if (v > hw) v = hw;
        return static_cast<int>(v);
    }();
    return n;
}

/// Splits [0,n) into contiguous chunks, one per worker. fn(begin, end) must
/// only write to indices in its own range; per-index work keeps a fixed
/// evaluation order, so results do not depend on the worker count.
template <typename Fn>
void parallel_ranges(std::size_t n, Fn&& fn, std::size_t grain = 2048) {
    int workers = thread_count();
    if (workers <= 1 || n < 2 * grain) {
        fn(std::size_t{0}, n);
        return;
    }
    std::size_t chunks = static_cast<std::size_t>(workers);
    if (chunks > n / grain) chunks = n / grain;
    if (chunks < 2) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(chunks - 1);
    std::size_t step = (n + chunks - 1) / chunks;
    for (std::size_t c = 1; c < chunks; ++c) {
        std::size_t b = c * step, e = std::min(n, b + step);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(std::size_t{0}, std::min(n, step));
    for (auto& th : pool) th.join();
}

/// Round-trip exact decimal form, used everywhere floats reach a report.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Small square matrix (spin-block sized; ν or 2ν per side).
struct SmallMat {
    int n = 0;
    std::vector<double> a;  // row-major

    SmallMat() = default;
    explicit SmallMat(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

    void set_zero() { std::fill(a.begin(), a.end(), 0.0); }
    void add_identity(double s) {
        for (int i = 0; i < n; ++i) (*this)(i, i) += s;
    }
    /// rank-one update: a += s * u v^T
    void add_outer(double s, std::span<const double> u, std::span<const double> v) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) (*this)(i, j) += s * u[i] * v[j];
    }
    double max_abs() const {
        double m = 0;
        for (double x : a) m = std::max(m, std::abs(x));
        return m;
    }
};

/// Spectral norm (largest singular value) by power iteration on MᵀM.
/// Deterministic start vector; |entry| for 1×1.
double spectral_norm(const SmallMat& m, double tol = 1e-10, int max_iter = 2000);

inline double sq(double x) { return x * x; }

/// Euclidean norm of a small span.
inline double vec_norm(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace rowfinite
