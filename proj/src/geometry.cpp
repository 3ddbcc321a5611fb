#include "rowfinite/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "rowfinite/scales.hpp"

namespace rowfinite {

double Box::volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(std::span<const double> x) const {
    for (int i = 0; i < dim(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

Box Box::centered(int dim, double halfwidth) {
    Box b;
    b.lo.assign(dim, -halfwidth);
    b.hi.assign(dim, halfwidth);
    return b;
}

namespace {

struct CellKey {
    std::vector<std::int64_t> c;
    bool operator==(const CellKey& o) const { return c == o.c; }
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
        std::size_t h = 1469598103934665603ull;
        for (auto v : k.c) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace

void Configuration::rebuild_index() {
    const std::size_t n = n_points();
    neighbors.assign(n, {});
    counts.assign(n, 0);
    radial.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) radial[i] = vec_norm(point(i));

    const double r = radius;
    const double cell = r > 0 ? r : 1.0;
    std::unordered_map<CellKey, std::vector<std::int32_t>, CellKeyHash> grid;
    auto key_of = [&](std::size_t i) {
        CellKey k;
        k.c.resize(dim);
        auto p = point(i);
        for (int d = 0; d < dim; ++d) k.c[d] = static_cast<std::int64_t>(std::floor(p[d] / cell));
        return k;
    };
    for (std::size_t i = 0; i < n; ++i) grid[key_of(i)].push_back(static_cast<std::int32_t>(i));

    const double r2 = r * r;
    std::vector<std::int64_t> off(dim, -1);
    for (std::size_t i = 0; i < n; ++i) {
        auto pi = point(i);
        CellKey base = key_of(i);
        auto& list = neighbors[i];
        // visit the 3^dim cell neighborhood
        std::fill(off.begin(), off.end(), -1);
        while (true) {
            CellKey k = base;
            for (int d = 0; d < dim; ++d) k.c[d] += off[d];
            auto it = grid.find(k);
            if (it != grid.end()) {
                for (std::int32_t j : it->second) {
                    double d2 = 0;
                    auto pj = point(static_cast<std::size_t>(j));
                    for (int d = 0; d < dim; ++d) d2 += sq(pi[d] - pj[d]);
                    if (d2 <= r2) list.push_back(j);
                }
            }
            int d = dim - 1;
            while (d >= 0 && off[d] == 1) off[d--] = -1;
            if (d < 0) break;
            ++off[d];
        }
        std::sort(list.begin(), list.end());
        counts[i] = static_cast<std::int32_t>(list.size());
    }
}

Configuration gen_lattice(int dim, int extent, double spacing, double radius,
                          std::size_t max_points) {
    if (dim < 1) throw ConfigError("gen_lattice: dim must be >= 1");
    if (extent < 0) throw ConfigError("gen_lattice: extent must be >= 0");
    if (spacing <= 0) throw ConfigError("gen_lattice: spacing must be > 0");
    if (radius < 0) throw ConfigError("gen_lattice: radius must be >= 0");

    const std::size_t side = 2 * static_cast<std::size_t>(extent) + 1;
    std::size_t count = 1;
    for (int d = 0; d < dim; ++d) {
        if (count > max_points / side + 1) throw ResourceLimitError("gen_lattice: point budget exceeded");
        count *= side;
    }
    if (count > max_points) throw ResourceLimitError("gen_lattice: point budget exceeded");

    Configuration cfg;
    cfg.dim = dim;
    cfg.radius = radius;
    cfg.box = Box::centered(dim, spacing * extent);
    cfg.coords.reserve(count * static_cast<std::size_t>(dim));
    std::vector<int> k(dim, -extent);
    while (true) {
        for (int d = 0; d < dim; ++d) cfg.coords.push_back(spacing * k[d]);
        int d = dim - 1;
        while (d >= 0 && k[d] == extent) k[d--] = -extent;
        if (d < 0) break;
        ++k[d];
    }
    cfg.rebuild_index();
    return cfg;
}

namespace {

// Portable uniform in [0,1) from the top 53 bits.
double next_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Poisson count by summing unit exponentials; O(mean) draws, portable.
std::size_t poisson_count(std::mt19937_64& rng, double mean) {
    double t = 0.0;
    std::size_t n = 0;
    while (true) {
        double u = next_uniform(rng);
        t += -std::log1p(-u);
        if (t > mean) return n;
        ++n;
    }
}

}  // namespace

Configuration gen_poisson(int dim, double intensity, const Box& box, double radius,
                          std::uint64_t seed, std::size_t max_points) {
    if (dim < 1) throw ConfigError("gen_poisson: dim must be >= 1");
    if (intensity <= 0) throw ConfigError("gen_poisson: intensity must be > 0");
    if (box.dim() != dim) throw ConfigError("gen_poisson: box dimension mismatch");
    for (int d = 0; d < dim; ++d)
        if (!(box.hi[d] > box.lo[d])) throw ConfigError("gen_poisson: degenerate box");
    if (radius < 0) throw ConfigError("gen_poisson: radius must be >= 0");

    const double mean = intensity * box.volume();
    if (mean > 4.0 * static_cast<double>(max_points))
        throw ResourceLimitError("gen_poisson: expected point count exceeds budget");

    std::mt19937_64 rng(seed);
    const std::size_t n = poisson_count(rng, mean);
    if (n > max_points) throw ResourceLimitError("gen_poisson: sampled point count exceeds budget");

    Configuration cfg;
    cfg.dim = dim;
    cfg.radius = radius;
    cfg.box = box;
    cfg.seed = seed;
    cfg.coords.resize(n * static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d)
            cfg.coords[i * dim + d] = box.lo[d] + (box.hi[d] - box.lo[d]) * next_uniform(rng);
    cfg.rebuild_index();
    return cfg;
}

GrowthReport check_growth(const Configuration& config, const WeightFunction& z) {
    GrowthReport rep;
    for (std::size_t i = 0; i < config.size(); ++i) {
        const double allowed = z(config.radial[i]);
        const double ratio = config.counts[i] / allowed;
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (config.counts[i] > allowed) {
            rep.violations.push_back(
                {static_cast<std::int32_t>(i), config.counts[i], allowed});
        }
    }
    return rep;
}

double calibrate_front_factor(const Configuration& config, const WeightFunction& unit_shape) {
    double a = 1.0;
    for (std::size_t i = 0; i < config.size(); ++i)
        a = std::max(a, config.counts[i] / unit_shape(config.radial[i]));
    return a;
}

nlohmann::json Configuration::to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    j["radius"] = radius;
    j["box"] = {{"lo", box.lo}, {"hi", box.hi}};
    auto pts = nlohmann::json::array();
    for (std::size_t i = 0; i < n_points(); ++i) {
        auto p = point(i);
        pts.push_back(std::vector<double>(p.begin(), p.end()));
    }
    j["points"] = std::move(pts);
    if (seed) j["seed"] = *seed;
    return j;
}

Configuration Configuration::from_json(const nlohmann::json& j) {
    Configuration cfg;
    cfg.dim = j.at("dim").get<int>();
    if (cfg.dim < 1) throw ConfigError("configuration: dim must be >= 1");
    cfg.radius = j.at("radius").get<double>();
    if (cfg.radius < 0) throw ConfigError("configuration: radius must be >= 0");
    cfg.box.lo = j.at("box").at("lo").get<std::vector<double>>();
    cfg.box.hi = j.at("box").at("hi").get<std::vector<double>>();
    if (cfg.box.dim() != cfg.dim || static_cast<int>(cfg.box.hi.size()) != cfg.dim)
        throw ConfigError("configuration: box dimension mismatch");
    for (const auto& p : j.at("points")) {
        auto v = p.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != cfg.dim)
            throw ConfigError("configuration: point dimension mismatch");
        cfg.coords.insert(cfg.coords.end(), v.begin(), v.end());
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.rebuild_index();
    return cfg;
}

}  // namespace rowfinite
