#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rowfinite/util.hpp"

namespace rowfinite {

class WeightFunction;  // scales.hpp

constexpr std::size_t kDefaultMaxPoints = 1'000'000;

/// Axis-aligned box, one (lo,hi) pair per axis.
struct Box {
    std::vector<double> lo, hi;

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    bool contains(std::span<const double> x) const;
    static Box centered(int dim, double halfwidth);
};

/// A quenched point set with its radius-r interaction graph.
///
/// Neighbor lists always contain the point itself and are sorted ascending,
/// so n_i >= 1 and row sums have a fixed accumulation order.
struct Configuration {
    int dim = 0;
    double radius = 0.0;
    Box box;
    std::vector<double> coords;  // size() * dim, row-major
    std::optional<std::uint64_t> seed;

    // derived by rebuild_index()
    std::vector<std::vector<std::int32_t>> neighbors;
    std::vector<std::int32_t> counts;
    std::vector<double> radial;  // |x_i|

    std::size_t size() const { return counts.size(); }
    std::size_t n_points() const { return coords.size() / static_cast<std::size_t>(dim); }

    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }

    /// Cell-list neighbor search (grid side = radius); O(N) cells, exact result.
    void rebuild_index();

    nlohmann::json to_json() const;
    static Configuration from_json(const nlohmann::json& j);
};

using ConfigPtr = std::shared_ptr<const Configuration>;

struct GrowthViolation {
    std::int32_t index;
    std::int32_t count;
    double allowed;  // z(|x_i|)
};

struct GrowthReport {
    std::vector<GrowthViolation> violations;
    double max_ratio = 0.0;  // max_i n_i / z(|x_i|)
    bool ok() const { return violations.empty(); }
};

/// Integer lattice {spacing*k : |k_i| <= extent}, centered at the origin.
Configuration gen_lattice(int dim, int extent, double spacing, double radius,
                          std::size_t max_points = kDefaultMaxPoints);

/// Homogeneous Poisson sample on box: count ~ Poisson(intensity*volume),
/// positions i.i.d. uniform. Same seed, same configuration, bit for bit.
Configuration gen_poisson(int dim, double intensity, const Box& box, double radius,
                          std::uint64_t seed, std::size_t max_points = kDefaultMaxPoints);

/// Verifies n_i <= z(|x_i|) point by point.
GrowthReport check_growth(const Configuration& config, const WeightFunction& z);

/// Smallest a with n_i <= a * shape(|x_i|) across the configuration.
/// shape is the growth profile with unit front factor (e.g. 1+log(1+s)).
double calibrate_front_factor(const Configuration& config, const WeightFunction& unit_shape);

}  // namespace rowfinite
