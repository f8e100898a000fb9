// Shared helpers for the test suites: random well-formed primitives and
// independent brute-force oracles.
#pragma once

#include "fit4cad/geometry.hpp"
#include "fit4cad/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <vector>

namespace testutil {

using fit4cad::ParametricPrimitive;
using fit4cad::Point3;
using fit4cad::PrimitiveKind;
using fit4cad::TrimRegion;
using fit4cad::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec3 v;
    do {
        v = Vec3(g(rng), g(rng), g(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline Vec3 random_point(std::mt19937_64& rng, double extent = 2.0) {
    std::uniform_real_distribution<double> u(-extent, extent);
    return {u(rng), u(rng), u(rng)};
}

/// A random well-formed primitive with moderate parameter ranges.
inline ParametricPrimitive random_primitive(PrimitiveKind kind, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> radius(0.3, 2.0);
    Vec3 w = random_unit(rng);
    Vec3 t = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 u = w.cross(t).normalized();
    Vec3 v = w.cross(u);
    Vec3 c = random_point(rng);
    switch (kind) {
        case PrimitiveKind::Plane: {
            std::uniform_real_distribution<double> len(0.5, 2.0);
            return ParametricPrimitive::make_plane(len(rng) * u, len(rng) * v, c);
        }
        case PrimitiveKind::Cylinder:
            return ParametricPrimitive::make_cylinder(c, w, radius(rng));
        case PrimitiveKind::Cone: {
            std::uniform_real_distribution<double> angle(0.15, 1.2);
            return ParametricPrimitive::make_cone(c, w, radius(rng), angle(rng));
        }
        case PrimitiveKind::Sphere: return ParametricPrimitive::make_sphere(c, radius(rng));
        case PrimitiveKind::Torus: {
            double R = radius(rng);
            std::uniform_real_distribution<double> minor(0.1, 1.0);
            return ParametricPrimitive::make_torus(c, w, R, std::min(R, R * 0.2 + minor(rng) * R * 0.5));
        }
    }
    throw std::logic_error("unknown kind");
}

inline std::vector<PrimitiveKind> all_kinds() {
    return {PrimitiveKind::Plane, PrimitiveKind::Cylinder, PrimitiveKind::Cone,
            PrimitiveKind::Sphere, PrimitiveKind::Torus};
}

/// Brute-force point-to-surface distance: a dense parameter grid of about
/// `samples` surface points, followed by local grid refinement around the
/// best sample.
inline double brute_force_distance(const ParametricPrimitive& p, const TrimRegion& trim,
                                   const Point3& q, int samples = 100000) {
    int grid = std::max(4, static_cast<int>(std::sqrt(static_cast<double>(samples))));
    double du = (trim.u_max - trim.u_min) / grid;
    double dv = (trim.v_max - trim.v_min) / grid;
    double best = std::numeric_limits<double>::infinity();
    double bu = trim.u_min, bv = trim.v_min;
    for (int i = 0; i <= grid; ++i)
        for (int j = 0; j <= grid; ++j) {
            double u = trim.u_min + i * du, v = trim.v_min + j * dv;
            double d = (fit4cad::eval_parametric(p, u, v) - q).norm();
            if (d < best) {
                best = d;
                bu = u;
                bv = v;
            }
        }
    // Local refinement: shrink a 9x9 window around the best sample.
    double hu = du, hv = dv;
    for (int level = 0; level < 24; ++level) {
        double cu = bu, cv = bv;
        for (int i = -4; i <= 4; ++i)
            for (int j = -4; j <= 4; ++j) {
                double u = cu + i * hu / 4, v = cv + j * hv / 4;
                u = std::clamp(u, trim.u_min, trim.u_max);
                v = std::clamp(v, trim.v_min, trim.v_max);
                double d = (fit4cad::eval_parametric(p, u, v) - q).norm();
                if (d < best) {
                    best = d;
                    bu = u;
                    bv = v;
                }
            }
        hu /= 3;
        hv /= 3;
    }
    return best;
}

/// Brute-force superlevel-set persistence: add cells one by one in the
/// filtration order and recompute connected components from scratch by
/// flood fill after every insertion.
inline std::vector<fit4cad::GridPeak> brute_force_persistence(const std::vector<double>& values,
                                                              const std::vector<int>& shape) {
    const int n = static_cast<int>(values.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });

    std::vector<int> strides(shape.size(), 1);
    for (int a = static_cast<int>(shape.size()) - 2; a >= 0; --a)
        strides[a] = strides[a + 1] * shape[a + 1];
    auto neighbors = [&](int idx) {
        std::vector<int> out;
        for (std::size_t a = 0; a < shape.size(); ++a) {
            int coord = idx / strides[a] % shape[a];
            if (coord > 0) out.push_back(idx - strides[a]);
            if (coord + 1 < shape[a]) out.push_back(idx + strides[a]);
        }
        return out;
    };

    std::vector<int> rank(n, -1);  // filtration position, -1 = not yet added
    // birth cell of the component containing each added cell, recomputed by
    // flood fill
    std::vector<fit4cad::GridPeak> peaks;
    for (int step = 0; step < n; ++step) {
        int cell = order[step];
        rank[cell] = step;
        // Collect the distinct components adjacent to the new cell (before
        // it joins them) by flood-filling from each added neighbor.
        std::vector<int> comp_births;
        for (int nb : neighbors(cell)) {
            if (rank[nb] < 0) continue;
            // flood fill from nb over added cells, excluding `cell`
            std::vector<int> stack = {nb};
            std::vector<char> seen(n, 0);
            seen[nb] = 1;
            int birth = nb;
            while (!stack.empty()) {
                int c = stack.back();
                stack.pop_back();
                if (rank[c] < rank[birth]) birth = c;
                for (int m : neighbors(c))
                    if (m != cell && rank[m] >= 0 && !seen[m]) {
                        seen[m] = 1;
                        stack.push_back(m);
                    }
            }
            if (std::find(comp_births.begin(), comp_births.end(), birth) == comp_births.end())
                comp_births.push_back(birth);
        }
        if (comp_births.size() > 1) {
            // The merged components except the eldest die here.
            std::sort(comp_births.begin(), comp_births.end(),
                      [&](int a, int b) { return rank[a] < rank[b]; });
            for (std::size_t k = 1; k < comp_births.size(); ++k) {
                double pers = values[comp_births[k]] - values[cell];
                if (pers > 0.0) {
                    fit4cad::GridPeak peak;
                    int idx = comp_births[k];
                    for (std::size_t a = 0; a < shape.size(); ++a)
                        peak.cell.push_back(idx / strides[a] % shape[a]);
                    peak.height = values[comp_births[k]];
                    peak.persistence = pers;
                    peaks.push_back(peak);
                }
            }
        }
    }
    // Essential components: flood fill the full grid, eldest cell per
    // component survives with death at level 0.
    {
        std::vector<char> seen(n, 0);
        for (int i = 0; i < n; ++i) {
            if (seen[i]) continue;
            std::vector<int> stack = {i};
            seen[i] = 1;
            int birth = i;
            while (!stack.empty()) {
                int c = stack.back();
                stack.pop_back();
                if (rank[c] < rank[birth]) birth = c;
                for (int m : neighbors(c))
                    if (!seen[m]) {
                        seen[m] = 1;
                        stack.push_back(m);
                    }
            }
            fit4cad::GridPeak peak;
            for (std::size_t a = 0; a < shape.size(); ++a)
                peak.cell.push_back(birth / strides[a] % shape[a]);
            peak.height = values[birth];
            peak.persistence = values[birth];
            peaks.push_back(peak);
        }
    }
    std::sort(peaks.begin(), peaks.end(), [&](const auto& a, const auto& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.cell < b.cell;
    });
    return peaks;
}

}  // namespace testutil
