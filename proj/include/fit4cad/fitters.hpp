#pragma once

#include "fit4cad/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fit4cad {

/// Direct least-squares fits of a single primitive to a point selection.
/// Normal-based fits expect unit normals (orientation may be inconsistent).
/// Each returns nullopt when the data is degenerate for the model.
std::optional<ParametricPrimitive> fit_plane_lsq(const std::vector<Point3>& cloud,
                                                 const std::vector<int>& idx);
std::optional<ParametricPrimitive> fit_sphere_lsq(const std::vector<Point3>& cloud,
                                                  const std::vector<int>& idx);
std::optional<ParametricPrimitive> fit_cylinder_lsq(const std::vector<Point3>& cloud,
                                                    const std::vector<int>& idx,
                                                    const std::vector<Vec3>& normals);
std::optional<ParametricPrimitive> fit_cone_lsq(const std::vector<Point3>& cloud,
                                                const std::vector<int>& idx,
                                                const std::vector<Vec3>& normals);
std::optional<ParametricPrimitive> fit_torus_lsq(const std::vector<Point3>& cloud,
                                                 const std::vector<int>& idx,
                                                 const std::vector<Vec3>& normals);

std::optional<ParametricPrimitive> fit_primitive_lsq(PrimitiveKind kind,
                                                     const std::vector<Point3>& cloud,
                                                     const std::vector<int>& idx,
                                                     const std::vector<Vec3>& normals);

struct RansacConfig {
    double epsilon = 0.01;  // absolute inlier distance
    int min_support = 20;
    int iterations = 1024;  // candidate draws per extraction round
    std::uint64_t seed = 0;
    std::vector<PrimitiveKind> kinds = {PrimitiveKind::Plane, PrimitiveKind::Cylinder,
                                        PrimitiveKind::Cone, PrimitiveKind::Sphere,
                                        PrimitiveKind::Torus};
};

struct RansacPart {
    std::vector<int> indices;
    ParametricPrimitive prim;
};

/// Greedy multi-model extraction over a point selection: repeatedly draw
/// minimal-sample candidates of every configured kind, keep the best
/// supported one, refine it by least squares, and claim its inliers.
/// Points left without a model stay unclaimed.
std::vector<RansacPart> ransac_decompose(const std::vector<Point3>& cloud,
                                         const std::vector<int>& idx,
                                         const std::vector<Vec3>& normals,
                                         const RansacConfig& config);

}  // namespace fit4cad
