#pragma once

#include "fit4cad/dataset.hpp"
#include "fit4cad/fitters.hpp"
#include "fit4cad/geometry.hpp"
#include "fit4cad/knn.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace fit4cad {

/// ISO GPS invariance classes by slippable-motion count:
///   3: planar, spherical; 2: cylindrical, helical; 1: prismatic, revolute;
///   0: complex.
enum class InvarianceClass {
    Planar,
    Spherical,
    Cylindrical,
    Helical,
    Prismatic,
    Revolute,
    Complex
};

const char* invariance_class_name(InvarianceClass c);

struct SlippageResult {
    std::array<double, 6> eigenvalues{};  // ascending
    int slippable = 0;                    // eigenvalues below threshold, capped at 3
    InvarianceClass cls = InvarianceClass::Complex;
};

struct PgConfig {
    int k = 16;                     // neighbors for normals / variation
    double eta = 0.8;               // sharp-edge quantile, paper interval [0.65, 0.95]
    double slippage_ratio = 1e-3;   // lambda_j / lambda_6 smallness threshold
    double ransac_epsilon = 0.01;   // fraction of the cloud bbox diagonal
    int ransac_iterations = 1024;
    std::uint64_t seed = 0;
    int min_segment_size = 20;
};

struct PgResult {
    Segmentation segmentation;
    std::vector<ParametricPrimitive> parametric;  // one per segment
    std::vector<ImplicitPrimitive> implicit;      // one per segment
};

/// Per-point unit normals from a local plane fit over k neighbors.
/// `reliable`, when given, is set to false where the neighborhood is
/// (near-)collinear.
std::vector<Vec3> estimate_normals(const std::vector<Point3>& cloud, int k,
                                   std::vector<char>* reliable = nullptr);

/// Surface variation sigma = lambda1 / (lambda1 + lambda2 + lambda3) of the
/// neighborhood covariance; in [0, 1/3], 0 for a coincident neighborhood.
std::vector<double> surface_variation(const std::vector<Point3>& cloud,
                                      const NeighborGraph& graph);

/// Marks points whose variation strictly exceeds the eta-quantile.
std::vector<char> detect_sharp_edges(const std::vector<double>& variations, double eta);

/// Flood fill over non-sharp points through the symmetric closure of the
/// neighbor graph; seed order fixed by the seeded RNG. Regions cover every
/// non-sharp point exactly once.
std::vector<std::vector<int>> region_grow(const std::vector<Point3>& cloud,
                                          const NeighborGraph& graph,
                                          const std::vector<char>& sharp, std::uint64_t seed);

/// Slippage analysis of a point selection with unit normals. Points are
/// centered and scaled to a unit bounding box internally.
SlippageResult slippage_analysis(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                                 double smallness_ratio = 1e-3);

struct PgPart {
    std::vector<int> indices;
    ParametricPrimitive prim;
};

/// Turn one coarse region of the given invariance class into fitted parts:
/// directly fittable classes pass through with a least-squares fit, the
/// undersegmented ones (prismatic, helical, complex) are decomposed by
/// RANSAC. Revolute regions try both cone and torus and keep the lower MFE.
std::vector<PgPart> refine_segment(const std::vector<Point3>& cloud,
                                   const std::vector<int>& segment,
                                   const std::vector<Vec3>& normals, InvarianceClass cls,
                                   const PgConfig& config, double bbox_diagonal);

/// Each sharp point joins the part with the nearest primitive surface
/// (ties to the lower part index); with no parts they stay unsegmented.
Segmentation assign_sharp_points(std::vector<PgPart> parts, const std::vector<int>& sharp_points,
                                 const std::vector<Point3>& cloud);

/// Full primitive-growing pipeline: normals, surface variation, sharp-edge
/// detection, region growing, slippage classification, refinement, sharp
/// point assignment. Deterministic per (cloud, config).
PgResult fit_pg(const std::vector<Point3>& cloud, const PgConfig& config);

/// Parse a PgConfig from a JSON object; unknown keys rejected.
PgConfig pg_config_from_json(const std::string& text);

}  // namespace fit4cad
