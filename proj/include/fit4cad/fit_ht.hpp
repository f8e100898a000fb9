#pragma once

#include "fit4cad/dataset.hpp"
#include "fit4cad/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fit4cad {

/// Axis-aligned box in a reduced parameter space, discretized into cells.
/// The reduced parameterization per family (coordinates in order):
///   Plane     3 axes  [theta, phi, rho]      normal on a hemisphere + offset
///   Sphere    4 axes  [r, cx, cy, cz]
///   Cylinder  stage 1: 2 axes [theta, phi] (axis direction);
///             stage 2: 3 axes [px, py, r] in the plane orthogonal to a
///             fixed axis direction (see `frame_dir`)
///   Cone      3 axes  [theta, phi, s]        axis direction + s = sin(half angle)
///   Torus     stage 1: 4 axes [theta, phi, px, py] (axis line);
///             stage 2: 3 axes [z0, R, r] in cylindrical coordinates about a
///             fixed axis line (`frame_dir`, `frame_point`)
/// Directions are dir(theta, phi) = (sin t cos p, sin t sin p, cos t) with
/// theta in [0, pi], phi in [0, pi) — one hemisphere.
struct ParamRegion {
    struct Axis {
        double low = 0.0, high = 1.0;
        int cells = 1;
    };
    PrimitiveKind family = PrimitiveKind::Plane;
    std::vector<Axis> axes;
    // Conditioning frame of stage-2 regions; unused otherwise.
    Vec3 frame_dir = Vec3::UnitZ();
    Vec3 frame_point = Vec3::Zero();

    void validate() const;
    int cell_count() const;
    double center(int axis, int cell) const;
    int locate(int axis, double value) const;  // -1 when outside
};

struct Accumulator {
    ParamRegion region;
    std::vector<int> votes;  // dense, row-major over region.axes
};

/// Local maximum of an accumulator with its topological persistence.
struct Peak {
    std::vector<double> coords;  // cell-center coordinates, parameter units
    double height = 0.0;
    double persistence = 0.0;
};

struct HtConfig {
    int angular_cells = 64;       // theta/phi/offset axes of 3-D accumulators
    int volume_cells = 32;        // axes of 4-D and 5-D accumulators
    double epsilon = 0.01;        // inlier distance, fraction of cloud bbox diagonal
    double persistence_ratio = 0.10;
    int min_segment_size = 20;
    int max_iterations = 64;
    int max_voters = 2000;        // points voting per accumulator build
    std::vector<PrimitiveKind> families = {PrimitiveKind::Plane, PrimitiveKind::Cylinder,
                                           PrimitiveKind::Cone, PrimitiveKind::Sphere,
                                           PrimitiveKind::Torus};
};

struct HtResult {
    Segmentation segmentation;
    std::vector<ParametricPrimitive> parametric;
    std::vector<ImplicitPrimitive> implicit;
};

/// One vote per cell a point's Hough hypersurface intersects, accumulated
/// over all points. Deterministic; additive over point-set partitions.
Accumulator build_accumulator(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                              const ParamRegion& region);

/// Persistent local maxima of the vote grid (persistence > ratio * max),
/// sorted by descending height.
std::vector<Peak> persistent_maxima(const Accumulator& acc, double ratio);

/// Primitive at the reduced coordinates of a peak (full per-family
/// coordinate layouts as documented on ParamRegion); nullopt when the
/// coordinates violate well-formedness.
std::optional<ParametricPrimitive> candidate_from_peak(const Peak& peak, PrimitiveKind family);

/// Indices from `candidates` within epsilon * bbox-diagonal(cloud) of the
/// surface.
std::vector<int> assign_inliers(const std::vector<Point3>& cloud,
                                const std::vector<int>& candidates,
                                const ParametricPrimitive& surf, double epsilon);

/// Candidate with the lowest mean fitting error on the subset; ties broken
/// by family order Plane < Cylinder < Cone < Sphere < Torus.
ParametricPrimitive select_best_type(const std::vector<Point3>& cloud,
                                     const std::vector<int>& subset,
                                     const std::vector<ParametricPrimitive>& candidates);

/// Greedy Hough-transform segmentation: per family, vote over the unclaimed
/// points, materialize candidates from persistent accumulator maxima, claim
/// the inliers of the best-supported candidate, and repeat. Deterministic.
HtResult fit_ht(const std::vector<Point3>& cloud, const HtConfig& config);

/// Parse an HtConfig from a JSON object; unknown keys rejected.
HtConfig ht_config_from_json(const std::string& text);

}  // namespace fit4cad
