#pragma once

#include "fit4cad/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace fit4cad {

/// Point indices of one labeled primitive.
struct Segment {
    std::vector<int> indices;
};

/// A partition proposal: segments plus the implied unsegmented remainder.
struct Segmentation {
    std::vector<Segment> segments;
    int cloud_size = 0;

    std::vector<int> unsegmented() const;
};

/// Ground-truth model: point cloud, labeled segments and, when available,
/// the exact parametric and implicit form of each segment.
struct GroundTruthModel {
    std::vector<Point3> cloud;
    std::vector<Segment> segments;
    std::vector<ParametricPrimitive> parametric;  // empty or one per segment
    std::vector<ImplicitPrimitive> implicit;      // empty or one per segment

    void validate() const;
};

/// Knobs of the synthetic model generator.
struct GeneratorSpec {
    int min_primitives = 5;
    int max_primitives = 15;
    // Relative weight of each feature template drawing from the kinds below.
    double plane_weight = 1.0;
    double cylinder_weight = 1.0;
    double cone_weight = 1.0;
    double sphere_weight = 1.0;
    double torus_weight = 1.0;
    int min_points = 8000;
    int max_points = 12000;
    double noise_sigma = 0.0;  // fraction of the model bbox diagonal
    int hole_count = 0;
    double hole_radius = 0.05;  // fraction of the model bbox diagonal

    void validate() const;
};

/// Assemble a model from trimmed primitive features placed on a jittered
/// grid; per-segment point budgets are proportional to patch area.
/// Deterministic per (spec, seed).
GroundTruthModel generate_model(const GeneratorSpec& spec, std::uint64_t seed);

/// Remove all points inside `hole_count` balls of radius `hole_radius`
/// centered at randomly selected cloud points; indices are re-mapped to the
/// compacted cloud and empty segments dropped.
GroundTruthModel simulate_missing_data(const GroundTruthModel& m, int hole_count,
                                       double hole_radius, std::uint64_t seed);

/// Write Files 1-4 (points.txt, segments.txt, parametric.txt, implicit.txt).
void write_ground_truth(const GroundTruthModel& m, const std::filesystem::path& dir);

struct ReadOptions {
    int index_base = 0;  // interpret File 2 indices as 0- or 1-based
};

GroundTruthModel read_ground_truth(const std::filesystem::path& dir, const ReadOptions& opts = {});

/// Read a single File 2; indices validated against cloud_size.
std::vector<Segment> read_segment_file(const std::filesystem::path& file, int cloud_size,
                                       int index_base = 0);
/// Read a single File 3 / File 4.
std::vector<ParametricPrimitive> read_parametric_file(const std::filesystem::path& file);
std::vector<ImplicitPrimitive> read_implicit_file(const std::filesystem::path& file);

/// One File 2 statement, e.g. "Primitive6:=[4 9 184]".
std::string format_segment_line(int number, const std::vector<int>& indices);
/// One File 3/4 statement, e.g. "Primitive1:=[Plane, [0 0 1 0]]".
std::string format_primitive_line(int number, PrimitiveKind kind,
                                  const std::vector<double>& values);

/// Deterministic seeded shuffle split into (train, test).
std::pair<std::vector<int>, std::vector<int>> split_train_test(int model_count,
                                                               double test_fraction,
                                                               std::uint64_t seed);

}  // namespace fit4cad
