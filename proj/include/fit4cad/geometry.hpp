#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fit4cad {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;

enum class PrimitiveKind { Plane, Cylinder, Cone, Sphere, Torus };

const char* kind_name(PrimitiveKind k);
PrimitiveKind kind_from_name(const std::string& name);

/// Number of stored parameters of the parametric form of each kind.
int parametric_size(PrimitiveKind k);
/// Number of stored coefficients of the implicit form of each kind.
int implicit_size(PrimitiveKind k);

/// Parameter-domain rectangle used to bound sampling.
struct TrimRegion {
    double u_min = 0.0, u_max = 1.0;
    double v_min = 0.0, v_max = 1.0;

    TrimRegion() = default;
    TrimRegion(double u0, double u1, double v0, double v1);
};

/// A surface of one of the five simple kinds, stored as the flat
/// parameter vector of its parametric form:
///   Plane     [a b c]              x = a u + b v + c
///   Cylinder  [a b c d]            x = a cos u + b sin u + c v + d
///   Cone      [a b c d e f]        x = a cos u + b sin u + v (c cos u + d sin u + e) + f
///   Sphere    [a b c d]            x = (a cos u + b sin u) cos v + c sin v + d
///   Torus     [a b c d e f]        x = a cos u + b sin u + (c cos u + d sin u) cos v + e sin v + f
/// Each letter is a 3-vector; constructors check the well-formedness
/// constraints of each kind (orthogonality, equal radii, and so on).
class ParametricPrimitive {
public:
    ParametricPrimitive(PrimitiveKind kind, std::vector<double> params);

    PrimitiveKind kind() const { return kind_; }
    const std::vector<double>& params() const { return params_; }

    Vec3 block(int i) const;  // i-th stored 3-vector

    // Canonical constructions.
    static ParametricPrimitive make_plane(const Vec3& a, const Vec3& b, const Vec3& origin);
    static ParametricPrimitive make_cylinder(const Vec3& axis_point, const Vec3& axis_dir,
                                             double radius);
    /// Cone through the circle of radius `base_radius` centered at `base_center`,
    /// with apex at base_center - axis_dir * base_radius / tan(half_angle).
    static ParametricPrimitive make_cone(const Vec3& base_center, const Vec3& axis_dir,
                                         double base_radius, double half_angle);
    static ParametricPrimitive make_sphere(const Vec3& center, double radius);
    static ParametricPrimitive make_torus(const Vec3& center, const Vec3& axis_dir,
                                          double major_radius, double minor_radius);

    // Derived geometric quantities (valid for the respective kinds only).
    Vec3 plane_normal() const;
    Vec3 cylinder_axis_point() const;
    Vec3 cylinder_axis_dir() const;
    double cylinder_radius() const;
    Vec3 sphere_center() const;
    double sphere_radius() const;
    Vec3 cone_apex() const;
    Vec3 cone_axis_dir() const;  // unit, from apex into the parameterized nappe
    double cone_half_angle() const;
    Vec3 torus_center() const;
    Vec3 torus_axis_dir() const;
    double torus_major_radius() const;
    double torus_minor_radius() const;

private:
    PrimitiveKind kind_;
    std::vector<double> params_;
};

/// Implicit polynomial of a primitive. Coefficient layouts:
///   Plane              [a b c d]       a x + b y + c z + d
///   Cylinder/Cone/
///   Sphere (quadric)   [a b c d e f g h i l]
///       a x^2 + b y^2 + c z^2 + 2(d xy + e xz + f yz) + 2(g x + h y + i z) + l
///   Torus              35 coefficients of the degree-4 monomials x^i y^j z^k,
///       i+j+k <= 4, enumerated in reverse lexicographic order: triples
///       (i,j,k) sorted descending by i, then j, then k. So the first entry
///       multiplies x^4 and the last is the constant term.
/// Coefficient vectors are kept normalized: unit Euclidean norm, first
/// nonzero entry (|.| > 1e-12) positive.
class ImplicitPrimitive {
public:
    ImplicitPrimitive(PrimitiveKind kind, std::vector<double> coeffs);

    PrimitiveKind kind() const { return kind_; }
    const std::vector<double>& coeffs() const { return coeffs_; }

private:
    PrimitiveKind kind_;
    std::vector<double> coeffs_;
};

/// The 35 exponent triples (i,j,k) of the torus monomial ordering.
const std::vector<std::array<int, 3>>& torus_monomial_exponents();

Point3 eval_parametric(const ParametricPrimitive& p, double u, double v);

/// Partial derivatives of the parametric map, used for area weighting.
void eval_parametric_derivatives(const ParametricPrimitive& p, double u, double v,
                                 Vec3& du, Vec3& dv);

/// Outward-pointing analytic surface normal at (u, v), unit length.
Vec3 eval_parametric_normal(const ParametricPrimitive& p, double u, double v);

double eval_implicit(const ImplicitPrimitive& p, const Point3& q);

/// Exact Euclidean distance from q to the untrimmed surface. The cone is
/// restricted to the nappe covered by the parameterization.
double distance_to_surface(const ParametricPrimitive& p, const Point3& q);

/// Exact analytic conversion; degree 1 (plane), 2 (quadrics) or 4 (torus).
ImplicitPrimitive parametric_to_implicit(const ParametricPrimitive& p);

/// Scale to unit Euclidean norm and flip sign so the first entry with
/// magnitude above 1e-12 is positive. Throws on the zero vector.
std::vector<double> normalize_coefficients(std::vector<double> v);

/// Full natural parameter domain of a primitive: angular axes cover one
/// period, linear axes span [-extent, extent] (v of cone: [0, extent]).
TrimRegion full_domain(PrimitiveKind k, double extent = 1.0);

/// n points approximately uniform by area inside the trim rectangle,
/// via area-weighted rejection sampling. Deterministic per seed.
std::vector<Point3> sample_surface(const ParametricPrimitive& p, const TrimRegion& trim,
                                   int n, std::uint64_t seed);

/// Diagonal length of the axis-aligned bounding box.
double bounding_box_diagonal(const std::vector<Point3>& pts);

/// Primitive with its frame mapped through the rigid motion x -> R x + t.
ParametricPrimitive transform_primitive(const ParametricPrimitive& p, const Eigen::Matrix3d& R,
                                        const Vec3& t);

/// Unit normal of the surface at the point closest to q. The sign is that
/// of the outward normal; degenerate locations fall back to an arbitrary
/// valid direction.
Vec3 surface_normal_near(const ParametricPrimitive& p, const Point3& q);

}  // namespace fit4cad
