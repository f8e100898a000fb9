#include "fit4cad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace fit4cad {

namespace {

constexpr double kOrthoTol = 1e-9;
constexpr double kZeroTol = 1e-12;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

bool nearly_equal(double a, double b, double scale) {
    return std::abs(a - b) <= kOrthoTol * std::max(1.0, scale);
}

bool orthogonal(const Vec3& a, const Vec3& b) {
    return std::abs(a.dot(b)) <= kOrthoTol * std::max(1.0, a.norm() * b.norm());
}

// Dense trivariate polynomial keyed by exponent triple, used for the exact
// torus implicitization.
class TriPoly {
public:
    void add(int i, int j, int k, double c) { coeffs_[{i, j, k}] += c; }

    TriPoly operator*(const TriPoly& o) const {
        TriPoly r;
        for (const auto& [ea, ca] : coeffs_)
            for (const auto& [eb, cb] : o.coeffs_)
                r.add(ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ca * cb);
        return r;
    }

    TriPoly& operator+=(const TriPoly& o) {
        for (const auto& [e, c] : o.coeffs_) coeffs_[e] += c;
        return *this;
    }

    TriPoly& scale(double s) {
        for (auto& [e, c] : coeffs_) c *= s;
        return *this;
    }

    double coeff(int i, int j, int k) const {
        auto it = coeffs_.find({i, j, k});
        return it == coeffs_.end() ? 0.0 : it->second;
    }

private:
    std::map<std::array<int, 3>, double> coeffs_;
};

TriPoly shifted_norm_sq(const Vec3& f) {
    // |x - f|^2
    TriPoly p;
    p.add(2, 0, 0, 1.0);
    p.add(0, 2, 0, 1.0);
    p.add(0, 0, 2, 1.0);
    p.add(1, 0, 0, -2.0 * f.x());
    p.add(0, 1, 0, -2.0 * f.y());
    p.add(0, 0, 1, -2.0 * f.z());
    p.add(0, 0, 0, f.squaredNorm());
    return p;
}

TriPoly shifted_dot(const Vec3& f, const Vec3& n) {
    // (x - f) . n
    TriPoly p;
    p.add(1, 0, 0, n.x());
    p.add(0, 1, 0, n.y());
    p.add(0, 0, 1, n.z());
    p.add(0, 0, 0, -f.dot(n));
    return p;
}

// Quadric x^T M x + 2 b^T x + c in the stored layout
// [a b c d e f g h i l].
std::vector<double> quadric_coeffs(const Eigen::Matrix3d& M, const Vec3& b, double c) {
    return {M(0, 0), M(1, 1), M(2, 2), M(0, 1), M(0, 2), M(1, 2), b.x(), b.y(), b.z(), c};
}

double point_to_ray_2d(double rho, double z, double sin_a, double cos_a) {
    // Distance from (rho, z) to the ray {t (sin_a, cos_a) : t >= 0}.
    double t = rho * sin_a + z * cos_a;
    if (t <= 0.0) return std::hypot(rho, z);
    return std::abs(rho * cos_a - z * sin_a);
}

}  // namespace

const char* kind_name(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Plane: return "Plane";
        case PrimitiveKind::Cylinder: return "Cylinder";
        case PrimitiveKind::Cone: return "Cone";
        case PrimitiveKind::Sphere: return "Sphere";
        case PrimitiveKind::Torus: return "Torus";
    }
    throw std::logic_error("bad kind");
}

PrimitiveKind kind_from_name(const std::string& name) {
    if (name == "Plane") return PrimitiveKind::Plane;
    if (name == "Cylinder") return PrimitiveKind::Cylinder;
    if (name == "Cone") return PrimitiveKind::Cone;
    if (name == "Sphere") return PrimitiveKind::Sphere;
    if (name == "Torus") return PrimitiveKind::Torus;
    throw std::invalid_argument("unknown primitive kind: " + name);
}

int parametric_size(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Plane: return 9;
        case PrimitiveKind::Cylinder: return 12;
        case PrimitiveKind::Cone: return 18;
        case PrimitiveKind::Sphere: return 12;
        case PrimitiveKind::Torus: return 18;
    }
    throw std::logic_error("bad kind");
}

int implicit_size(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Plane: return 4;
        case PrimitiveKind::Cylinder:
        case PrimitiveKind::Cone:
        case PrimitiveKind::Sphere: return 10;
        case PrimitiveKind::Torus: return 35;
    }
    throw std::logic_error("bad kind");
}

TrimRegion::TrimRegion(double u0, double u1, double v0, double v1)
    : u_min(u0), u_max(u1), v_min(v0), v_max(v1) {
    require(u_min < u_max && v_min < v_max, "degenerate trim region");
}

ParametricPrimitive::ParametricPrimitive(PrimitiveKind kind, std::vector<double> params)
    : kind_(kind), params_(std::move(params)) {
    require(static_cast<int>(params_.size()) == parametric_size(kind),
            "wrong parameter count for primitive kind");
    for (double p : params_) require(std::isfinite(p), "non-finite primitive parameter");

    const auto blk = [this](int i) { return block(i); };
    switch (kind_) {
        case PrimitiveKind::Plane: {
            require(blk(0).cross(blk(1)).norm() >
                        kOrthoTol * std::max(1.0, blk(0).norm() * blk(1).norm()),
                    "plane directions linearly dependent");
            break;
        }
        case PrimitiveKind::Cylinder: {
            Vec3 a = blk(0), b = blk(1), c = blk(2);
            double r = a.norm();
            require(r > kZeroTol, "cylinder radius is zero");
            require(nearly_equal(b.norm(), r, r), "cylinder frame vectors have unequal norms");
            require(orthogonal(a, b), "cylinder frame vectors not orthogonal");
            require(c.norm() > kZeroTol, "cylinder axis direction is zero");
            require(orthogonal(c, a) && orthogonal(c, b),
                    "cylinder axis not orthogonal to the radius frame");
            break;
        }
        case PrimitiveKind::Sphere: {
            Vec3 a = blk(0), b = blk(1), c = blk(2);
            double r = a.norm();
            require(r > kZeroTol, "sphere radius is zero");
            require(nearly_equal(b.norm(), r, r) && nearly_equal(c.norm(), r, r),
                    "sphere frame vectors have unequal norms");
            require(orthogonal(a, b) && orthogonal(a, c) && orthogonal(b, c),
                    "sphere frame vectors not orthogonal");
            break;
        }
        case PrimitiveKind::Cone: {
            Vec3 a = blk(0), b = blk(1), c = blk(2), d = blk(3), e = blk(4);
            double r = a.norm();
            require(r > kZeroTol, "cone base radius is zero");
            require(nearly_equal(b.norm(), r, r), "cone frame vectors have unequal norms");
            require(orthogonal(a, b), "cone frame vectors not orthogonal");
            // c and d must be the radial frame scaled by one common positive
            // factor, so the ruling shrinks toward a single apex.
            double kappa = c.norm() / r;
            require(kappa > kZeroTol, "cone ruling has no radial component");
            require((c - kappa * a).norm() <= 1e-7 * std::max(1.0, c.norm()) &&
                        (d - kappa * b).norm() <= 1e-7 * std::max(1.0, d.norm()),
                    "cone ruling not aligned with the radial frame");
            require(e.norm() > kZeroTol, "cone axis component is zero");
            require(orthogonal(e, a) && orthogonal(e, b),
                    "cone axis not orthogonal to the radial frame");
            break;
        }
        case PrimitiveKind::Torus: {
            Vec3 a = blk(0), b = blk(1), c = blk(2), d = blk(3), e = blk(4);
            double R = a.norm(), r = c.norm();
            require(R > kZeroTol && r > kZeroTol, "torus radius is zero");
            require(nearly_equal(b.norm(), R, R), "torus major frame has unequal norms");
            require(orthogonal(a, b), "torus major frame not orthogonal");
            require(nearly_equal(d.norm(), r, r) && nearly_equal(e.norm(), r, r),
                    "torus minor frame has unequal norms");
            double kappa = r / R;
            require((c - kappa * a).norm() <= 1e-7 * std::max(1.0, r) &&
                        (d - kappa * b).norm() <= 1e-7 * std::max(1.0, r),
                    "torus minor frame not aligned with the major frame");
            require(orthogonal(e, a) && orthogonal(e, b),
                    "torus axis not orthogonal to the major frame");
            require(R >= r - kOrthoTol, "torus minor radius exceeds major radius");
            break;
        }
    }
}

Vec3 ParametricPrimitive::block(int i) const {
    return Vec3(params_[3 * i], params_[3 * i + 1], params_[3 * i + 2]);
}

namespace {
std::vector<double> pack(std::initializer_list<Vec3> vs) {
    std::vector<double> out;
    out.reserve(vs.size() * 3);
    for (const Vec3& v : vs) {
        out.push_back(v.x());
        out.push_back(v.y());
        out.push_back(v.z());
    }
    return out;
}

// Any unit vector orthogonal to w.
Vec3 any_orthogonal(const Vec3& w) {
    Vec3 t = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return w.cross(t).normalized();
}
}  // namespace

ParametricPrimitive ParametricPrimitive::make_plane(const Vec3& a, const Vec3& b,
                                                    const Vec3& origin) {
    return ParametricPrimitive(PrimitiveKind::Plane, pack({a, b, origin}));
}

ParametricPrimitive ParametricPrimitive::make_cylinder(const Vec3& axis_point,
                                                       const Vec3& axis_dir, double radius) {
    require(radius > 0, "cylinder radius must be positive");
    Vec3 w = axis_dir.normalized();
    Vec3 u = any_orthogonal(w), v = w.cross(u);
    return ParametricPrimitive(PrimitiveKind::Cylinder,
                               pack({radius * u, radius * v, w, axis_point}));
}

ParametricPrimitive ParametricPrimitive::make_cone(const Vec3& base_center, const Vec3& axis_dir,
                                                   double base_radius, double half_angle) {
    require(half_angle > 0 && half_angle < M_PI / 2, "cone half-angle out of range");
    require(base_radius > 0, "cone base radius must be positive");
    Vec3 w = axis_dir.normalized();
    Vec3 u = any_orthogonal(w), v = w.cross(u);
    double s = std::sin(half_angle), c = std::cos(half_angle);
    return ParametricPrimitive(
        PrimitiveKind::Cone,
        pack({base_radius * u, base_radius * v, s * u, s * v, c * w, base_center}));
}

ParametricPrimitive ParametricPrimitive::make_sphere(const Vec3& center, double radius) {
    require(radius > 0, "sphere radius must be positive");
    return ParametricPrimitive(
        PrimitiveKind::Sphere,
        pack({radius * Vec3::UnitX(), radius * Vec3::UnitY(), radius * Vec3::UnitZ(), center}));
}

ParametricPrimitive ParametricPrimitive::make_torus(const Vec3& center, const Vec3& axis_dir,
                                                    double major_radius, double minor_radius) {
    require(minor_radius > 0 && major_radius >= minor_radius,
            "torus radii must satisfy major >= minor > 0");
    Vec3 w = axis_dir.normalized();
    Vec3 u = any_orthogonal(w), v = w.cross(u);
    return ParametricPrimitive(PrimitiveKind::Torus,
                               pack({major_radius * u, major_radius * v, minor_radius * u,
                                     minor_radius * v, minor_radius * w, center}));
}

Vec3 ParametricPrimitive::plane_normal() const {
    return block(0).cross(block(1)).normalized();
}
Vec3 ParametricPrimitive::cylinder_axis_point() const { return block(3); }
Vec3 ParametricPrimitive::cylinder_axis_dir() const { return block(2).normalized(); }
double ParametricPrimitive::cylinder_radius() const { return block(0).norm(); }
Vec3 ParametricPrimitive::sphere_center() const { return block(3); }
double ParametricPrimitive::sphere_radius() const { return block(0).norm(); }

Vec3 ParametricPrimitive::cone_apex() const {
    // r(v) = |a| + |c| v vanishes at v = -|a|/|c|; the axis point there.
    double v_apex = -block(0).norm() / block(2).norm();
    return block(5) + v_apex * block(4);
}
Vec3 ParametricPrimitive::cone_axis_dir() const { return block(4).normalized(); }
double ParametricPrimitive::cone_half_angle() const {
    return std::atan2(block(2).norm(), block(4).norm());
}

Vec3 ParametricPrimitive::torus_center() const { return block(5); }
Vec3 ParametricPrimitive::torus_axis_dir() const { return block(4).normalized(); }
double ParametricPrimitive::torus_major_radius() const { return block(0).norm(); }
double ParametricPrimitive::torus_minor_radius() const { return block(2).norm(); }

ImplicitPrimitive::ImplicitPrimitive(PrimitiveKind kind, std::vector<double> coeffs)
    : kind_(kind), coeffs_(normalize_coefficients(std::move(coeffs))) {
    require(static_cast<int>(coeffs_.size()) == implicit_size(kind),
            "wrong coefficient count for primitive kind");
}

const std::vector<std::array<int, 3>>& torus_monomial_exponents() {
    static const std::vector<std::array<int, 3>> exps = [] {
        std::vector<std::array<int, 3>> v;
        for (int i = 4; i >= 0; --i)
            for (int j = 4 - i; j >= 0; --j)
                for (int k = 4 - i - j; k >= 0; --k) v.push_back({i, j, k});
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return b < a; });
        return v;
    }();
    return exps;
}

Point3 eval_parametric(const ParametricPrimitive& p, double u, double v) {
    const auto b = [&p](int i) { return p.block(i); };
    switch (p.kind()) {
        case PrimitiveKind::Plane:
            return b(0) * u + b(1) * v + b(2);
        case PrimitiveKind::Cylinder:
            return b(0) * std::cos(u) + b(1) * std::sin(u) + b(2) * v + b(3);
        case PrimitiveKind::Cone:
            return b(0) * std::cos(u) + b(1) * std::sin(u) +
                   v * (b(2) * std::cos(u) + b(3) * std::sin(u) + b(4)) + b(5);
        case PrimitiveKind::Sphere:
            return (b(0) * std::cos(u) + b(1) * std::sin(u)) * std::cos(v) +
                   b(2) * std::sin(v) + b(3);
        case PrimitiveKind::Torus:
            return b(0) * std::cos(u) + b(1) * std::sin(u) +
                   (b(2) * std::cos(u) + b(3) * std::sin(u)) * std::cos(v) +
                   b(4) * std::sin(v) + b(5);
    }
    throw std::logic_error("bad kind");
}

void eval_parametric_derivatives(const ParametricPrimitive& p, double u, double v, Vec3& du,
                                 Vec3& dv) {
    const auto b = [&p](int i) { return p.block(i); };
    double cu = std::cos(u), su = std::sin(u);
    switch (p.kind()) {
        case PrimitiveKind::Plane:
            du = b(0);
            dv = b(1);
            return;
        case PrimitiveKind::Cylinder:
            du = -b(0) * su + b(1) * cu;
            dv = b(2);
            return;
        case PrimitiveKind::Cone:
            du = -b(0) * su + b(1) * cu + v * (-b(2) * su + b(3) * cu);
            dv = b(2) * cu + b(3) * su + b(4);
            return;
        case PrimitiveKind::Sphere: {
            double cv = std::cos(v), sv = std::sin(v);
            du = (-b(0) * su + b(1) * cu) * cv;
            dv = -(b(0) * cu + b(1) * su) * sv + b(2) * cv;
            return;
        }
        case PrimitiveKind::Torus: {
            double cv = std::cos(v), sv = std::sin(v);
            du = -b(0) * su + b(1) * cu + (-b(2) * su + b(3) * cu) * cv;
            dv = -(b(2) * cu + b(3) * su) * sv + b(4) * cv;
            return;
        }
    }
    throw std::logic_error("bad kind");
}

Vec3 eval_parametric_normal(const ParametricPrimitive& p, double u, double v) {
    const auto b = [&p](int i) { return p.block(i); };
    switch (p.kind()) {
        case PrimitiveKind::Plane:
            return p.plane_normal();
        case PrimitiveKind::Cylinder:
            return (b(0) * std::cos(u) + b(1) * std::sin(u)).normalized();
        case PrimitiveKind::Cone: {
            double alpha = p.cone_half_angle();
            Vec3 radial = (b(0) * std::cos(u) + b(1) * std::sin(u)).normalized();
            return std::cos(alpha) * radial - std::sin(alpha) * p.cone_axis_dir();
        }
        case PrimitiveKind::Sphere:
            return (eval_parametric(p, u, v) - p.sphere_center()).normalized();
        case PrimitiveKind::Torus: {
            Vec3 radial = (b(0) * std::cos(u) + b(1) * std::sin(u)).normalized();
            return std::cos(v) * radial + std::sin(v) * p.torus_axis_dir();
        }
    }
    throw std::logic_error("bad kind");
}

double eval_implicit(const ImplicitPrimitive& p, const Point3& q) {
    const auto& c = p.coeffs();
    double x = q.x(), y = q.y(), z = q.z();
    switch (p.kind()) {
        case PrimitiveKind::Plane:
            return c[0] * x + c[1] * y + c[2] * z + c[3];
        case PrimitiveKind::Cylinder:
        case PrimitiveKind::Cone:
        case PrimitiveKind::Sphere:
            return c[0] * x * x + c[1] * y * y + c[2] * z * z +
                   2.0 * (c[3] * x * y + c[4] * x * z + c[5] * y * z) +
                   2.0 * (c[6] * x + c[7] * y + c[8] * z) + c[9];
        case PrimitiveKind::Torus: {
            const auto& exps = torus_monomial_exponents();
            double xs[5] = {1, x, x * x, x * x * x, x * x * x * x};
            double ys[5] = {1, y, y * y, y * y * y, y * y * y * y};
            double zs[5] = {1, z, z * z, z * z * z, z * z * z * z};
            double acc = 0.0;
            for (std::size_t m = 0; m < exps.size(); ++m)
                acc += c[m] * xs[exps[m][0]] * ys[exps[m][1]] * zs[exps[m][2]];
            return acc;
        }
    }
    throw std::logic_error("bad kind");
}

double distance_to_surface(const ParametricPrimitive& p, const Point3& q) {
    switch (p.kind()) {
        case PrimitiveKind::Plane:
            return std::abs(p.plane_normal().dot(q - p.block(2)));
        case PrimitiveKind::Sphere:
            return std::abs((q - p.sphere_center()).norm() - p.sphere_radius());
        case PrimitiveKind::Cylinder: {
            Vec3 d = q - p.cylinder_axis_point();
            Vec3 w = p.cylinder_axis_dir();
            double rho = (d - d.dot(w) * w).norm();
            return std::abs(rho - p.cylinder_radius());
        }
        case PrimitiveKind::Cone: {
            Vec3 d = q - p.cone_apex();
            Vec3 w = p.cone_axis_dir();
            double z = d.dot(w);
            double rho = (d - z * w).norm();
            double alpha = p.cone_half_angle();
            return point_to_ray_2d(rho, z, std::sin(alpha), std::cos(alpha));
        }
        case PrimitiveKind::Torus: {
            Vec3 d = q - p.torus_center();
            Vec3 w = p.torus_axis_dir();
            double z = d.dot(w);
            double rho = (d - z * w).norm();
            double to_spine = std::hypot(rho - p.torus_major_radius(), z);
            return std::abs(to_spine - p.torus_minor_radius());
        }
    }
    throw std::logic_error("bad kind");
}

ImplicitPrimitive parametric_to_implicit(const ParametricPrimitive& p) {
    switch (p.kind()) {
        case PrimitiveKind::Plane: {
            Vec3 n = p.plane_normal();
            return ImplicitPrimitive(PrimitiveKind::Plane,
                                     {n.x(), n.y(), n.z(), -n.dot(p.block(2))});
        }
        case PrimitiveKind::Sphere: {
            Vec3 c = p.sphere_center();
            double r = p.sphere_radius();
            Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
            return ImplicitPrimitive(PrimitiveKind::Sphere,
                                     quadric_coeffs(M, -c, c.squaredNorm() - r * r));
        }
        case PrimitiveKind::Cylinder: {
            // |x-p0|^2 - ((x-p0).w)^2 = r^2
            Vec3 p0 = p.cylinder_axis_point();
            Vec3 w = p.cylinder_axis_dir();
            double r = p.cylinder_radius();
            Eigen::Matrix3d M = Eigen::Matrix3d::Identity() - w * w.transpose();
            Vec3 b = -M * p0;
            double c = p0.dot(M * p0) - r * r;
            return ImplicitPrimitive(PrimitiveKind::Cylinder, quadric_coeffs(M, b, c));
        }
        case PrimitiveKind::Cone: {
            // ((x-A).w)^2 = cos^2(alpha) |x-A|^2
            Vec3 A = p.cone_apex();
            Vec3 w = p.cone_axis_dir();
            double ca = std::cos(p.cone_half_angle());
            Eigen::Matrix3d M = w * w.transpose() - ca * ca * Eigen::Matrix3d::Identity();
            Vec3 b = -M * A;
            double c = A.dot(M * A);
            return ImplicitPrimitive(PrimitiveKind::Cone, quadric_coeffs(M, b, c));
        }
        case PrimitiveKind::Torus: {
            // (|x-f|^2 + R^2 - r^2)^2 = 4 R^2 (|x-f|^2 - ((x-f).w)^2)
            Vec3 f = p.torus_center();
            Vec3 w = p.torus_axis_dir();
            double R = p.torus_major_radius(), r = p.torus_minor_radius();
            TriPoly lhs = shifted_norm_sq(f);
            lhs.add(0, 0, 0, R * R - r * r);
            TriPoly poly = lhs * lhs;
            TriPoly axial = shifted_dot(f, w);
            TriPoly rhs = shifted_norm_sq(f);
            TriPoly axial_sq = axial * axial;
            axial_sq.scale(-1.0);
            rhs += axial_sq;
            rhs.scale(-4.0 * R * R);
            poly += rhs;
            const auto& exps = torus_monomial_exponents();
            std::vector<double> coeffs(exps.size());
            for (std::size_t m = 0; m < exps.size(); ++m)
                coeffs[m] = poly.coeff(exps[m][0], exps[m][1], exps[m][2]);
            return ImplicitPrimitive(PrimitiveKind::Torus, std::move(coeffs));
        }
    }
    throw std::logic_error("bad kind");
}

std::vector<double> normalize_coefficients(std::vector<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    require(norm > 0.0, "cannot normalize the zero coefficient vector");
    for (double& x : v) x /= norm;
    for (double x : v) {
        if (std::abs(x) > kZeroTol) {
            if (x < 0)
                for (double& y : v) y = -y;
            break;
        }
    }
    return v;
}

TrimRegion full_domain(PrimitiveKind k, double extent) {
    switch (k) {
        case PrimitiveKind::Plane: return {-extent, extent, -extent, extent};
        case PrimitiveKind::Cylinder: return {0.0, 2 * M_PI, -extent, extent};
        case PrimitiveKind::Cone: return {0.0, 2 * M_PI, 0.0, extent};
        case PrimitiveKind::Sphere: return {0.0, 2 * M_PI, -M_PI / 2, M_PI / 2};
        case PrimitiveKind::Torus: return {0.0, 2 * M_PI, 0.0, 2 * M_PI};
    }
    throw std::logic_error("bad kind");
}

std::vector<Point3> sample_surface(const ParametricPrimitive& p, const TrimRegion& trim, int n,
                                   std::uint64_t seed) {
    require(n >= 1, "sample count must be positive");
    require(trim.u_min < trim.u_max && trim.v_min < trim.v_max, "degenerate trim region");

    const auto weight = [&](double u, double v) {
        Vec3 du, dv;
        eval_parametric_derivatives(p, u, v, du, dv);
        return du.cross(dv).norm();
    };

    // Upper bound of the area element over the rectangle.
    double wmax = 0.0;
    constexpr int kGrid = 32;
    for (int i = 0; i <= kGrid; ++i)
        for (int j = 0; j <= kGrid; ++j) {
            double u = trim.u_min + (trim.u_max - trim.u_min) * i / kGrid;
            double v = trim.v_min + (trim.v_max - trim.v_min) * j / kGrid;
            wmax = std::max(wmax, weight(u, v));
        }
    require(wmax > 0.0, "surface patch has zero area");
    wmax *= 1.05;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uu(trim.u_min, trim.u_max);
    std::uniform_real_distribution<double> vv(trim.v_min, trim.v_max);
    std::uniform_real_distribution<double> ww(0.0, wmax);

    std::vector<Point3> out;
    out.reserve(n);
    while (static_cast<int>(out.size()) < n) {
        double u = uu(rng), v = vv(rng);
        if (ww(rng) <= weight(u, v)) out.push_back(eval_parametric(p, u, v));
    }
    return out;
}

ParametricPrimitive transform_primitive(const ParametricPrimitive& p, const Eigen::Matrix3d& R,
                                        const Vec3& t) {
    int position_block;
    switch (p.kind()) {
        case PrimitiveKind::Plane: position_block = 2; break;
        case PrimitiveKind::Cylinder:
        case PrimitiveKind::Sphere: position_block = 3; break;
        case PrimitiveKind::Cone:
        case PrimitiveKind::Torus: position_block = 5; break;
        default: throw std::logic_error("bad kind");
    }
    std::vector<double> out;
    int blocks = parametric_size(p.kind()) / 3;
    out.reserve(blocks * 3);
    for (int i = 0; i < blocks; ++i) {
        Vec3 v = R * p.block(i);
        if (i == position_block) v += t;
        out.push_back(v.x());
        out.push_back(v.y());
        out.push_back(v.z());
    }
    return ParametricPrimitive(p.kind(), std::move(out));
}

Vec3 surface_normal_near(const ParametricPrimitive& p, const Point3& q) {
    switch (p.kind()) {
        case PrimitiveKind::Plane: {
            Vec3 n = p.plane_normal();
            return n.dot(q - p.block(2)) < 0 ? Vec3(-n) : n;
        }
        case PrimitiveKind::Sphere: {
            Vec3 d = q - p.sphere_center();
            double len = d.norm();
            return len > kZeroTol ? Vec3(d / len) : Vec3::UnitX();
        }
        case PrimitiveKind::Cylinder: {
            Vec3 w = p.cylinder_axis_dir();
            Vec3 d = q - p.cylinder_axis_point();
            Vec3 radial = d - d.dot(w) * w;
            double len = radial.norm();
            return len > kZeroTol ? Vec3(radial / len) : any_orthogonal(w);
        }
        case PrimitiveKind::Cone: {
            Vec3 w = p.cone_axis_dir();
            Vec3 d = q - p.cone_apex();
            double z = d.dot(w);
            Vec3 radial = d - z * w;
            double rho = radial.norm();
            if (rho <= kZeroTol) radial = any_orthogonal(w);
            else radial /= rho;
            double alpha = p.cone_half_angle();
            return std::cos(alpha) * radial - std::sin(alpha) * w;
        }
        case PrimitiveKind::Torus: {
            Vec3 w = p.torus_axis_dir();
            Vec3 d = q - p.torus_center();
            double z = d.dot(w);
            Vec3 radial = d - z * w;
            double rho = radial.norm();
            Vec3 rhat = rho > kZeroTol ? Vec3(radial / rho) : any_orthogonal(w);
            double dr = rho - p.torus_major_radius();
            double len = std::hypot(dr, z);
            if (len <= kZeroTol) return w;
            return (dr / len) * rhat + (z / len) * w;
        }
    }
    throw std::logic_error("bad kind");
}

double bounding_box_diagonal(const std::vector<Point3>& pts) {
    require(!pts.empty(), "bounding box of an empty point set");
    Vec3 lo = pts.front(), hi = pts.front();
    for (const Point3& q : pts) {
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    return (hi - lo).norm();
}

}  // namespace fit4cad
