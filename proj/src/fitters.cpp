#include "fit4cad/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fit4cad {

namespace {

Vec3 centroid(const std::vector<Point3>& cloud, const std::vector<int>& idx) {
    Vec3 c = Vec3::Zero();
    for (int i : idx) c += cloud[i];
    return c / static_cast<double>(idx.size());
}

Eigen::Matrix3d covariance(const std::vector<Point3>& cloud, const std::vector<int>& idx,
                           const Vec3& center) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int i : idx) {
        Vec3 d = cloud[i] - center;
        m += d * d.transpose();
    }
    return m;
}

Vec3 any_orthogonal(const Vec3& w) {
    Vec3 t = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return w.cross(t).normalized();
}

// Algebraic circle fit in 2D; returns (cx, cy, r).
std::optional<std::array<double, 3>> circle_fit_2d(const std::vector<Eigen::Vector2d>& pts) {
    if (pts.size() < 3) return std::nullopt;
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const auto& p : pts) {
        Eigen::Vector3d row(2 * p.x(), 2 * p.y(), 1.0);
        double rhs = p.squaredNorm();
        A += row * row.transpose();
        b += row * rhs;
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (!lu.isInvertible()) return std::nullopt;
    Eigen::Vector3d sol = lu.solve(b);
    double r2 = sol[2] + sol[0] * sol[0] + sol[1] * sol[1];
    if (!(r2 > 1e-16)) return std::nullopt;
    return std::array<double, 3>{sol[0], sol[1], std::sqrt(r2)};
}

// Common point of a bundle of 2D lines (point, direction), least squares.
std::optional<Eigen::Vector2d> lines_intersection_2d(const std::vector<Eigen::Vector2d>& pts,
                                                     const std::vector<Eigen::Vector2d>& dirs) {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::Vector2d n(-dirs[i].y(), dirs[i].x());  // line normal
        double nn = n.norm();
        if (nn < 1e-12) continue;
        n /= nn;
        A += n * n.transpose();
        b += n * n.dot(pts[i]);
    }
    Eigen::FullPivLU<Eigen::Matrix2d> lu(A);
    if (!lu.isInvertible()) return std::nullopt;
    return lu.solve(b);
}

std::optional<Vec3> tangent_plane_apex(const std::vector<Point3>& cloud,
                                       const std::vector<int>& idx,
                                       const std::vector<Vec3>& normals) {
    // Apex of a cone lies in every tangent plane: n_i . (A - p_i) = 0.
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Vec3 b = Vec3::Zero();
    for (int i : idx) {
        A += normals[i] * normals[i].transpose();
        b += normals[i] * normals[i].dot(cloud[i]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
    if (es.eigenvalues()[0] < 1e-6 * es.eigenvalues()[2]) return std::nullopt;
    return A.ldlt().solve(b);
}

std::optional<ParametricPrimitive> cylinder_about_axis(const std::vector<Point3>& cloud,
                                                       const std::vector<int>& idx,
                                                       const Vec3& w) {
    Vec3 u = any_orthogonal(w), v = w.cross(u);
    std::vector<Eigen::Vector2d> proj;
    proj.reserve(idx.size());
    for (int i : idx) proj.emplace_back(u.dot(cloud[i]), v.dot(cloud[i]));
    auto circle = circle_fit_2d(proj);
    if (!circle) return std::nullopt;
    Vec3 axis_point = (*circle)[0] * u + (*circle)[1] * v;
    try {
        return ParametricPrimitive::make_cylinder(axis_point, w, (*circle)[2]);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<ParametricPrimitive> torus_about_axis(const std::vector<Point3>& cloud,
                                                    const std::vector<int>& idx,
                                                    const std::vector<Vec3>& normals,
                                                    const Vec3& w) {
    // Projected normal lines of a torus all pass through the axis.
    Vec3 u = any_orthogonal(w), v = w.cross(u);
    std::vector<Eigen::Vector2d> pts2d, dirs2d;
    for (int i : idx) {
        Eigen::Vector2d d(u.dot(normals[i]), v.dot(normals[i]));
        if (d.norm() < 1e-6) continue;
        pts2d.emplace_back(u.dot(cloud[i]), v.dot(cloud[i]));
        dirs2d.push_back(d);
    }
    if (pts2d.size() < 4) return std::nullopt;
    auto axis2d = lines_intersection_2d(pts2d, dirs2d);
    if (!axis2d) return std::nullopt;
    Vec3 axis_point = (*axis2d)[0] * u + (*axis2d)[1] * v;

    // Circle fit in the (radial distance, axial offset) half-plane.
    std::vector<Eigen::Vector2d> meridian;
    meridian.reserve(idx.size());
    for (int i : idx) {
        Vec3 d = cloud[i] - axis_point;
        double z = d.dot(w);
        meridian.emplace_back((d - z * w).norm(), z);
    }
    auto circle = circle_fit_2d(meridian);
    if (!circle) return std::nullopt;
    double R = (*circle)[0], z0 = (*circle)[1], r = (*circle)[2];
    if (!(R > 0.0 && r > 0.0 && R >= r)) return std::nullopt;
    try {
        return ParametricPrimitive::make_torus(axis_point + z0 * w, w, R, r);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

/// Geometric refinement of a torus estimate by damped Gauss-Newton over
/// (center, axis, major radius, minor radius) with a numeric Jacobian. The
/// eigenvector-based initial axis is only as accurate as the normal scatter,
/// so a few descent steps are needed to reach the least-squares optimum.
std::optional<ParametricPrimitive> refine_torus(const std::vector<Point3>& cloud,
                                                const std::vector<int>& idx,
                                                const ParametricPrimitive& init) {
    Eigen::Matrix<double, 8, 1> x;
    x.segment<3>(0) = init.torus_center();
    x.segment<3>(3) = init.torus_axis_dir();
    x[6] = init.torus_major_radius();
    x[7] = init.torus_minor_radius();

    auto residuals = [&](const Eigen::Matrix<double, 8, 1>& p, Eigen::VectorXd& f) {
        Vec3 c = p.segment<3>(0);
        Vec3 w = p.segment<3>(3);
        double wn = w.norm();
        if (wn < 1e-9 || !(p[6] > 0.0) || !(p[7] > 0.0)) return false;
        w /= wn;
        f.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            Vec3 d = cloud[idx[k]] - c;
            double z = d.dot(w);
            double rho = (d - z * w).norm();
            f[static_cast<Eigen::Index>(k)] = std::hypot(rho - p[6], z) - p[7];
        }
        return true;
    };

    Eigen::VectorXd f;
    if (!residuals(x, f)) return std::nullopt;
    double cost = f.squaredNorm();
    double lambda = 1e-4;
    for (int iter = 0; iter < 40; ++iter) {
        Eigen::MatrixXd J(f.size(), 8);
        for (int j = 0; j < 8; ++j) {
            double h = 1e-7 * std::max(1.0, std::abs(x[j]));
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            Eigen::VectorXd fp, fm;
            if (!residuals(xp, fp) || !residuals(xm, fm)) return std::nullopt;
            J.col(j) = (fp - fm) / (2 * h);
        }
        Eigen::Matrix<double, 8, 8> H = J.transpose() * J;
        Eigen::Matrix<double, 8, 1> g = J.transpose() * f;
        bool improved = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::Matrix<double, 8, 8> damped = H;
            damped.diagonal().array() += lambda;
            Eigen::Matrix<double, 8, 1> step = damped.ldlt().solve(g);
            auto trial = x;
            trial -= step;
            Eigen::VectorXd ft;
            if (residuals(trial, ft) && ft.squaredNorm() < cost) {
                x = trial;
                x.segment<3>(3).normalize();
                cost = ft.squaredNorm();
                f = std::move(ft);
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved || cost <= 1e-24 * idx.size()) break;
    }
    if (!(x[6] >= x[7] && x[7] > 0.0)) return std::nullopt;
    try {
        return ParametricPrimitive::make_torus(x.segment<3>(0), x.segment<3>(3), x[6], x[7]);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

double rms_distance(const std::vector<Point3>& cloud, const std::vector<int>& idx,
                    const ParametricPrimitive& p) {
    double s = 0.0;
    for (int i : idx) {
        double d = distance_to_surface(p, cloud[i]);
        s += d * d;
    }
    return std::sqrt(s / idx.size());
}

}  // namespace

std::optional<ParametricPrimitive> fit_plane_lsq(const std::vector<Point3>& cloud,
                                                 const std::vector<int>& idx) {
    if (idx.size() < 3) return std::nullopt;
    Vec3 c = centroid(cloud, idx);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(covariance(cloud, idx, c));
    if (es.eigenvalues()[2] <= 0.0 || es.eigenvalues()[1] <= 1e-12 * es.eigenvalues()[2])
        return std::nullopt;  // collinear
    Vec3 a = es.eigenvectors().col(2), b = es.eigenvectors().col(1);
    return ParametricPrimitive::make_plane(a, b, c);
}

std::optional<ParametricPrimitive> fit_sphere_lsq(const std::vector<Point3>& cloud,
                                                  const std::vector<int>& idx) {
    if (idx.size() < 4) return std::nullopt;
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    Eigen::Vector4d b = Eigen::Vector4d::Zero();
    for (int i : idx) {
        const Point3& p = cloud[i];
        Eigen::Vector4d row(2 * p.x(), 2 * p.y(), 2 * p.z(), 1.0);
        A += row * row.transpose();
        b += row * p.squaredNorm();
    }
    Eigen::FullPivLU<Eigen::Matrix4d> lu(A);
    if (!lu.isInvertible()) return std::nullopt;
    Eigen::Vector4d sol = lu.solve(b);
    Vec3 center = sol.head<3>();
    double r2 = sol[3] + center.squaredNorm();
    if (!(r2 > 1e-16)) return std::nullopt;
    return ParametricPrimitive::make_sphere(center, std::sqrt(r2));
}

std::optional<ParametricPrimitive> fit_cylinder_lsq(const std::vector<Point3>& cloud,
                                                    const std::vector<int>& idx,
                                                    const std::vector<Vec3>& normals) {
    if (idx.size() < 6) return std::nullopt;
    // Cylinder normals span the plane orthogonal to the axis.
    Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
    for (int i : idx) N += normals[i] * normals[i].transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(N);
    return cylinder_about_axis(cloud, idx, es.eigenvectors().col(0));
}

std::optional<ParametricPrimitive> fit_cone_lsq(const std::vector<Point3>& cloud,
                                                const std::vector<int>& idx,
                                                const std::vector<Vec3>& normals) {
    if (idx.size() < 6) return std::nullopt;
    auto apex = tangent_plane_apex(cloud, idx, normals);
    if (!apex) return std::nullopt;

    // Unit directions from the apex lie on a circle of the Gauss sphere;
    // its axis has the least directional variance.
    Vec3 mean = Vec3::Zero();
    std::vector<Vec3> dirs;
    dirs.reserve(idx.size());
    for (int i : idx) {
        Vec3 d = cloud[i] - *apex;
        double len = d.norm();
        if (len < 1e-9) return std::nullopt;
        dirs.push_back(d / len);
        mean += dirs.back();
    }
    mean /= static_cast<double>(dirs.size());
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    for (const Vec3& d : dirs) {
        Vec3 e = d - mean;
        C += e * e.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(C);
    Vec3 w = es.eigenvectors().col(0);
    double ca = 0.0;
    for (const Vec3& d : dirs) ca += d.dot(w);
    ca /= static_cast<double>(dirs.size());
    if (ca < 0) {
        w = -w;
        ca = -ca;
    }
    if (ca < 0.02 || ca > 0.99995) return std::nullopt;
    double alpha = std::acos(std::clamp(ca, -1.0, 1.0));

    double mean_height = 0.0;
    for (int i : idx) mean_height += (cloud[i] - *apex).dot(w);
    mean_height /= static_cast<double>(idx.size());
    if (mean_height <= 1e-9) return std::nullopt;
    try {
        return ParametricPrimitive::make_cone(*apex + mean_height * w, w,
                                              mean_height * std::tan(alpha), alpha);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<ParametricPrimitive> fit_torus_lsq(const std::vector<Point3>& cloud,
                                                 const std::vector<int>& idx,
                                                 const std::vector<Vec3>& normals) {
    if (idx.size() < 8) return std::nullopt;
    // The axis is an eigenvector of the normal scatter; try all three and
    // keep the best-fitting torus.
    Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
    for (int i : idx) N += normals[i] * normals[i].transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(N);

    std::optional<ParametricPrimitive> best;
    double best_rms = 0.0;
    for (int c = 0; c < 3; ++c) {
        auto t = torus_about_axis(cloud, idx, normals, es.eigenvectors().col(c));
        if (!t) continue;
        double rms = rms_distance(cloud, idx, *t);
        if (!best || rms < best_rms) {
            best = t;
            best_rms = rms;
        }
    }
    if (best) {
        if (auto refined = refine_torus(cloud, idx, *best);
            refined && rms_distance(cloud, idx, *refined) < best_rms)
            best = refined;
    }
    return best;
}

std::optional<ParametricPrimitive> fit_primitive_lsq(PrimitiveKind kind,
                                                     const std::vector<Point3>& cloud,
                                                     const std::vector<int>& idx,
                                                     const std::vector<Vec3>& normals) {
    switch (kind) {
        case PrimitiveKind::Plane: return fit_plane_lsq(cloud, idx);
        case PrimitiveKind::Sphere: return fit_sphere_lsq(cloud, idx);
        case PrimitiveKind::Cylinder: return fit_cylinder_lsq(cloud, idx, normals);
        case PrimitiveKind::Cone: return fit_cone_lsq(cloud, idx, normals);
        case PrimitiveKind::Torus: return fit_torus_lsq(cloud, idx, normals);
    }
    return std::nullopt;
}

namespace {

// Minimal-sample candidate generators; `sample` holds cloud indices.
std::optional<ParametricPrimitive> minimal_candidate(PrimitiveKind kind,
                                                     const std::vector<Point3>& cloud,
                                                     const std::vector<Vec3>& normals,
                                                     const std::vector<int>& sample) {
    try {
        switch (kind) {
            case PrimitiveKind::Plane: {
                int i = sample[0];
                Vec3 n = normals[i];
                Vec3 a = any_orthogonal(n);
                return ParametricPrimitive::make_plane(a, n.cross(a), cloud[i]);
            }
            case PrimitiveKind::Sphere: {
                int i = sample[0], j = sample[1];
                // Closest approach of the two normal lines.
                Vec3 d = cloud[j] - cloud[i];
                Vec3 n1 = normals[i], n2 = normals[j];
                double a = n1.dot(n2);
                double denom = 1.0 - a * a;
                if (denom < 1e-9) return std::nullopt;
                double t1 = (n1.dot(d) - a * n2.dot(d)) / denom;
                double t2 = (a * n1.dot(d) - n2.dot(d)) / denom;
                Vec3 c = 0.5 * (cloud[i] + t1 * n1 + cloud[j] + t2 * n2);
                double r = 0.5 * ((cloud[i] - c).norm() + (cloud[j] - c).norm());
                if (r < 1e-9) return std::nullopt;
                return ParametricPrimitive::make_sphere(c, r);
            }
            case PrimitiveKind::Cylinder: {
                int i = sample[0], j = sample[1];
                Vec3 w = normals[i].cross(normals[j]);
                if (w.norm() < 1e-6) return std::nullopt;
                w.normalize();
                Vec3 u = any_orthogonal(w), v = w.cross(u);
                std::vector<Eigen::Vector2d> pts2d = {{u.dot(cloud[i]), v.dot(cloud[i])},
                                                      {u.dot(cloud[j]), v.dot(cloud[j])}};
                std::vector<Eigen::Vector2d> dirs2d = {
                    {u.dot(normals[i]), v.dot(normals[i])},
                    {u.dot(normals[j]), v.dot(normals[j])}};
                auto c2d = lines_intersection_2d(pts2d, dirs2d);
                if (!c2d) return std::nullopt;
                double r = 0.5 * ((pts2d[0] - *c2d).norm() + (pts2d[1] - *c2d).norm());
                if (r < 1e-9) return std::nullopt;
                return ParametricPrimitive::make_cylinder((*c2d)[0] * u + (*c2d)[1] * v, w, r);
            }
            case PrimitiveKind::Cone: {
                std::vector<Point3> p;
                std::vector<Vec3> n;
                Eigen::Matrix3d A;
                Vec3 b;
                for (int k = 0; k < 3; ++k) {
                    A.row(k) = normals[sample[k]].transpose();
                    b[k] = normals[sample[k]].dot(cloud[sample[k]]);
                }
                Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
                if (!lu.isInvertible()) return std::nullopt;
                Vec3 apex = lu.solve(b);
                Vec3 w = Vec3::Zero();
                for (int k = 0; k < 3; ++k) {
                    Vec3 d = cloud[sample[k]] - apex;
                    double len = d.norm();
                    if (len < 1e-9) return std::nullopt;
                    w += d / len;
                }
                if (w.norm() < 1e-6) return std::nullopt;
                w.normalize();
                double ca = 0.0, h = 0.0;
                for (int k = 0; k < 3; ++k) {
                    Vec3 d = cloud[sample[k]] - apex;
                    ca += d.normalized().dot(w);
                    h += d.dot(w);
                }
                ca /= 3.0;
                h /= 3.0;
                if (ca < 0.02 || ca > 0.99995 || h <= 1e-9) return std::nullopt;
                double alpha = std::acos(std::clamp(ca, -1.0, 1.0));
                return ParametricPrimitive::make_cone(apex + h * w, w, h * std::tan(alpha), alpha);
            }
            case PrimitiveKind::Torus:
                // No cheap closed-form minimal sample; handled by the caller
                // with a small-subset least-squares fit.
                return std::nullopt;
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return std::nullopt;
}

int minimal_sample_size(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Plane: return 1;
        case PrimitiveKind::Sphere: return 2;
        case PrimitiveKind::Cylinder: return 2;
        case PrimitiveKind::Cone: return 3;
        case PrimitiveKind::Torus: return 24;
    }
    return 3;
}

}  // namespace

std::vector<RansacPart> ransac_decompose(const std::vector<Point3>& cloud,
                                         const std::vector<int>& idx,
                                         const std::vector<Vec3>& normals,
                                         const RansacConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::vector<int> remaining = idx;
    std::vector<RansacPart> parts;

    while (static_cast<int>(remaining.size()) >= config.min_support) {
        std::optional<ParametricPrimitive> best;
        std::vector<int> best_inliers;

        std::uniform_int_distribution<int> pick(0, static_cast<int>(remaining.size()) - 1);
        for (int it = 0; it < config.iterations; ++it) {
            PrimitiveKind kind = config.kinds[it % config.kinds.size()];
            int m = minimal_sample_size(kind);
            if (static_cast<int>(remaining.size()) < m) continue;
            std::vector<int> sample;
            while (static_cast<int>(sample.size()) < m) {
                int c = remaining[pick(rng)];
                if (std::find(sample.begin(), sample.end(), c) == sample.end())
                    sample.push_back(c);
            }
            std::optional<ParametricPrimitive> cand =
                kind == PrimitiveKind::Torus ? fit_torus_lsq(cloud, sample, normals)
                                             : minimal_candidate(kind, cloud, normals, sample);
            if (!cand) continue;
            std::vector<int> inliers;
            for (int i : remaining)
                if (distance_to_surface(*cand, cloud[i]) <= config.epsilon) inliers.push_back(i);
            if (inliers.size() > best_inliers.size()) {
                best = cand;
                best_inliers = std::move(inliers);
            }
        }

        if (!best || static_cast<int>(best_inliers.size()) < config.min_support) break;

        // Refine on the inliers and re-collect once.
        if (auto refined = fit_primitive_lsq(best->kind(), cloud, best_inliers, normals)) {
            std::vector<int> re;
            for (int i : remaining)
                if (distance_to_surface(*refined, cloud[i]) <= config.epsilon) re.push_back(i);
            if (re.size() >= best_inliers.size()) {
                best = refined;
                best_inliers = std::move(re);
            }
        }

        parts.push_back({best_inliers, *best});
        std::vector<int> next;
        next.reserve(remaining.size() - best_inliers.size());
        std::vector<char> claimed(cloud.size(), 0);
        for (int i : best_inliers) claimed[i] = 1;
        for (int i : remaining)
            if (!claimed[i]) next.push_back(i);
        remaining = std::move(next);
    }
    return parts;
}

}  // namespace fit4cad
