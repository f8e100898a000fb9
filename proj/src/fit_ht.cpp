#include "fit4cad/fit_ht.hpp"

#include "fit4cad/fit_pg.hpp"
#include "fit4cad/fitters.hpp"
#include "fit4cad/knn.hpp"
#include "fit4cad/metrics.hpp"
#include "fit4cad/persistence.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fit4cad {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 direction(double theta, double phi) {
    double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

std::pair<double, double> angles_of(const Vec3& w) {
    return {std::acos(std::clamp(w.z(), -1.0, 1.0)), std::atan2(w.y(), w.x())};
}

Vec3 any_orthogonal(const Vec3& w) {
    Vec3 t = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return w.cross(t).normalized();
}

void frame_of(const Vec3& w, Vec3& u, Vec3& v) {
    u = any_orthogonal(w);
    v = w.cross(u);
}

std::vector<Vec3> direction_table(const ParamRegion& rg) {
    std::vector<Vec3> dirs;
    dirs.reserve(rg.axes[0].cells * rg.axes[1].cells);
    for (int it = 0; it < rg.axes[0].cells; ++it)
        for (int ip = 0; ip < rg.axes[1].cells; ++ip)
            dirs.push_back(direction(rg.center(0, it), rg.center(1, ip)));
    return dirs;
}

double axis_width(const ParamRegion::Axis& a) { return (a.high - a.low) / a.cells; }

}  // namespace

void ParamRegion::validate() const {
    if (axes.empty()) throw std::invalid_argument("parameter region needs at least one axis");
    for (const Axis& a : axes) {
        if (!(a.low < a.high)) throw std::invalid_argument("parameter axis must have low < high");
        if (a.cells < 1) throw std::invalid_argument("parameter axis needs at least one cell");
    }
}

int ParamRegion::cell_count() const {
    int n = 1;
    for (const Axis& a : axes) n *= a.cells;
    return n;
}

double ParamRegion::center(int axis, int cell) const {
    const Axis& a = axes[axis];
    return a.low + (cell + 0.5) * (a.high - a.low) / a.cells;
}

int ParamRegion::locate(int axis, double value) const {
    const Axis& a = axes[axis];
    if (value < a.low || value >= a.high) return -1;
    int c = static_cast<int>((value - a.low) / (a.high - a.low) * a.cells);
    return std::min(c, a.cells - 1);
}

namespace {

void vote_plane(const std::vector<Point3>& pts, Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    auto dirs = direction_table(rg);
    const int crho = rg.axes[2].cells;
    for (const Point3& p : pts) {
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            int k = rg.locate(2, dirs[d].dot(p));
            if (k >= 0) ++acc.votes[static_cast<int>(d) * crho + k];
        }
    }
}

void vote_sphere(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                 Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    const int c1 = rg.axes[1].cells, c2 = rg.axes[2].cells, c3 = rg.axes[3].cells;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int ir = 0; ir < rg.axes[0].cells; ++ir) {
            double r = rg.center(0, ir);
            for (double sign : {-1.0, 1.0}) {
                Vec3 c = pts[i] + sign * r * normals[i];
                int ix = rg.locate(1, c.x()), iy = rg.locate(2, c.y()), iz = rg.locate(3, c.z());
                if (ix >= 0 && iy >= 0 && iz >= 0)
                    ++acc.votes[((ir * c1 + ix) * c2 + iy) * c3 + iz];
            }
        }
    }
}

void vote_cylinder_direction(const std::vector<Vec3>& normals, Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    auto dirs = direction_table(rg);
    // Normals of a cylinder lie on the great circle orthogonal to its axis.
    double tol = std::max(axis_width(rg.axes[0]), axis_width(rg.axes[1]));
    for (const Vec3& n : normals)
        for (std::size_t d = 0; d < dirs.size(); ++d)
            if (std::abs(dirs[d].dot(n)) <= tol) ++acc.votes[d];
}

void vote_cylinder_profile(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                           Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    Vec3 u, v;
    frame_of(rg.frame_dir, u, v);
    const int c1 = rg.axes[1].cells, c2 = rg.axes[2].cells;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::Vector2d p2(u.dot(pts[i]), v.dot(pts[i]));
        Eigen::Vector2d n2(u.dot(normals[i]), v.dot(normals[i]));
        double len = n2.norm();
        if (len < 0.1) continue;  // normal nearly parallel to the axis
        n2 /= len;
        for (int ir = 0; ir < c2; ++ir) {
            double r = rg.center(2, ir);
            for (double sign : {-1.0, 1.0}) {
                Eigen::Vector2d c = p2 - sign * r * n2;
                int ix = rg.locate(0, c.x()), iy = rg.locate(1, c.y());
                if (ix >= 0 && iy >= 0) ++acc.votes[(ix * c1 + iy) * c2 + ir];
            }
        }
    }
}

void vote_cone(const std::vector<Vec3>& normals, Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    auto dirs = direction_table(rg);
    const int cs = rg.axes[2].cells;
    // Cone normals make a fixed angle with the axis: |w . n| = sin(alpha).
    for (const Vec3& n : normals) {
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            int k = rg.locate(2, std::abs(dirs[d].dot(n)));
            if (k >= 0) ++acc.votes[static_cast<int>(d) * cs + k];
        }
    }
}

void vote_torus_axis(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                     Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    auto dirs = direction_table(rg);
    const int cx = rg.axes[2].cells, cy = rg.axes[3].cells;
    const int steps = 2 * (cx + cy);
    // Every normal line of a torus meets the axis: rasterize the projected
    // normal line of each point into the (px, py) slice of its direction.
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            Vec3 u, v;
            frame_of(dirs[d], u, v);
            Eigen::Vector2d p2(u.dot(pts[i]), v.dot(pts[i]));
            Eigen::Vector2d n2(u.dot(normals[i]), v.dot(normals[i]));
            double len = n2.norm();
            if (len < 0.2) continue;
            n2 /= len;
            // Clip the line p2 + t n2 against the (px, py) box.
            double tmin = -std::numeric_limits<double>::infinity();
            double tmax = std::numeric_limits<double>::infinity();
            bool hit = true;
            for (int a = 0; a < 2 && hit; ++a) {
                double lo = rg.axes[2 + a].low, hi = rg.axes[2 + a].high;
                if (std::abs(n2[a]) < 1e-12) {
                    hit = p2[a] >= lo && p2[a] < hi;
                } else {
                    double t0 = (lo - p2[a]) / n2[a], t1 = (hi - p2[a]) / n2[a];
                    if (t0 > t1) std::swap(t0, t1);
                    tmin = std::max(tmin, t0);
                    tmax = std::min(tmax, t1);
                }
            }
            if (!hit || tmin > tmax) continue;
            int last = -1;
            for (int s = 0; s <= steps; ++s) {
                double t = tmin + (tmax - tmin) * s / steps;
                Eigen::Vector2d q = p2 + t * n2;
                int ix = rg.locate(2, q.x()), iy = rg.locate(3, q.y());
                if (ix < 0 || iy < 0) continue;
                int cell = (static_cast<int>(d) * cx + ix) * cy + iy;
                if (cell != last) {
                    ++acc.votes[cell];
                    last = cell;
                }
            }
        }
    }
}

void vote_torus_meridian(const std::vector<Point3>& pts, Accumulator& acc) {
    const ParamRegion& rg = acc.region;
    const Vec3& w = rg.frame_dir;
    const int cR = rg.axes[1].cells, cr = rg.axes[2].cells;
    // In cylindrical coordinates about the axis, a torus point satisfies
    // (rho - R)^2 + (z - z0)^2 = r^2 for the true (z0, R, r).
    for (const Point3& p : pts) {
        Vec3 d = p - rg.frame_point;
        double z = d.dot(w);
        double rho = (d - z * w).norm();
        for (int iz = 0; iz < rg.axes[0].cells; ++iz) {
            double z0 = rg.center(0, iz);
            for (int iR = 0; iR < cR; ++iR) {
                double R = rg.center(1, iR);
                int k = rg.locate(2, std::hypot(rho - R, z - z0));
                if (k >= 0) ++acc.votes[(iz * cR + iR) * cr + k];
            }
        }
    }
}

}  // namespace

Accumulator build_accumulator(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                              const ParamRegion& region) {
    region.validate();
    if (pts.empty()) throw std::invalid_argument("cannot vote with an empty point set");
    if (normals.size() != pts.size())
        throw std::invalid_argument("one normal per point required");

    Accumulator acc;
    acc.region = region;
    acc.votes.assign(region.cell_count(), 0);
    const int dim = static_cast<int>(region.axes.size());
    switch (region.family) {
        case PrimitiveKind::Plane:
            if (dim != 3) throw std::invalid_argument("plane region has axes (theta, phi, rho)");
            vote_plane(pts, acc);
            break;
        case PrimitiveKind::Sphere:
            if (dim != 4) throw std::invalid_argument("sphere region has axes (r, cx, cy, cz)");
            vote_sphere(pts, normals, acc);
            break;
        case PrimitiveKind::Cylinder:
            if (dim == 2)
                vote_cylinder_direction(normals, acc);
            else if (dim == 3)
                vote_cylinder_profile(pts, normals, acc);
            else
                throw std::invalid_argument("cylinder region has 2 (axis) or 3 (profile) axes");
            break;
        case PrimitiveKind::Cone:
            if (dim != 3) throw std::invalid_argument("cone region has axes (theta, phi, s)");
            vote_cone(normals, acc);
            break;
        case PrimitiveKind::Torus:
            if (dim == 4)
                vote_torus_axis(pts, normals, acc);
            else if (dim == 3)
                vote_torus_meridian(pts, acc);
            else
                throw std::invalid_argument("torus region has 4 (axis) or 3 (meridian) axes");
            break;
    }
    return acc;
}

std::vector<Peak> persistent_maxima(const Accumulator& acc, double ratio) {
    std::vector<double> values(acc.votes.begin(), acc.votes.end());
    std::vector<int> shape;
    for (const auto& a : acc.region.axes) shape.push_back(a.cells);
    std::vector<Peak> peaks;
    for (const GridPeak& g : persistent_maxima(values, shape, ratio)) {
        Peak p;
        for (std::size_t a = 0; a < g.cell.size(); ++a)
            p.coords.push_back(acc.region.center(static_cast<int>(a), g.cell[a]));
        p.height = g.height;
        p.persistence = g.persistence;
        peaks.push_back(std::move(p));
    }
    return peaks;
}

std::optional<ParametricPrimitive> candidate_from_peak(const Peak& peak, PrimitiveKind family) {
    const std::vector<double>& c = peak.coords;
    try {
        switch (family) {
            case PrimitiveKind::Plane: {
                if (c.size() != 3) return std::nullopt;
                Vec3 n = direction(c[0], c[1]);
                Vec3 a = any_orthogonal(n);
                return ParametricPrimitive::make_plane(a, n.cross(a), c[2] * n);
            }
            case PrimitiveKind::Sphere: {
                if (c.size() != 4) return std::nullopt;
                return ParametricPrimitive::make_sphere(Vec3(c[1], c[2], c[3]), c[0]);
            }
            case PrimitiveKind::Cylinder: {
                if (c.size() != 5) return std::nullopt;
                Vec3 w = direction(c[0], c[1]);
                Vec3 u, v;
                frame_of(w, u, v);
                return ParametricPrimitive::make_cylinder(c[2] * u + c[3] * v, w, c[4]);
            }
            case PrimitiveKind::Cone: {
                if (c.size() != 6) return std::nullopt;
                double alpha = c[2];
                if (!(alpha > 1e-3 && alpha < kPi / 2 - 1e-3)) return std::nullopt;
                Vec3 w = direction(c[0], c[1]);
                Vec3 apex(c[3], c[4], c[5]);
                return ParametricPrimitive::make_cone(apex + w, w, std::tan(alpha), alpha);
            }
            case PrimitiveKind::Torus: {
                if (c.size() != 7) return std::nullopt;
                return ParametricPrimitive::make_torus(Vec3(c[2], c[3], c[4]),
                                                       direction(c[0], c[1]), c[5], c[6]);
            }
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return std::nullopt;
}

std::vector<int> assign_inliers(const std::vector<Point3>& cloud,
                                const std::vector<int>& candidates,
                                const ParametricPrimitive& surf, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    double limit = epsilon * bounding_box_diagonal(cloud);
    std::vector<int> inliers;
    for (int i : candidates)
        if (distance_to_surface(surf, cloud[i]) <= limit) inliers.push_back(i);
    return inliers;
}

ParametricPrimitive select_best_type(const std::vector<Point3>& cloud,
                                     const std::vector<int>& subset,
                                     const std::vector<ParametricPrimitive>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no candidates to choose from");
    if (subset.empty()) throw std::invalid_argument("empty subset");

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return static_cast<int>(candidates[a].kind()) < static_cast<int>(candidates[b].kind());
    });

    std::size_t best = order[0];
    double best_mfe = mean_fitting_error(cloud, subset, candidates[best]);
    for (std::size_t k = 1; k < order.size(); ++k) {
        double mfe = mean_fitting_error(cloud, subset, candidates[order[k]]);
        if (mfe < best_mfe) {
            best = order[k];
            best_mfe = mfe;
        }
    }
    return candidates[best];
}

namespace {

/// Claiming filter: distance inliers whose estimated normals also agree with
/// the candidate surface orientation. The plain distance band is wide enough
/// (epsilon is a fraction of the whole-scene diagonal) that a sprawling
/// wrong-family surface can sweep through several true primitives; requiring
/// normal agreement keeps only points the surface actually explains.
std::vector<int> claim_inliers(const std::vector<Point3>& cloud, const std::vector<Vec3>& normals,
                               const std::vector<int>& candidates,
                               const ParametricPrimitive& surf, double epsilon) {
    constexpr double kMinNormalDot = 0.866;  // 30 degrees
    std::vector<int> close = assign_inliers(cloud, candidates, surf, epsilon);
    std::vector<int> out;
    out.reserve(close.size());
    for (int i : close)
        if (std::abs(normals[i].dot(surface_normal_near(surf, cloud[i]))) >= kMinNormalDot)
            out.push_back(i);
    return out;
}

/// Largest connected component of `subset` under the symmetric closure of the
/// cloud's k-nearest-neighbor graph. Distinct features of a scene are spatially
/// separated, so a candidate surface that happens to pass near several of them
/// can still only claim one coherent piece per iteration.
std::vector<int> largest_component(const std::vector<int>& subset,
                                   const std::vector<std::vector<int>>& adj) {
    if (subset.empty()) return {};
    std::vector<char> in(adj.size(), 0);
    for (int i : subset) in[i] = 1;
    std::vector<char> visited(adj.size(), 0);
    std::vector<int> best;
    for (int start : subset) {
        if (visited[start]) continue;
        std::vector<int> comp, stack = {start};
        visited[start] = 1;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            comp.push_back(i);
            for (int j : adj[i])
                if (in[j] && !visited[j]) {
                    visited[j] = 1;
                    stack.push_back(j);
                }
        }
        if (comp.size() > best.size()) best = std::move(comp);
    }
    std::sort(best.begin(), best.end());
    return best;
}

std::vector<int> strided_subsample(const std::vector<int>& v, int max_count) {
    if (static_cast<int>(v.size()) <= max_count) return v;
    std::vector<int> out;
    out.reserve(max_count);
    double step = static_cast<double>(v.size()) / max_count;
    for (int i = 0; i < max_count; ++i) out.push_back(v[static_cast<std::size_t>(i * step)]);
    return out;
}

std::vector<Peak> top_peaks(std::vector<Peak> peaks, std::size_t n) {
    if (peaks.size() > n) peaks.resize(n);
    return peaks;
}

struct VoterSet {
    std::vector<Point3> pts;
    std::vector<Vec3> normals;
    std::vector<int> idx;  // cloud indices of the voters
};

void plane_candidates(const VoterSet& vs, const HtConfig& cfg, double bound,
                      std::vector<ParametricPrimitive>& out) {
    ParamRegion rg;
    rg.family = PrimitiveKind::Plane;
    rg.axes = {{0.0, kPi, cfg.angular_cells},
               {0.0, kPi, cfg.angular_cells},
               {-bound, bound, cfg.angular_cells}};
    Accumulator acc = build_accumulator(vs.pts, vs.normals, rg);
    for (const Peak& p : top_peaks(persistent_maxima(acc, cfg.persistence_ratio), 6))
        if (auto c = candidate_from_peak(p, PrimitiveKind::Plane)) out.push_back(*c);
}

void sphere_candidates(const VoterSet& vs, const HtConfig& cfg, double diag, const Vec3& lo,
                       const Vec3& hi, std::vector<ParametricPrimitive>& out) {
    double r_hi = 0.6 * diag;
    ParamRegion rg;
    rg.family = PrimitiveKind::Sphere;
    rg.axes = {{0.02 * diag, r_hi, cfg.volume_cells},
               {lo.x() - r_hi, hi.x() + r_hi, cfg.volume_cells},
               {lo.y() - r_hi, hi.y() + r_hi, cfg.volume_cells},
               {lo.z() - r_hi, hi.z() + r_hi, cfg.volume_cells}};
    Accumulator acc = build_accumulator(vs.pts, vs.normals, rg);
    for (const Peak& p : top_peaks(persistent_maxima(acc, cfg.persistence_ratio), 6))
        if (auto c = candidate_from_peak(p, PrimitiveKind::Sphere)) out.push_back(*c);
}

void cylinder_candidates(const VoterSet& vs, const HtConfig& cfg, double diag, double bound,
                         std::vector<ParametricPrimitive>& out) {
    ParamRegion dir_rg;
    dir_rg.family = PrimitiveKind::Cylinder;
    dir_rg.axes = {{0.0, kPi, cfg.angular_cells}, {0.0, kPi, cfg.angular_cells}};
    Accumulator dir_acc = build_accumulator(vs.pts, vs.normals, dir_rg);
    for (const Peak& dp : top_peaks(persistent_maxima(dir_acc, cfg.persistence_ratio), 3)) {
        ParamRegion rg;
        rg.family = PrimitiveKind::Cylinder;
        rg.frame_dir = direction(dp.coords[0], dp.coords[1]);
        rg.axes = {{-bound, bound, cfg.volume_cells},
                   {-bound, bound, cfg.volume_cells},
                   {0.02 * diag, 0.6 * diag, cfg.volume_cells}};
        Accumulator acc = build_accumulator(vs.pts, vs.normals, rg);
        for (const Peak& p : top_peaks(persistent_maxima(acc, cfg.persistence_ratio), 3)) {
            Peak full;
            full.coords = {dp.coords[0], dp.coords[1], p.coords[0], p.coords[1], p.coords[2]};
            full.height = p.height;
            full.persistence = p.persistence;
            if (auto c = candidate_from_peak(full, PrimitiveKind::Cylinder)) out.push_back(*c);
        }
    }
}

void cone_candidates(const VoterSet& vs, const HtConfig& cfg,
                     std::vector<ParametricPrimitive>& out) {
    ParamRegion rg;
    rg.family = PrimitiveKind::Cone;
    rg.axes = {{0.0, kPi, cfg.angular_cells},
               {0.0, kPi, cfg.angular_cells},
               {0.05, 0.999, cfg.angular_cells}};
    Accumulator acc = build_accumulator(vs.pts, vs.normals, rg);
    double ds = axis_width(rg.axes[2]);
    for (const Peak& p : top_peaks(persistent_maxima(acc, cfg.persistence_ratio), 6)) {
        Vec3 w = direction(p.coords[0], p.coords[1]);
        double s = p.coords[2];
        // Voters consistent with this (axis, angle) cell contribute their
        // tangent planes, which all pass through the apex.
        Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
        Vec3 b = Vec3::Zero();
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < vs.pts.size(); ++i) {
            if (std::abs(std::abs(w.dot(vs.normals[i])) - s) > ds) continue;
            A += vs.normals[i] * vs.normals[i].transpose();
            b += vs.normals[i] * vs.normals[i].dot(vs.pts[i]);
            members.push_back(i);
        }
        if (members.size() < 6) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
        if (es.eigenvalues()[0] < 1e-6 * es.eigenvalues()[2]) continue;
        Vec3 apex = A.ldlt().solve(b);
        double height = 0.0;
        for (std::size_t i : members) height += (vs.pts[i] - apex).dot(w);
        if (height < 0.0) w = -w;
        auto [theta, phi] = angles_of(w);
        Peak full;
        full.coords = {theta, phi, std::asin(std::clamp(s, 0.0, 1.0)),
                       apex.x(), apex.y(), apex.z()};
        full.height = p.height;
        full.persistence = p.persistence;
        if (auto c = candidate_from_peak(full, PrimitiveKind::Cone)) out.push_back(*c);
    }
}

void torus_candidates(const VoterSet& vs, const HtConfig& cfg, double diag, double bound,
                      std::vector<ParametricPrimitive>& out) {
    ParamRegion axis_rg;
    axis_rg.family = PrimitiveKind::Torus;
    axis_rg.axes = {{0.0, kPi, cfg.volume_cells},
                    {0.0, kPi, cfg.volume_cells},
                    {-bound, bound, cfg.volume_cells},
                    {-bound, bound, cfg.volume_cells}};
    Accumulator axis_acc = build_accumulator(vs.pts, vs.normals, axis_rg);
    for (const Peak& ap : top_peaks(persistent_maxima(axis_acc, cfg.persistence_ratio), 2)) {
        Vec3 w = direction(ap.coords[0], ap.coords[1]);
        Vec3 u, v;
        frame_of(w, u, v);
        Vec3 origin = ap.coords[2] * u + ap.coords[3] * v;

        double z_lo = std::numeric_limits<double>::infinity(), z_hi = -z_lo, rho_max = 0.0;
        for (const Point3& p : vs.pts) {
            Vec3 d = p - origin;
            double z = d.dot(w);
            z_lo = std::min(z_lo, z);
            z_hi = std::max(z_hi, z);
            rho_max = std::max(rho_max, (d - z * w).norm());
        }
        if (!(z_hi > z_lo) || rho_max <= 0.03 * diag) continue;

        ParamRegion rg;
        rg.family = PrimitiveKind::Torus;
        rg.frame_dir = w;
        rg.frame_point = origin;
        rg.axes = {{z_lo - 1e-9, z_hi + 1e-9, cfg.volume_cells},
                   {0.02 * diag, rho_max, cfg.volume_cells},
                   {0.01 * diag, 0.4 * diag, cfg.volume_cells}};
        Accumulator acc = build_accumulator(vs.pts, vs.normals, rg);
        for (const Peak& p : top_peaks(persistent_maxima(acc, cfg.persistence_ratio), 3)) {
            Vec3 center = origin + p.coords[0] * w;
            Peak full;
            full.coords = {ap.coords[0], ap.coords[1], center.x(), center.y(), center.z(),
                           p.coords[1], p.coords[2]};
            full.height = p.height;
            full.persistence = p.persistence;
            if (auto c = candidate_from_peak(full, PrimitiveKind::Torus)) out.push_back(*c);
        }
    }
}

}  // namespace

HtResult fit_ht(const std::vector<Point3>& cloud, const HtConfig& config) {
    if (static_cast<int>(cloud.size()) < std::max(config.min_segment_size, 17))
        throw std::invalid_argument("cloud too small to segment");
    double diag = bounding_box_diagonal(cloud);
    if (diag <= 0.0) throw std::invalid_argument("degenerate cloud: zero bounding box");

    Vec3 lo = cloud[0], hi = cloud[0];
    double bound = 0.0;
    for (const Point3& p : cloud) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        bound = std::max(bound, p.norm());
    }
    bound *= 1.001;

    std::vector<Vec3> normals = estimate_normals(cloud, 16);

    // Symmetrized k-NN adjacency for the connected-component claiming filter.
    NeighborGraph graph =
        build_neighbor_graph(cloud, std::min<int>(8, static_cast<int>(cloud.size()) - 1));
    std::vector<std::vector<int>> adj(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int j : graph.neighbors[i]) {
            adj[i].push_back(j);
            adj[j].push_back(static_cast<int>(i));
        }

    std::vector<char> claimed(cloud.size(), 0);
    HtResult result;
    result.segmentation.cloud_size = static_cast<int>(cloud.size());

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        std::vector<int> unclaimed;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (!claimed[i]) unclaimed.push_back(static_cast<int>(i));
        if (static_cast<int>(unclaimed.size()) < config.min_segment_size) break;

        VoterSet vs;
        vs.idx = strided_subsample(unclaimed, config.max_voters);
        for (int i : vs.idx) {
            vs.pts.push_back(cloud[i]);
            vs.normals.push_back(normals[i]);
        }

        std::vector<ParametricPrimitive> candidates;
        for (PrimitiveKind family : config.families) {
            switch (family) {
                case PrimitiveKind::Plane: plane_candidates(vs, config, bound, candidates); break;
                case PrimitiveKind::Sphere:
                    sphere_candidates(vs, config, diag, lo, hi, candidates);
                    break;
                case PrimitiveKind::Cylinder:
                    cylinder_candidates(vs, config, diag, bound, candidates);
                    break;
                case PrimitiveKind::Cone: cone_candidates(vs, config, candidates); break;
                case PrimitiveKind::Torus:
                    torus_candidates(vs, config, diag, bound, candidates);
                    break;
            }
        }

        // Evaluate candidates: coarse claim, least-squares polish, final claim.
        std::optional<ParametricPrimitive> best;
        std::vector<int> best_inliers;
        double best_mfe = 0.0;
        for (const ParametricPrimitive& cand : candidates) {
            std::vector<int> coarse = largest_component(
                claim_inliers(cloud, normals, unclaimed, cand, 2.0 * config.epsilon), adj);
            if (static_cast<int>(coarse.size()) < config.min_segment_size) continue;
            ParametricPrimitive polished = cand;
            if (auto refined = fit_primitive_lsq(cand.kind(), cloud, coarse, normals))
                polished = *refined;
            std::vector<int> inliers = largest_component(
                claim_inliers(cloud, normals, unclaimed, polished, config.epsilon), adj);
            if (static_cast<int>(inliers.size()) < config.min_segment_size) continue;
            double mfe = mean_fitting_error(cloud, inliers, polished);
            if (!best || inliers.size() > best_inliers.size() ||
                (inliers.size() == best_inliers.size() && mfe < best_mfe)) {
                best = polished;
                best_inliers = std::move(inliers);
                best_mfe = mfe;
            }
        }
        if (!best) break;

        // Competing-type disambiguation on the claimed subset.
        std::vector<ParametricPrimitive> rivals = {*best};
        for (PrimitiveKind family : config.families)
            if (auto fit = fit_primitive_lsq(family, cloud, best_inliers, normals))
                if (mean_fitting_error(cloud, best_inliers, *fit) <= best_mfe + 1e-12)
                    rivals.push_back(*fit);
        ParametricPrimitive chosen = select_best_type(cloud, best_inliers, rivals);

        for (int i : best_inliers) claimed[i] = 1;
        result.segmentation.segments.push_back({std::move(best_inliers)});
        result.parametric.push_back(chosen);
        result.implicit.push_back(parametric_to_implicit(chosen));
    }

    // Drop poor-quality segments: a genuine claim is explained well inside
    // the inlier band, while late leftover clusters (edge scraps of earlier
    // claims) merely hover near the band edge. Their points rejoin the
    // leftovers and are redistributed below.
    for (std::size_t s = result.segmentation.segments.size(); s-- > 0;) {
        const auto& idx = result.segmentation.segments[s].indices;
        if (mean_fitting_error(cloud, idx, result.parametric[s]) <= 0.5 * config.epsilon)
            continue;
        for (int i : idx) claimed[i] = 0;
        result.segmentation.segments.erase(result.segmentation.segments.begin() + s);
        result.parametric.erase(result.parametric.begin() + s);
        result.implicit.erase(result.implicit.begin() + s);
    }

    // Leftover points (typically near sharp edges, where estimated normals
    // are unreliable but the points still lie essentially on their surface)
    // join the nearest recovered primitive. The band is much tighter than the
    // claiming band: segment error norms are relative to the segment's own
    // extent, so adopting genuinely distant points would degrade small
    // segments disproportionately.
    if (!result.parametric.empty()) {
        double limit = 0.1 * config.epsilon * diag;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (claimed[i]) continue;
            std::size_t best_seg = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < result.parametric.size(); ++s) {
                double d = distance_to_surface(result.parametric[s], cloud[i]);
                if (d < best_d) {
                    best_d = d;
                    best_seg = s;
                }
            }
            if (best_d <= limit)
                result.segmentation.segments[best_seg].indices.push_back(static_cast<int>(i));
        }
        for (Segment& s : result.segmentation.segments)
            std::sort(s.indices.begin(), s.indices.end());
    }
    return result;
}

HtConfig ht_config_from_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    HtConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        if (key == "angular_cells")
            cfg.angular_cells = value.get<int>();
        else if (key == "volume_cells")
            cfg.volume_cells = value.get<int>();
        else if (key == "epsilon")
            cfg.epsilon = value.get<double>();
        else if (key == "persistence_ratio")
            cfg.persistence_ratio = value.get<double>();
        else if (key == "min_segment_size")
            cfg.min_segment_size = value.get<int>();
        else if (key == "max_iterations")
            cfg.max_iterations = value.get<int>();
        else if (key == "max_voters")
            cfg.max_voters = value.get<int>();
        else if (key == "families") {
            cfg.families.clear();
            for (const auto& name : value) cfg.families.push_back(kind_from_name(name.get<std::string>()));
        } else {
            throw std::invalid_argument("unknown config key: " + key);
        }
    }
    if (!(cfg.persistence_ratio > 0.0 && cfg.persistence_ratio <= 1.0))
        throw std::invalid_argument("persistence_ratio must lie in (0, 1]");
    if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
        throw std::invalid_argument("epsilon must lie in (0, 1]");
    if (cfg.min_segment_size < 3) throw std::invalid_argument("min_segment_size must be >= 3");
    return cfg;
}

}  // namespace fit4cad
