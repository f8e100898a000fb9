#include "fit4cad/fit_pg.hpp"

#include "fit4cad/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fit4cad {

namespace {

Eigen::Matrix3d neighborhood_covariance(const std::vector<Point3>& cloud, int center,
                                        const std::vector<int>& neighbors) {
    Vec3 mean = cloud[center];
    for (int j : neighbors) mean += cloud[j];
    mean /= static_cast<double>(neighbors.size() + 1);
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    Vec3 d = cloud[center] - mean;
    C += d * d.transpose();
    for (int j : neighbors) {
        d = cloud[j] - mean;
        C += d * d.transpose();
    }
    return C;
}

std::vector<Vec3> normals_from_graph(const std::vector<Point3>& cloud, const NeighborGraph& graph,
                                     std::vector<char>* reliable) {
    std::vector<Vec3> normals(cloud.size());
    if (reliable) reliable->assign(cloud.size(), 1);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
            neighborhood_covariance(cloud, static_cast<int>(i), graph.neighbors[i]));
        normals[i] = es.eigenvectors().col(0);
        if (reliable && es.eigenvalues()[1] <= 1e-9 * std::max(es.eigenvalues()[2], 1e-300))
            (*reliable)[i] = 0;
    }
    return normals;
}

double mean_distance(const std::vector<Point3>& cloud, const std::vector<int>& idx,
                     const ParametricPrimitive& p) {
    double s = 0.0;
    for (int i : idx) s += distance_to_surface(p, cloud[i]);
    return s / idx.size();
}

}  // namespace

const char* invariance_class_name(InvarianceClass c) {
    switch (c) {
        case InvarianceClass::Planar: return "planar";
        case InvarianceClass::Spherical: return "spherical";
        case InvarianceClass::Cylindrical: return "cylindrical";
        case InvarianceClass::Helical: return "helical";
        case InvarianceClass::Prismatic: return "prismatic";
        case InvarianceClass::Revolute: return "revolute";
        case InvarianceClass::Complex: return "complex";
    }
    return "complex";
}

std::vector<Vec3> estimate_normals(const std::vector<Point3>& cloud, int k,
                                   std::vector<char>* reliable) {
    if (k < 3) throw std::invalid_argument("normal estimation requires k >= 3");
    NeighborGraph graph = build_neighbor_graph(cloud, k);
    return normals_from_graph(cloud, graph, reliable);
}

std::vector<double> surface_variation(const std::vector<Point3>& cloud,
                                      const NeighborGraph& graph) {
    std::vector<double> sigma(cloud.size(), 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
            neighborhood_covariance(cloud, static_cast<int>(i), graph.neighbors[i]));
        double trace = es.eigenvalues().sum();
        sigma[i] = trace > 0.0 ? es.eigenvalues()[0] / trace : 0.0;
    }
    return sigma;
}

std::vector<char> detect_sharp_edges(const std::vector<double>& variations, double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
    double threshold = quantile_type7(variations, eta);
    std::vector<char> sharp(variations.size(), 0);
    for (std::size_t i = 0; i < variations.size(); ++i)
        if (variations[i] > threshold) sharp[i] = 1;
    return sharp;
}

std::vector<std::vector<int>> region_grow(const std::vector<Point3>& cloud,
                                          const NeighborGraph& graph,
                                          const std::vector<char>& sharp, std::uint64_t seed) {
    const int n = static_cast<int>(cloud.size());
    if (static_cast<int>(sharp.size()) != n || static_cast<int>(graph.neighbors.size()) != n)
        throw std::invalid_argument("inconsistent region-growing inputs");

    // Symmetric closure: j reachable from i if either lists the other.
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j : graph.neighbors[i]) {
            adj[i].push_back(j);
            adj[j].push_back(i);
        }

    std::vector<int> seeds;
    seeds.reserve(n);
    for (int i = 0; i < n; ++i)
        if (!sharp[i]) seeds.push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(seeds.begin(), seeds.end(), rng);

    std::vector<char> visited(n, 0);
    std::vector<std::vector<int>> regions;
    for (int s : seeds) {
        if (visited[s]) continue;
        std::vector<int> region;
        std::deque<int> queue = {s};
        visited[s] = 1;
        while (!queue.empty()) {
            int i = queue.front();
            queue.pop_front();
            region.push_back(i);
            for (int j : adj[i]) {
                if (visited[j] || sharp[j]) continue;
                visited[j] = 1;
                queue.push_back(j);
            }
        }
        std::sort(region.begin(), region.end());
        regions.push_back(std::move(region));
    }
    return regions;
}

SlippageResult slippage_analysis(const std::vector<Point3>& pts, const std::vector<Vec3>& normals,
                                 double smallness_ratio) {
    if (pts.size() < 6) throw std::invalid_argument("slippage analysis needs at least 6 points");
    if (normals.size() != pts.size())
        throw std::invalid_argument("one normal per point required");

    // Center and scale to a unit bounding box so the rotational and
    // translational blocks are comparable.
    Vec3 lo = pts[0], hi = pts[0], mean = Vec3::Zero();
    for (const Point3& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        mean += p;
    }
    mean /= static_cast<double>(pts.size());
    double scale = (hi - lo).maxCoeff();
    if (scale <= 0.0) scale = 1.0;

    using Mat6 = Eigen::Matrix<double, 6, 6>;
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    Mat6 C = Mat6::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec3 x = (pts[i] - mean) / scale;
        Vec6 c;
        c << x.cross(normals[i]), normals[i];
        C += c * c.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Mat6> es(C);
    SlippageResult r;
    for (int j = 0; j < 6; ++j) r.eigenvalues[j] = es.eigenvalues()[j];
    double lambda_max = std::max(r.eigenvalues[5], 0.0);
    int s = 0;
    for (int j = 0; j < 6; ++j)
        if (r.eigenvalues[j] < smallness_ratio * lambda_max) ++s;
    r.slippable = std::min(s, 3);

    // A slippable motion [omega; t] moves each point with velocity
    // omega x x + t. A pure translation (omega = 0) in the slippable space
    // separates planar/cylindrical/prismatic from their rotational
    // counterparts: it exists iff the rotational parts of the null-space
    // basis are rank deficient.
    bool pure_translation = false;
    if (r.slippable > 0) {
        Eigen::Matrix3Xd omega(3, r.slippable);
        for (int j = 0; j < r.slippable; ++j) omega.col(j) = es.eigenvectors().col(j).head<3>();
        Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(omega);
        pure_translation = svd.singularValues()[svd.singularValues().size() - 1] < 0.1;
    }

    switch (r.slippable) {
        case 3:
            r.cls = pure_translation ? InvarianceClass::Planar : InvarianceClass::Spherical;
            break;
        case 2:
            r.cls = pure_translation ? InvarianceClass::Cylindrical : InvarianceClass::Helical;
            break;
        case 1:
            r.cls = pure_translation ? InvarianceClass::Prismatic : InvarianceClass::Revolute;
            break;
        default: r.cls = InvarianceClass::Complex;
    }
    return r;
}

std::vector<PgPart> refine_segment(const std::vector<Point3>& cloud,
                                   const std::vector<int>& segment,
                                   const std::vector<Vec3>& normals, InvarianceClass cls,
                                   const PgConfig& config, double bbox_diagonal) {
    std::optional<ParametricPrimitive> direct;
    switch (cls) {
        case InvarianceClass::Planar: direct = fit_plane_lsq(cloud, segment); break;
        case InvarianceClass::Spherical: direct = fit_sphere_lsq(cloud, segment); break;
        case InvarianceClass::Cylindrical: direct = fit_cylinder_lsq(cloud, segment, normals); break;
        case InvarianceClass::Revolute: {
            auto cone = fit_cone_lsq(cloud, segment, normals);
            auto torus = fit_torus_lsq(cloud, segment, normals);
            if (cone && torus)
                direct = mean_distance(cloud, segment, *cone) <=
                                 mean_distance(cloud, segment, *torus)
                             ? cone
                             : torus;
            else
                direct = cone ? cone : torus;
            break;
        }
        case InvarianceClass::Helical:
        case InvarianceClass::Prismatic:
        case InvarianceClass::Complex: break;  // decomposition below
    }
    if (direct) return {{segment, *direct}};

    RansacConfig rc;
    rc.epsilon = config.ransac_epsilon * bbox_diagonal;
    rc.min_support =
        std::max(config.min_segment_size, static_cast<int>(segment.size()) / 100);
    rc.iterations = config.ransac_iterations;
    rc.seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
    std::vector<PgPart> parts;
    for (RansacPart& p : ransac_decompose(cloud, segment, normals, rc))
        parts.push_back({std::move(p.indices), std::move(p.prim)});
    return parts;
}

Segmentation assign_sharp_points(std::vector<PgPart> parts, const std::vector<int>& sharp_points,
                                 const std::vector<Point3>& cloud) {
    Segmentation seg;
    seg.cloud_size = static_cast<int>(cloud.size());
    if (!parts.empty()) {
        for (int i : sharp_points) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < parts.size(); ++p) {
                double d = distance_to_surface(parts[p].prim, cloud[i]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(p);
                }
            }
            parts[best].indices.push_back(i);
        }
    }
    for (PgPart& p : parts) {
        std::sort(p.indices.begin(), p.indices.end());
        seg.segments.push_back({std::move(p.indices)});
    }
    return seg;
}

PgResult fit_pg(const std::vector<Point3>& cloud, const PgConfig& config) {
    if (static_cast<int>(cloud.size()) <= config.k)
        throw std::invalid_argument("cloud must hold more than k points");
    double diag = bounding_box_diagonal(cloud);
    if (diag <= 0.0) throw std::invalid_argument("degenerate cloud: zero bounding box");

    NeighborGraph graph = build_neighbor_graph(cloud, config.k);
    std::vector<Vec3> normals = normals_from_graph(cloud, graph, nullptr);
    std::vector<double> variations = surface_variation(cloud, graph);
    std::vector<char> sharp = detect_sharp_edges(variations, config.eta);
    std::vector<std::vector<int>> regions = region_grow(cloud, graph, sharp, config.seed);

    // Regions too small to classify join the sharp points for reassignment.
    std::vector<int> reassign;
    for (std::size_t i = 0; i < sharp.size(); ++i)
        if (sharp[i]) reassign.push_back(static_cast<int>(i));

    std::vector<PgPart> parts;
    const int min_classify = std::max(6, config.min_segment_size);
    for (const std::vector<int>& region : regions) {
        if (static_cast<int>(region.size()) < min_classify) {
            reassign.insert(reassign.end(), region.begin(), region.end());
            continue;
        }
        std::vector<Point3> pts;
        std::vector<Vec3> nrm;
        pts.reserve(region.size());
        nrm.reserve(region.size());
        for (int i : region) {
            pts.push_back(cloud[i]);
            nrm.push_back(normals[i]);
        }
        SlippageResult sr = slippage_analysis(pts, nrm, config.slippage_ratio);
        for (PgPart& p : refine_segment(cloud, region, normals, sr.cls, config, diag))
            parts.push_back(std::move(p));
    }

    std::sort(reassign.begin(), reassign.end());
    PgResult result;
    std::vector<ParametricPrimitive> prims;
    prims.reserve(parts.size());
    for (const PgPart& p : parts) prims.push_back(p.prim);
    result.segmentation = assign_sharp_points(std::move(parts), reassign, cloud);
    result.parametric = std::move(prims);
    for (const ParametricPrimitive& p : result.parametric)
        result.implicit.push_back(parametric_to_implicit(p));
    return result;
}

PgConfig pg_config_from_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    PgConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        if (key == "k")
            cfg.k = value.get<int>();
        else if (key == "eta")
            cfg.eta = value.get<double>();
        else if (key == "slippage_ratio")
            cfg.slippage_ratio = value.get<double>();
        else if (key == "ransac_epsilon")
            cfg.ransac_epsilon = value.get<double>();
        else if (key == "ransac_iterations")
            cfg.ransac_iterations = value.get<int>();
        else if (key == "seed")
            cfg.seed = value.get<std::uint64_t>();
        else if (key == "min_segment_size")
            cfg.min_segment_size = value.get<int>();
        else
            throw std::invalid_argument("unknown config key: " + key);
    }
    if (cfg.k < 3) throw std::invalid_argument("k must be >= 3");
    if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
    return cfg;
}

}  // namespace fit4cad
