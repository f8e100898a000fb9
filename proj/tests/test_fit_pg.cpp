#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fit4cad/fit_pg.hpp"
#include "fit4cad/metrics.hpp"
#include "helpers.hpp"

#include <Eigen/Geometry>
#include <map>
#include <random>

using namespace fit4cad;

namespace {

std::vector<Point3> plane_patch(const Vec3& a, const Vec3& b, const Vec3& origin, int n,
                                std::uint64_t seed) {
    auto prim = ParametricPrimitive::make_plane(a, b, origin);
    return sample_surface(prim, TrimRegion(-1, 1, -1, 1), n, seed);
}

std::vector<int> iota_indices(std::size_t n) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    return idx;
}

struct LabeledCloud {
    std::vector<Point3> pts;
    std::vector<Vec3> normals;          // analytic, per point
    std::vector<std::vector<int>> gt;   // ground-truth grouping
};

void append_patch(LabeledCloud& lc, const ParametricPrimitive& prim, const TrimRegion& trim,
                  int n, std::uint64_t seed) {
    auto pts = sample_surface(prim, trim, n, seed);
    std::vector<int> ids;
    for (const auto& p : pts) {
        ids.push_back(static_cast<int>(lc.pts.size()));
        lc.pts.push_back(p);
        lc.normals.push_back(surface_normal_near(prim, p));
    }
    lc.gt.push_back(ids);
}

LabeledCloud cube_cloud(int per_face) {
    LabeledCloud lc;
    const double h = 0.5;
    struct Face {
        Vec3 a, b, o;
    };
    std::vector<Face> faces = {
        {{h, 0, 0}, {0, h, 0}, {0, 0, h}},  {{h, 0, 0}, {0, h, 0}, {0, 0, -h}},
        {{h, 0, 0}, {0, 0, h}, {0, h, 0}},  {{h, 0, 0}, {0, 0, h}, {0, -h, 0}},
        {{0, h, 0}, {0, 0, h}, {h, 0, 0}},  {{0, h, 0}, {0, 0, h}, {-h, 0, 0}}};
    std::uint64_t seed = 100;
    for (const Face& f : faces)
        append_patch(lc, ParametricPrimitive::make_plane(f.a, f.b, f.o),
                     TrimRegion(-1, 1, -1, 1), per_face, seed++);
    return lc;
}

SlippageResult slippage_of(const ParametricPrimitive& prim, const TrimRegion& trim, int n,
                           std::uint64_t seed) {
    auto pts = sample_surface(prim, trim, n, seed);
    std::vector<Vec3> normals;
    for (const auto& p : pts) normals.push_back(surface_normal_near(prim, p));
    return slippage_analysis(pts, normals);
}

}  // namespace

TEST_CASE("estimate_normals") {
    SUBCASE("planar cloud gives the plane normal up to sign") {
        auto pts = plane_patch({1, 0, 0}, {0, 1, 0}, {0, 0, 2}, 300, 1);
        auto normals = estimate_normals(pts, 8);
        for (const auto& n : normals) {
            CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(std::abs(n.z()) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("sphere normals are radial within 6 degrees") {
        auto sphere = ParametricPrimitive::make_sphere({0, 0, 0}, 1.0);
        auto pts = sample_surface(sphere, full_domain(PrimitiveKind::Sphere), 2000, 2);
        auto normals = estimate_normals(pts, 16);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double c = std::abs(normals[i].dot(pts[i].normalized()));
            CHECK(c >= std::cos(6.0 * std::numbers::pi / 180.0));
        }
    }
    SUBCASE("cloud smaller than k is an error") {
        std::vector<Point3> two = {{0, 0, 0}, {1, 0, 0}};
        CHECK_THROWS(estimate_normals(two, 3));
    }
    SUBCASE("collinear neighborhoods are flagged unreliable") {
        std::vector<Point3> line;
        for (int i = 0; i < 10; ++i) line.push_back({0.1 * i, 0, 0});
        std::vector<char> reliable;
        estimate_normals(line, 4, &reliable);
        REQUIRE(reliable.size() == 10);
        for (char r : reliable) CHECK(!r);
    }
}

TEST_CASE("surface_variation") {
    SUBCASE("coplanar neighborhoods give exactly 0") {
        auto pts = plane_patch({1, 0, 0}, {0, 1, 0}, {0, 0, 0}, 200, 3);
        auto var = surface_variation(pts, build_neighbor_graph(pts, 8));
        for (double v : var) CHECK(v == 0.0);
    }
    SUBCASE("isotropic blob approaches 1/3") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g;
        std::vector<Point3> pts;
        for (int i = 0; i < 600; ++i) pts.push_back({g(rng), g(rng), g(rng)});
        auto var = surface_variation(pts, build_neighbor_graph(pts, 40));
        double mean = 0;
        for (double v : var) mean += v;
        mean /= var.size();
        CHECK(mean > 0.15);
        CHECK(mean <= 1.0 / 3 + 1e-12);
    }
    SUBCASE("range invariant") {
        std::mt19937_64 rng(6);
        std::vector<Point3> pts;
        for (int i = 0; i < 300; ++i) pts.push_back(testutil::random_point(rng));
        for (double v : surface_variation(pts, build_neighbor_graph(pts, 10))) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 / 3 + 1e-12);
        }
    }
    SUBCASE("points near a right-angle edge stand out") {
        LabeledCloud lc;
        append_patch(lc, ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {1, 0, 0}),
                     TrimRegion(-1, 1, -1, 1), 400, 7);
        append_patch(lc, ParametricPrimitive::make_plane({0, 0, 1}, {0, 1, 0}, {0, 0, 1}),
                     TrimRegion(-1, 1, -1, 1), 400, 8);
        auto var = surface_variation(lc.pts, build_neighbor_graph(lc.pts, 16));
        double q80 = quantile_type7(var, 0.8);
        // every point within 0.05 of the shared edge (x=0, z=0) exceeds the
        // flat-dominated 80th percentile
        int near = 0, above = 0;
        for (std::size_t i = 0; i < lc.pts.size(); ++i) {
            if (std::hypot(lc.pts[i].x(), lc.pts[i].z()) < 0.05) {
                ++near;
                if (var[i] > q80) ++above;
            }
        }
        REQUIRE(near > 5);
        CHECK(above == near);
    }
}

TEST_CASE("detect_sharp_edges quantile behavior") {
    SUBCASE("eta=0.8 on 100 distinct values marks the top 20") {
        std::vector<double> var(100);
        for (int i = 0; i < 100; ++i) var[i] = 0.001 * ((i * 37) % 100);
        auto sharp = detect_sharp_edges(var, 0.8);
        int count = 0;
        for (std::size_t i = 0; i < var.size(); ++i)
            if (sharp[i]) {
                ++count;
                CHECK(var[i] > 0.001 * 79);
            }
        CHECK(count == 20);
    }
    SUBCASE("constant variations mark nothing") {
        std::vector<double> var(50, 0.2);
        for (char s : detect_sharp_edges(var, 0.8)) CHECK(!s);
    }
    SUBCASE("eta=0.95 marks the top 5%") {
        std::vector<double> var(100);
        for (int i = 0; i < 100; ++i) var[i] = i;
        auto sharp = detect_sharp_edges(var, 0.95);
        int count = 0;
        for (std::size_t i = 0; i < var.size(); ++i)
            if (sharp[i]) {
                ++count;
                CHECK(i >= 95);
            }
        CHECK(count == 5);
    }
}

TEST_CASE("region_grow") {
    SUBCASE("two disconnected patches give two regions") {
        LabeledCloud lc;
        append_patch(lc, ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {0, 0, 0}),
                     TrimRegion(-1, 1, -1, 1), 300, 9);
        append_patch(lc, ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {0, 0, 5}),
                     TrimRegion(-1, 1, -1, 1), 300, 10);
        std::vector<char> sharp(lc.pts.size(), 0);
        auto regions = region_grow(lc.pts, build_neighbor_graph(lc.pts, 8), sharp, 1);
        REQUIRE(regions.size() == 2);
        for (const auto& r : regions)
            for (std::size_t j = 1; j < r.size(); ++j)
                CHECK((lc.pts[r[j]].z() < 2) == (lc.pts[r[0]].z() < 2));
    }
    SUBCASE("smooth sphere is one region") {
        auto sphere = ParametricPrimitive::make_sphere({0, 0, 0}, 1.0);
        auto pts = sample_surface(sphere, full_domain(PrimitiveKind::Sphere), 800, 11);
        std::vector<char> sharp(pts.size(), 0);
        auto regions = region_grow(pts, build_neighbor_graph(pts, 8), sharp, 2);
        CHECK(regions.size() == 1);
        CHECK(regions[0].size() == pts.size());
    }
    SUBCASE("cube with analytically marked edges gives six regions") {
        auto lc = cube_cloud(400);
        std::vector<char> sharp(lc.pts.size(), 0);
        for (std::size_t i = 0; i < lc.pts.size(); ++i) {
            Vec3 a = lc.pts[i].cwiseAbs();
            int at_face = 0;
            // near an edge = close to two faces at once; the band must be
            // wider than the neighbor radius, or the flood fill bridges the
            // 90-degree corner in 3-D
            if (a.x() > 0.40) ++at_face;
            if (a.y() > 0.40) ++at_face;
            if (a.z() > 0.40) ++at_face;
            sharp[i] = at_face >= 2;
        }
        auto regions = region_grow(lc.pts, build_neighbor_graph(lc.pts, 8), sharp, 3);
        CHECK(regions.size() == 6);
    }
    SUBCASE("regions partition the non-sharp points") {
        std::mt19937_64 rng(13);
        std::vector<Point3> pts;
        for (int i = 0; i < 400; ++i) pts.push_back(testutil::random_point(rng));
        std::vector<char> sharp(pts.size(), 0);
        for (int i = 0; i < 400; i += 7) sharp[i] = 1;
        auto regions = region_grow(pts, build_neighbor_graph(pts, 6), sharp, 4);
        std::vector<int> seen(pts.size(), 0);
        for (const auto& r : regions)
            for (int i : r) {
                CHECK(!sharp[i]);
                ++seen[i];
            }
        for (std::size_t i = 0; i < pts.size(); ++i) CHECK(seen[i] == (sharp[i] ? 0 : 1));
    }
}

TEST_CASE("slippage_analysis signatures per primitive") {
    auto plane = ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {0, 0, 0});
    auto r = slippage_of(plane, TrimRegion(-1, 1, -1, 1), 400, 21);
    CHECK(r.slippable == 3);
    CHECK(r.cls == InvarianceClass::Planar);

    auto sphere = ParametricPrimitive::make_sphere({0.3, 0, 0}, 0.8);
    r = slippage_of(sphere, full_domain(PrimitiveKind::Sphere), 400, 22);
    CHECK(r.slippable == 3);
    CHECK(r.cls == InvarianceClass::Spherical);

    auto cyl = ParametricPrimitive::make_cylinder({0, 0, 0}, {0, 0, 1}, 0.7);
    r = slippage_of(cyl, full_domain(PrimitiveKind::Cylinder), 400, 23);
    CHECK(r.slippable == 2);
    CHECK(r.cls == InvarianceClass::Cylindrical);

    auto cone = ParametricPrimitive::make_cone({0, 0, 0}, {0, 0, 1}, 0.8, 0.5);
    r = slippage_of(cone, TrimRegion(0, 2 * std::numbers::pi, 0.2, 1.0), 400, 24);
    CHECK(r.slippable == 1);
    CHECK(r.cls == InvarianceClass::Revolute);

    auto torus = ParametricPrimitive::make_torus({0, 0, 0}, {0, 0, 1}, 1.2, 0.4);
    r = slippage_of(torus, full_domain(PrimitiveKind::Torus), 500, 25);
    CHECK(r.slippable == 1);
    CHECK(r.cls == InvarianceClass::Revolute);

    SUBCASE("fewer than six points is an error") {
        std::vector<Point3> pts(5, Point3(0, 0, 0));
        std::vector<Vec3> nrm(5, Vec3(0, 0, 1));
        CHECK_THROWS(slippage_analysis(pts, nrm));
    }
    SUBCASE("eigenvalues ascend") {
        for (int j = 1; j < 6; ++j) CHECK(r.eigenvalues[j - 1] <= r.eigenvalues[j]);
    }
}

TEST_CASE("slippage classification is rigid-motion invariant") {
    std::mt19937_64 rng(27);
    for (PrimitiveKind kind : testutil::all_kinds()) {
        auto prim = testutil::random_primitive(kind, rng);
        auto pts = sample_surface(prim, full_domain(kind), 400, 31);
        std::vector<Vec3> normals;
        for (const auto& p : pts) normals.push_back(surface_normal_near(prim, p));
        auto base = slippage_analysis(pts, normals);

        // Translation preserves the centered covariance exactly.
        Vec3 t = testutil::random_point(rng, 5.0);
        std::vector<Point3> moved;
        for (const auto& p : pts) moved.push_back(p + t);
        auto shifted = slippage_analysis(moved, normals);
        for (int j = 0; j < 6; ++j)
            CHECK(shifted.eigenvalues[j] ==
                  doctest::Approx(base.eigenvalues[j]).epsilon(1e-6));
        CHECK(shifted.cls == base.cls);

        // Rotation changes the internal axis-aligned scaling but must not
        // change the slippable count or the class.
        Eigen::Matrix3d R =
            Eigen::AngleAxisd(0.9, testutil::random_unit(rng)).toRotationMatrix();
        std::vector<Point3> rot;
        std::vector<Vec3> rot_nrm;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            rot.push_back(R * pts[i]);
            rot_nrm.push_back(R * normals[i]);
        }
        auto rotated = slippage_analysis(rot, rot_nrm);
        CHECK(rotated.slippable == base.slippable);
        CHECK(rotated.cls == base.cls);
    }
}

TEST_CASE("refine_segment") {
    PgConfig cfg;

    SUBCASE("planar region passes through as one plane") {
        auto pts = plane_patch({1, 0, 0}, {0, 1, 0}, {0.5, 0, 1}, 300, 41);
        auto normals = estimate_normals(pts, 8);
        auto parts = refine_segment(pts, iota_indices(pts.size()), normals,
                                    InvarianceClass::Planar, cfg, bounding_box_diagonal(pts));
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].prim.kind() == PrimitiveKind::Plane);
        CHECK(parts[0].indices.size() == pts.size());
        CHECK(mean_fitting_error(pts, parts[0].indices, parts[0].prim) <= 1e-9);
    }
    SUBCASE("revolute torus patch prefers torus over cone") {
        auto torus = ParametricPrimitive::make_torus({0, 0, 0}, {0, 0, 1}, 1.5, 0.5);
        auto pts = sample_surface(torus, full_domain(PrimitiveKind::Torus), 600, 42);
        std::vector<Vec3> normals;
        for (const auto& p : pts) normals.push_back(surface_normal_near(torus, p));
        auto parts = refine_segment(pts, iota_indices(pts.size()), normals,
                                    InvarianceClass::Revolute, cfg, bounding_box_diagonal(pts));
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].prim.kind() == PrimitiveKind::Torus);
        CHECK(mean_fitting_error(pts, parts[0].indices, parts[0].prim) <= 1e-6);
    }
    SUBCASE("prismatic stadium profile splits into 2 planes and 2 cylinders") {
        LabeledCloud lc;
        // Extruded stadium: plane strips at y = +-1 for |x| <= 1, closed by
        // half-cylinders of radius 1 around (x, y) = (+-1, 0). Extrusion
        // along z in [-1, 1].
        append_patch(lc, ParametricPrimitive::make_plane({1, 0, 0}, {0, 0, 1}, {0, 1, 0}),
                     TrimRegion(-1, 1, -1, 1), 300, 43);
        append_patch(lc, ParametricPrimitive::make_plane({1, 0, 0}, {0, 0, 1}, {0, -1, 0}),
                     TrimRegion(-1, 1, -1, 1), 300, 44);
        for (double side : {1.0, -1.0}) {
            auto cyl = ParametricPrimitive::make_cylinder({side, 0, 0}, {0, 0, 1}, 1.0);
            auto all = sample_surface(cyl, full_domain(PrimitiveKind::Cylinder), 700, 45);
            std::vector<int> ids;
            for (const auto& p : all) {
                if (side * p.x() < side * side + 0.02) continue;  // keep the outer half
                ids.push_back(static_cast<int>(lc.pts.size()));
                lc.pts.push_back(p);
                lc.normals.push_back(surface_normal_near(cyl, p));
            }
            lc.gt.push_back(ids);
        }
        PgConfig pcfg;
        pcfg.min_segment_size = 60;
        pcfg.ransac_epsilon = 0.005;
        auto parts =
            refine_segment(lc.pts, iota_indices(lc.pts.size()), lc.normals,
                           InvarianceClass::Prismatic, pcfg, bounding_box_diagonal(lc.pts));
        REQUIRE(parts.size() == 4);
        std::map<PrimitiveKind, int> kinds;
        for (const auto& p : parts) kinds[p.prim.kind()]++;
        CHECK(kinds[PrimitiveKind::Plane] == 2);
        CHECK(kinds[PrimitiveKind::Cylinder] == 2);
    }
}

TEST_CASE("assign_sharp_points") {
    auto plane_a = ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {0, 0, 0});
    auto plane_b = ParametricPrimitive::make_plane({1, 0, 0}, {0, 1, 0}, {0, 0, 2});
    std::vector<Point3> cloud = {{0, 0, 0},    {1, 0, 0},   {0, 0, 2},
                                 {1, 0, 2},    {0, 0, 1},   {0, 0, 0.1},
                                 {0, 0, 1.9}};
    std::vector<PgPart> parts;
    parts.push_back({{0, 1}, plane_a});
    parts.push_back({{2, 3}, plane_b});
    auto seg = assign_sharp_points(std::move(parts), {4, 5, 6}, cloud);
    REQUIRE(seg.segments.size() == 2);
    CHECK(seg.cloud_size == 7);
    auto has = [](const Segment& s, int i) {
        return std::find(s.indices.begin(), s.indices.end(), i) != s.indices.end();
    };
    CHECK(has(seg.segments[0], 4));  // exactly equidistant: lower part index
    CHECK(has(seg.segments[0], 5));
    CHECK(has(seg.segments[1], 6));
    CHECK(seg.unsegmented().empty());

    SUBCASE("no parts leaves sharp points unsegmented") {
        auto empty = assign_sharp_points({}, {0, 1}, cloud);
        CHECK(empty.segments.empty());
        CHECK(empty.unsegmented().size() == cloud.size());
    }
}

TEST_CASE("fit_pg end to end") {
    PgConfig cfg;

    SUBCASE("single noise-free plane") {
        GeneratorSpec spec;
        spec.min_primitives = spec.max_primitives = 1;
        spec.cylinder_weight = spec.cone_weight = spec.sphere_weight = spec.torus_weight = 0;
        spec.min_points = spec.max_points = 400;
        auto m = generate_model(spec, 17);
        auto res = fit_pg(m.cloud, cfg);
        REQUIRE(res.segmentation.segments.size() == 1);
        REQUIRE(res.parametric.size() == 1);
        CHECK(res.parametric[0].kind() == PrimitiveKind::Plane);
        CHECK(res.implicit.size() == 1);
        CHECK(mean_fitting_error(m.cloud, res.segmentation.segments[0].indices,
                                 res.parametric[0]) <= 1e-6);
    }
    SUBCASE("cube splits into six planar faces") {
        // dense enough that the sharp-edge band (top 20% variation) is wider
        // than the k-neighbor radius, so region growing separates the faces
        auto lc = cube_cloud(1200);
        auto res = fit_pg(lc.pts, cfg);
        GroundTruthModel gt;
        gt.cloud = lc.pts;
        for (const auto& face : lc.gt) gt.segments.push_back({face});
        auto matches = match_segments(gt, res.segmentation);
        REQUIRE(res.segmentation.segments.size() == 6);
        for (std::size_t f = 0; f < 6; ++f) {
            REQUIRE(matches[f].has_value());
            auto c = confusion_counts(gt.segments[f].indices,
                                      res.segmentation.segments[*matches[f]].indices,
                                      static_cast<int>(lc.pts.size()));
            auto s = classification_scores(c);
            REQUIRE(s.dsc.has_value());
            CHECK(*s.dsc >= 0.95);
            CHECK(res.parametric[*matches[f]].kind() == PrimitiveKind::Plane);
        }
    }
    SUBCASE("sphere above a plane") {
        LabeledCloud lc;
        append_patch(lc, ParametricPrimitive::make_plane({2, 0, 0}, {0, 2, 0}, {0, 0, 0}),
                     TrimRegion(-1, 1, -1, 1), 500, 51);
        append_patch(lc, ParametricPrimitive::make_sphere({0, 0, 1.5}, 0.5),
                     full_domain(PrimitiveKind::Sphere), 500, 52);
        auto res = fit_pg(lc.pts, cfg);
        REQUIRE(res.segmentation.segments.size() == 2);
        std::map<PrimitiveKind, int> kinds;
        for (const auto& p : res.parametric) kinds[p.kind()]++;
        CHECK(kinds[PrimitiveKind::Plane] == 1);
        CHECK(kinds[PrimitiveKind::Sphere] == 1);
    }
    SUBCASE("segments are disjoint and within the cloud") {
        auto lc = cube_cloud(150);
        auto res = fit_pg(lc.pts, cfg);
        std::vector<int> seen(lc.pts.size(), 0);
        for (const auto& s : res.segmentation.segments)
            for (int i : s.indices) {
                REQUIRE(i >= 0);
                REQUIRE(i < static_cast<int>(lc.pts.size()));
                CHECK(++seen[i] == 1);
            }
        CHECK(res.parametric.size() == res.segmentation.segments.size());
        CHECK(res.implicit.size() == res.segmentation.segments.size());
    }
}

TEST_CASE("pg_config_from_json") {
    auto cfg = pg_config_from_json(R"({"k": 12, "eta": 0.7, "seed": 9})");
    CHECK(cfg.k == 12);
    CHECK(cfg.eta == 0.7);
    CHECK(cfg.seed == 9);
    CHECK(cfg.min_segment_size == 20);  // untouched default
    CHECK_THROWS(pg_config_from_json(R"({"bogus": 1})"));
    CHECK_THROWS(pg_config_from_json(R"({"eta": 1.5})"));
    CHECK_THROWS(pg_config_from_json(R"({"k": 1})"));
    CHECK_THROWS(pg_config_from_json("[]"));
}
