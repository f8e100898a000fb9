// Acceptance checks. Each criterion prints one PASS/FAIL line; the process
// exits nonzero if any criterion fails.

#include "fit4cad/dataset.hpp"
#include "fit4cad/fit_ht.hpp"
#include "fit4cad/fit_pg.hpp"
#include "fit4cad/knn.hpp"
#include "fit4cad/metrics.hpp"
#include "helpers.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <set>
#include <thread>

using namespace fit4cad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class F>
void parallel_for(int n, F f) {
    int workers = std::min(n, std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                f(i);
            }
        });
    for (auto& t : pool) t.join();
}

struct Failures {
    std::atomic<int> count{0};
    std::mutex mu;

    void expect(bool ok, const char* what) {
        if (ok) return;
        int n = count.fetch_add(1);
        if (n < 10) {
            std::lock_guard<std::mutex> lock(mu);
            std::fprintf(stderr, "    failed: %s\n", what);
        }
    }
    bool ok() const { return count.load() == 0; }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

bool criterion1_implicit_roundtrip() {
    auto t0 = Clock::now();
    Failures f;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> uu(0.0, 1.0);
    for (PrimitiveKind kind : testutil::all_kinds())
        for (int trial = 0; trial < 100; ++trial) {
            auto prim = testutil::random_primitive(kind, rng);
            auto impl = parametric_to_implicit(prim);
            TrimRegion trim = full_domain(kind);
            for (int q = 0; q < 100; ++q) {
                double u = trim.u_min + uu(rng) * (trim.u_max - trim.u_min);
                double v = trim.v_min + uu(rng) * (trim.v_max - trim.v_min);
                Point3 p = eval_parametric(prim, u, v);
                f.expect(std::abs(eval_implicit(impl, p)) <= 1e-9,
                         "implicit residual above 1e-9 at an on-surface point");
            }
        }
    f.expect(seconds_since(t0) < 10.0, "round-trip suite exceeded 10 s");
    return f.ok();
}

bool criterion2_distance_oracle() {
    auto t0 = Clock::now();
    Failures f;
    auto kinds = testutil::all_kinds();
    parallel_for(static_cast<int>(kinds.size()), [&](int ki) {
        PrimitiveKind kind = kinds[ki];
        std::mt19937_64 rng(200 + ki);
        std::uniform_real_distribution<double> uu(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            auto prim = testutil::random_primitive(kind, rng);
            TrimRegion trim = full_domain(kind, 2.0);
            // the oracle scans a larger patch: a query displaced off an open
            // surface can have its nearest point slightly outside `trim`
            TrimRegion oracle_trim = full_domain(kind, 3.0);
            if (kind == PrimitiveKind::Cone) {
                // v = 0 is the base circle, not the apex: the surface extends
                // down to the apex at v = -1/kappa, so the oracle must too
                double kappa = prim.block(2).norm() / prim.block(0).norm();
                oracle_trim = TrimRegion(0.0, 2.0 * M_PI, -1.0 / kappa, 3.0);
            }
            auto samples = sample_surface(prim, trim, 200, 9000 + trial);
            double scale = bounding_box_diagonal(samples);
            for (int q = 0; q < 20; ++q) {
                // query near the middle of the trimmed patch so the trimmed
                // oracle always covers the true nearest point
                double u = trim.u_min + (0.25 + 0.5 * uu(rng)) * (trim.u_max - trim.u_min);
                double v = trim.v_min + (0.25 + 0.5 * uu(rng)) * (trim.v_max - trim.v_min);
                Point3 query = eval_parametric(prim, u, v) +
                               (0.1 * scale * uu(rng)) * testutil::random_unit(rng);
                double fast = distance_to_surface(prim, query);
                double slow = testutil::brute_force_distance(prim, oracle_trim, query, 40000);
                f.expect(std::abs(fast - slow) <= 1e-3 * scale,
                         "distance_to_surface disagrees with the brute-force oracle");
            }
        }
    });
    f.expect(seconds_since(t0) < 60.0, "distance oracle suite exceeded 60 s");
    return f.ok();
}

bool criterion3_metric_identities() {
    Failures f;
    std::mt19937_64 rng(301);
    std::uniform_int_distribution<int> tot(1, 200);
    std::uniform_int_distribution<int> coin(0, 2);
    for (int trial = 0; trial < 10000; ++trial) {
        int total = tot(rng);
        std::vector<int> pb, ps;
        long long tp = 0, fp = 0, fn = 0, tn = 0;
        for (int i = 0; i < total; ++i) {
            bool in_b = coin(rng) == 0, in_s = coin(rng) == 0;
            if (in_b) pb.push_back(i);
            if (in_s) ps.push_back(i);
            if (in_b && in_s)
                ++tp;
            else if (in_s)
                ++fp;
            else if (in_b)
                ++fn;
            else
                ++tn;
        }
        auto c = confusion_counts(pb, ps, total);
        f.expect(c.tp == tp && c.fp == fp && c.fn == fn && c.tn == tn,
                 "confusion counts disagree with direct counting");
        auto s = classification_scores(c);
        auto same = [&](const std::optional<double>& got, long long num, long long den) {
            if (den == 0) return !got.has_value();
            return got.has_value() && *got == static_cast<double>(num) / den;
        };
        f.expect(same(s.tpr, tp, tp + fn), "TPR mismatch");
        f.expect(same(s.tnr, tn, tn + fp), "TNR mismatch");
        f.expect(same(s.ppv, tp, tp + fp), "PPV mismatch");
        f.expect(same(s.npv, tn, tn + fn), "NPV mismatch");
        f.expect(same(s.acc, tp + tn, total), "ACC mismatch");
        f.expect(same(s.dsc, 2 * tp, 2 * tp + fp + fn), "DSC count-form mismatch");
        // set form: 2|A n B| / (|A| + |B|)
        if (!pb.empty() || !ps.empty())
            f.expect(s.dsc.has_value() &&
                         *s.dsc == 2.0 * tp / static_cast<double>(pb.size() + ps.size()),
                     "DSC set-form mismatch");
    }
    return f.ok();
}

bool criterion4_slippage_signatures() {
    Failures f;
    std::mt19937_64 rng(401);
    auto signature = [&](const std::vector<Point3>& pts, const std::vector<Vec3>& nrm) {
        return slippage_analysis(pts, nrm).slippable;
    };
    for (int trial = 0; trial < 20; ++trial) {
        for (PrimitiveKind kind : testutil::all_kinds()) {
            auto prim = testutil::random_primitive(kind, rng);
            auto pts = sample_surface(prim, full_domain(kind), 400, 4000 + trial);
            std::vector<Vec3> nrm;
            for (const auto& p : pts) nrm.push_back(surface_normal_near(prim, p));
            int s = signature(pts, nrm);
            int want = 0;
            switch (kind) {
                case PrimitiveKind::Plane:
                case PrimitiveKind::Sphere: want = 3; break;
                case PrimitiveKind::Cylinder: want = 2; break;
                case PrimitiveKind::Cone:
                case PrimitiveKind::Torus: want = 1; break;
            }
            f.expect(s == want, "primitive slippable-motion count wrong");
        }
        // generic freeform blob: a triaxial ellipsoid admits no slippable
        // motion
        std::uniform_real_distribution<double> ax(0.4, 2.0);
        double a = ax(rng), b = a + 0.4 + ax(rng), c = b + 0.4 + ax(rng);
        auto sphere = ParametricPrimitive::make_sphere({0, 0, 0}, 1.0);
        auto base = sample_surface(sphere, full_domain(PrimitiveKind::Sphere), 400,
                                   5000 + trial);
        std::vector<Point3> pts;
        std::vector<Vec3> nrm;
        for (const auto& p : base) {
            Vec3 q(a * p.x(), b * p.y(), c * p.z());
            pts.push_back(q);
            nrm.push_back(Vec3(q.x() / (a * a), q.y() / (b * b), q.z() / (c * c)).normalized());
        }
        f.expect(signature(pts, nrm) == 0, "freeform blob should not be slippable");
    }
    return f.ok();
}

bool criterion5_persistence_oracle() {
    Failures f;
    std::mt19937_64 rng(501);
    std::uniform_int_distribution<int> len(1, 64);
    std::uniform_int_distribution<int> side(1, 10);
    std::uniform_int_distribution<int> level(0, 6);
    std::uniform_real_distribution<double> real(0.0, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> shape;
        if (trial % 2)
            shape = {len(rng)};
        else
            shape = {side(rng), side(rng)};
        int cells = 1;
        for (int s : shape) cells *= s;
        std::vector<double> values(cells);
        bool quantized = trial % 3 != 0;
        for (double& v : values) v = quantized ? double(level(rng)) : real(rng);

        auto got = grid_persistence(values, shape);
        auto want = testutil::brute_force_persistence(values, shape);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i)
            same = got[i].cell == want[i].cell &&
                   std::abs(got[i].height - want[i].height) <= 1e-12 &&
                   std::abs(got[i].persistence - want[i].persistence) <= 1e-12;
        f.expect(same, "grid_persistence disagrees with the flood-fill oracle");

        double vmax = 0;
        for (double v : values) vmax = std::max(vmax, v);
        std::vector<GridPeak> filtered;
        if (vmax > 0.0)  // an all-zero grid keeps nothing
            for (const auto& p : want)
                if ((p.persistence == p.height && p.height == vmax) ||
                    p.persistence > 0.1 * vmax)
                    filtered.push_back(p);
        auto kept = persistent_maxima(values, shape, 0.1);
        bool same2 = kept.size() == filtered.size();
        for (std::size_t i = 0; same2 && i < kept.size(); ++i)
            same2 = kept[i].cell == filtered[i].cell;
        f.expect(same2, "persistent_maxima filter disagrees with the oracle");
    }
    return f.ok();
}

// Shared state for criteria 6-8.
struct DeskModels {
    std::vector<GroundTruthModel> models;
    double ht_median_dsc = -1.0;
};

std::vector<GroundTruthModel> generate_desk_models() {
    std::vector<GroundTruthModel> models(20);
    parallel_for(20, [&](int i) {
        GeneratorSpec spec;  // defaults: 5-15 primitives, 8k-12k points
        models[i] = generate_model(spec, 2000 + static_cast<std::uint64_t>(i));
    });
    return models;
}

double model_mean_dsc(const GroundTruthModel& gt, const Segmentation& pred) {
    auto row = model_report("m", gt, pred);
    return row.dsc.value_or(0.0);
}

bool criterion6_ht_recovery(DeskModels& shared) {
    auto t0 = Clock::now();
    Failures f;
    std::vector<double> dsc(shared.models.size(), 0.0);
    parallel_for(static_cast<int>(shared.models.size()), [&](int i) {
        const GroundTruthModel& gt = shared.models[i];
        HtConfig cfg;
        HtResult res = fit_ht(gt.cloud, cfg);
        dsc[i] = model_mean_dsc(gt, res.segmentation);
        for (std::size_t s = 0; s < res.segmentation.segments.size(); ++s) {
            const auto& idx = res.segmentation.segments[s].indices;
            if (idx.empty()) continue;
            f.expect(mean_fitting_error(gt.cloud, idx, res.parametric[s]) <= 0.007,
                     "recovered segment MFE above 0.007");
        }
    });
    shared.ht_median_dsc = median(dsc);
    std::fprintf(stderr, "  [6] HT median per-model mean DSC = %.3f, %.0f s\n",
                 shared.ht_median_dsc, seconds_since(t0));
    f.expect(shared.ht_median_dsc >= 0.85, "HT median DSC below 0.85");
    f.expect(seconds_since(t0) < 900.0, "HT suite exceeded 15 min");
    return f.ok();
}

bool criterion7_pg_recovery(const DeskModels& shared) {
    auto t0 = Clock::now();
    Failures f;
    std::vector<double> dsc(shared.models.size(), 0.0);
    parallel_for(static_cast<int>(shared.models.size()), [&](int i) {
        const GroundTruthModel& gt = shared.models[i];
        PgConfig cfg;
        PgResult res = fit_pg(gt.cloud, cfg);
        dsc[i] = model_mean_dsc(gt, res.segmentation);
    });
    double med = median(dsc);
    std::fprintf(stderr, "  [7] PG median per-model mean DSC = %.3f, %.0f s\n", med,
                 seconds_since(t0));
    f.expect(med >= 0.55, "PG median DSC below 0.55");
    f.expect(seconds_since(t0) < 900.0, "PG suite exceeded 15 min");
    return f.ok();
}

bool criterion8_missing_data(const DeskModels& shared) {
    auto t0 = Clock::now();
    Failures f;
    std::vector<double> dsc(shared.models.size(), 0.0);
    parallel_for(static_cast<int>(shared.models.size()), [&](int i) {
        double diag = bounding_box_diagonal(shared.models[i].cloud);
        GroundTruthModel holed =
            simulate_missing_data(shared.models[i], 1, 0.05 * diag, 8000 + i);
        HtConfig cfg;
        HtResult res = fit_ht(holed.cloud, cfg);
        dsc[i] = model_mean_dsc(holed, res.segmentation);
    });
    double med = median(dsc);
    std::fprintf(stderr, "  [8] HT-with-hole median DSC = %.3f (clean %.3f), %.0f s\n", med,
                 shared.ht_median_dsc, seconds_since(t0));
    f.expect(shared.ht_median_dsc - med < 0.10, "missing-data DSC degradation >= 0.10");
    return f.ok();
}

bool criterion9_format_roundtrip() {
    Failures f;
    f.expect(format_segment_line(6, {4, 9, 184, 185, 186, 187, 188, 189, 190, 191, 192}) ==
                 "Primitive6:=[4 9 184 185 186 187 188 189 190 191 192]",
             "File 2 statement grammar mismatch");
    f.expect(format_primitive_line(1, PrimitiveKind::Plane, {0, 0, 1, 1, 0, 0, 0, 1, 0}) ==
                 "Primitive1:=[Plane, [0 0 1 1 0 0 0 1 0]]",
             "File 3 statement grammar mismatch");

    fs::path dir = fs::temp_directory_path() / "fit4cad_acceptance_fmt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 seeds(901);
    for (int i = 0; i < 50; ++i) {
        GeneratorSpec spec;
        spec.min_points = 200;
        spec.max_points = 400;
        GroundTruthModel m = generate_model(spec, 9000 + static_cast<std::uint64_t>(i));
        fs::path mdir = dir / ("m" + std::to_string(i));
        write_ground_truth(m, mdir);
        GroundTruthModel r = read_ground_truth(mdir);
        bool same = r.cloud.size() == m.cloud.size() && r.segments.size() == m.segments.size();
        for (std::size_t p = 0; same && p < m.cloud.size(); ++p)
            same = (r.cloud[p] - m.cloud[p]).cwiseAbs().maxCoeff() <= 1e-9;
        for (std::size_t s = 0; same && s < m.segments.size(); ++s)
            same = r.segments[s].indices == m.segments[s].indices;
        for (std::size_t s = 0; same && s < m.parametric.size(); ++s) {
            same = r.parametric[s].kind() == m.parametric[s].kind();
            for (std::size_t j = 0; same && j < m.parametric[s].params().size(); ++j)
                same = std::abs(r.parametric[s].params()[j] - m.parametric[s].params()[j]) <=
                       1e-9;
        }
        f.expect(same, "write/read round trip not lossless to 1e-9");
    }
    fs::remove_all(dir);
    return f.ok();
}

bool criterion10_knn_equivalence() {
    Failures f;
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> size(2, 2000);
    std::uniform_int_distribution<int> kk(1, 24);
    for (int trial = 0; trial < 100; ++trial) {
        int n = size(rng);
        std::vector<Point3> pts;
        for (int i = 0; i < n; ++i) pts.push_back(testutil::random_point(rng, 2.0));
        for (int d = 0; d < n / 20; ++d) pts[d] = pts[n - 1 - d];  // exercise ties
        KdTree tree(pts);
        int k = std::min(kk(rng), n - 1);
        for (int q = 0; q < 10; ++q) {
            Point3 query = testutil::random_point(rng, 2.5);
            f.expect(tree.query(query, k) == knn_exhaustive(pts, query, k),
                     "kd-tree query differs from the exhaustive scan");
        }
        for (int q = 0; q < 5; ++q) {
            int i = static_cast<int>(rng() % n);
            f.expect(tree.query_point(i, k) == knn_exhaustive(pts, pts[i], k, i),
                     "kd-tree self-query differs from the exhaustive scan");
        }
    }
    return f.ok();
}

}  // namespace

int main() {
    bool all = true;
    auto report = [&](int k, bool ok) {
        std::printf("CRITERION %d: %s\n", k, ok ? "PASS" : "FAIL");
        std::fflush(stdout);
        all = all && ok;
    };

    report(1, criterion1_implicit_roundtrip());
    report(2, criterion2_distance_oracle());
    report(3, criterion3_metric_identities());
    report(4, criterion4_slippage_signatures());
    report(5, criterion5_persistence_oracle());

    DeskModels shared;
    shared.models = generate_desk_models();
    report(6, criterion6_ht_recovery(shared));
    report(7, criterion7_pg_recovery(shared));
    report(8, criterion8_missing_data(shared));

    report(9, criterion9_format_roundtrip());
    report(10, criterion10_knn_equivalence());
    return all ? 0 : 1;
}
