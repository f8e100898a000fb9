#include "fit4cad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fit4cad {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    // Shoemake's uniform random quaternion.
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u1 = uni(rng), u2 = uni(rng), u3 = uni(rng);
    double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
    Eigen::Quaterniond q(s1 * std::sin(2 * M_PI * u2), s1 * std::cos(2 * M_PI * u2),
                         s2 * std::sin(2 * M_PI * u3), s2 * std::cos(2 * M_PI * u3));
    return q.normalized().toRotationMatrix();
}

struct Patch {
    ParametricPrimitive prim;
    TrimRegion trim;
};

double patch_area(const Patch& patch) {
    constexpr int kGrid = 12;
    const TrimRegion& t = patch.trim;
    double du_step = (t.u_max - t.u_min) / kGrid;
    double dv_step = (t.v_max - t.v_min) / kGrid;
    double area = 0.0;
    for (int i = 0; i < kGrid; ++i)
        for (int j = 0; j < kGrid; ++j) {
            double u = t.u_min + (i + 0.5) * du_step;
            double v = t.v_min + (j + 0.5) * dv_step;
            Vec3 du, dv;
            eval_parametric_derivatives(patch.prim, u, v, du, dv);
            area += du.cross(dv).norm() * du_step * dv_step;
        }
    return area;
}

Patch rectangle_patch(const Vec3& dir_u, const Vec3& dir_v, const Vec3& center) {
    return {ParametricPrimitive::make_plane(dir_u, dir_v, center), TrimRegion(-1, 1, -1, 1)};
}

// Feature templates emit patches in a local frame around the origin,
// fitting inside a ball of radius ~1.5.
std::vector<Patch> feature_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ext(0.45, 0.9);
    double hx = ext(rng), hy = ext(rng), hz = ext(rng);
    Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
    return {
        rectangle_patch(hx * x, hy * y, hz * z),  rectangle_patch(hx * x, hy * y, -hz * z),
        rectangle_patch(hy * y, hz * z, hx * x),  rectangle_patch(hy * y, hz * z, -hx * x),
        rectangle_patch(hz * z, hx * x, hy * y),  rectangle_patch(hz * z, hx * x, -hy * y),
    };
}

std::vector<Patch> feature_capped_cylinder(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rr(0.35, 0.7), hh(0.5, 0.9);
    double r = rr(rng), h = hh(rng);
    auto lateral = ParametricPrimitive::make_cylinder(Vec3::Zero(), Vec3::UnitZ(), r);
    double cap = r * 0.72;  // caps stay inside the rim
    return {
        {lateral, TrimRegion(0, 2 * M_PI, -h, h)},
        rectangle_patch(cap * Vec3::UnitX(), cap * Vec3::UnitY(), h * Vec3::UnitZ()),
        rectangle_patch(cap * Vec3::UnitX(), cap * Vec3::UnitY(), -h * Vec3::UnitZ()),
    };
}

std::vector<Patch> feature_cone_frustum(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rr(0.2, 0.35), aa(0.35, 0.6), ll(0.8, 1.2);
    double r0 = rr(rng), alpha = aa(rng), len = ll(rng);
    auto lateral = ParametricPrimitive::make_cone(Vec3::Zero(), Vec3::UnitZ(), r0, alpha);
    // Wide-end cap at the top of the frustum.
    double v1 = len;
    double r1 = r0 + std::sin(alpha) * v1;
    double z1 = std::cos(alpha) * v1;
    double cap = r1 * 0.72;
    return {
        {lateral, TrimRegion(0, 2 * M_PI, 0, v1)},
        rectangle_patch(cap * Vec3::UnitX(), cap * Vec3::UnitY(), z1 * Vec3::UnitZ()),
    };
}

std::vector<Patch> feature_sphere(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> rr(0.4, 0.8);
    auto s = ParametricPrimitive::make_sphere(Vec3::Zero(), rr(rng));
    return {{s, full_domain(PrimitiveKind::Sphere)}};
}

std::vector<Patch> feature_torus(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> RR(0.5, 0.8), rr(0.15, 0.3);
    auto t = ParametricPrimitive::make_torus(Vec3::Zero(), Vec3::UnitZ(), RR(rng), rr(rng));
    return {{t, full_domain(PrimitiveKind::Torus)}};
}

std::vector<Patch> feature_plane(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ext(0.6, 1.0);
    return {rectangle_patch(ext(rng) * Vec3::UnitX(), ext(rng) * Vec3::UnitY(), Vec3::Zero())};
}

struct Template {
    std::vector<Patch> (*build)(std::mt19937_64&);
    int patch_count;
    double GeneratorSpec::*weight;
};

const Template kTemplates[] = {
    {feature_box, 6, &GeneratorSpec::plane_weight},
    {feature_capped_cylinder, 3, &GeneratorSpec::cylinder_weight},
    {feature_cone_frustum, 2, &GeneratorSpec::cone_weight},
    {feature_sphere, 1, &GeneratorSpec::sphere_weight},
    {feature_torus, 1, &GeneratorSpec::torus_weight},
    {feature_plane, 1, &GeneratorSpec::plane_weight},
};

}  // namespace

std::vector<int> Segmentation::unsegmented() const {
    std::vector<bool> claimed(cloud_size, false);
    for (const Segment& s : segments)
        for (int i : s.indices) claimed[i] = true;
    std::vector<int> out;
    for (int i = 0; i < cloud_size; ++i)
        if (!claimed[i]) out.push_back(i);
    return out;
}

void GroundTruthModel::validate() const {
    const int n = static_cast<int>(cloud.size());
    for (const Segment& s : segments) {
        std::vector<int> sorted = s.indices;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("segment contains duplicate indices");
        if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= n))
            throw std::invalid_argument("segment index out of range");
    }
    if (!parametric.empty() && parametric.size() != segments.size())
        throw std::invalid_argument("parametric forms do not match segment count");
    if (!implicit.empty() && implicit.size() != segments.size())
        throw std::invalid_argument("implicit forms do not match segment count");
}

void GeneratorSpec::validate() const {
    if (min_primitives < 1 || max_primitives < min_primitives)
        throw std::invalid_argument("invalid primitive count range");
    if (min_points < 1 || max_points < min_points)
        throw std::invalid_argument("invalid point count range");
    double wsum = plane_weight + cylinder_weight + cone_weight + sphere_weight + torus_weight;
    if (wsum <= 0.0) throw std::invalid_argument("all kind weights are zero");
    if (noise_sigma < 0.0 || noise_sigma > 1.0)
        throw std::invalid_argument("noise sigma out of [0,1]");
    if (hole_count < 0 || hole_radius <= 0.0) throw std::invalid_argument("invalid hole spec");
}

GroundTruthModel generate_model(const GeneratorSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);

    std::uniform_int_distribution<int> prim_count(spec.min_primitives, spec.max_primitives);
    std::uniform_int_distribution<int> pt_count(spec.min_points, spec.max_points);
    const int target = prim_count(rng);
    const int total_points = pt_count(rng);

    // Draw features (groups of patches) until the primitive budget is full.
    std::vector<std::vector<Patch>> features;
    int drawn = 0;
    while (drawn < target) {
        int remaining = target - drawn;
        std::vector<double> weights;
        for (const Template& t : kTemplates)
            weights.push_back(t.patch_count <= remaining ? spec.*(t.weight) : 0.0);
        if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) break;
        std::discrete_distribution<int> pick(weights.begin(), weights.end());
        features.push_back(kTemplates[pick(rng)].build(rng));
        drawn += static_cast<int>(features.back().size());
    }
    if (features.empty()) throw std::invalid_argument("generator spec yields no primitives");

    // Each feature occupies one cell of a cubic grid; the spacing keeps the
    // inlier bands of distinct features apart.
    const double spacing = 4.5;
    int side = 1;
    while (side * side * side < static_cast<int>(features.size())) ++side;
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);

    std::vector<Patch> patches;
    for (std::size_t f = 0; f < features.size(); ++f) {
        int gx = static_cast<int>(f) % side;
        int gy = (static_cast<int>(f) / side) % side;
        int gz = static_cast<int>(f) / (side * side);
        Vec3 cell_center = spacing * Vec3(gx, gy, gz);
        Vec3 t = cell_center + Vec3(jitter(rng), jitter(rng), jitter(rng));
        Eigen::Matrix3d R = random_rotation(rng);
        for (const Patch& p : features[f])
            patches.push_back({transform_primitive(p.prim, R, t), p.trim});
    }

    // Per-patch point budgets proportional to area.
    std::vector<double> areas;
    double total_area = 0.0;
    for (const Patch& p : patches) {
        areas.push_back(patch_area(p));
        total_area += areas.back();
    }
    constexpr int kMinPointsPerPatch = 50;

    // Exact largest-remainder allocation on top of the per-patch floor: the
    // cloud size equals the drawn total unless the floor forces an overshoot.
    const int n_patches = static_cast<int>(patches.size());
    std::vector<int> budgets(patches.size(), kMinPointsPerPatch);
    int spare = total_points - kMinPointsPerPatch * n_patches;
    if (spare > 0) {
        std::vector<double> fractions(patches.size());
        int assigned = 0;
        for (std::size_t i = 0; i < patches.size(); ++i) {
            double share = spare * areas[i] / total_area;
            int whole = static_cast<int>(share);
            budgets[i] += whole;
            fractions[i] = share - whole;
            assigned += whole;
        }
        std::vector<int> order(patches.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (fractions[a] != fractions[b]) return fractions[a] > fractions[b];
            return a < b;
        });
        for (int k = 0; k < spare - assigned; ++k) ++budgets[order[k]];
    }

    GroundTruthModel model;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        int budget = budgets[i];
        std::uint64_t patch_seed = seed * 1000003ull + i + 1;
        auto pts = sample_surface(patches[i].prim, patches[i].trim, budget, patch_seed);
        Segment seg;
        seg.indices.reserve(pts.size());
        for (const Point3& q : pts) {
            seg.indices.push_back(static_cast<int>(model.cloud.size()));
            model.cloud.push_back(q);
        }
        model.segments.push_back(std::move(seg));
        model.parametric.push_back(patches[i].prim);
        model.implicit.push_back(parametric_to_implicit(patches[i].prim));
    }

    if (spec.noise_sigma > 0.0) {
        double sigma = spec.noise_sigma * bounding_box_diagonal(model.cloud);
        std::normal_distribution<double> noise(0.0, sigma);
        for (std::size_t s = 0; s < model.segments.size(); ++s)
            for (int idx : model.segments[s].indices) {
                Vec3 n = surface_normal_near(model.parametric[s], model.cloud[idx]);
                model.cloud[idx] += noise(rng) * n;
            }
    }

    if (spec.hole_count > 0) {
        double radius = spec.hole_radius * bounding_box_diagonal(model.cloud);
        model = simulate_missing_data(model, spec.hole_count, radius, seed ^ 0x9e3779b97f4a7c15ull);
    }

    model.validate();
    return model;
}

GroundTruthModel simulate_missing_data(const GroundTruthModel& m, int hole_count,
                                       double hole_radius, std::uint64_t seed) {
    if (hole_radius <= 0.0) throw std::invalid_argument("hole radius must be positive");
    if (hole_count == 0) return m;
    if (m.cloud.empty()) throw std::invalid_argument("empty cloud");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(m.cloud.size()) - 1);
    std::vector<Point3> centers;
    for (int h = 0; h < hole_count; ++h) centers.push_back(m.cloud[pick(rng)]);

    std::vector<int> remap(m.cloud.size(), -1);
    GroundTruthModel out;
    for (std::size_t i = 0; i < m.cloud.size(); ++i) {
        bool inside = false;
        for (const Point3& c : centers)
            if ((m.cloud[i] - c).norm() <= hole_radius) {
                inside = true;
                break;
            }
        if (!inside) {
            remap[i] = static_cast<int>(out.cloud.size());
            out.cloud.push_back(m.cloud[i]);
        }
    }
    if (out.cloud.empty()) throw std::invalid_argument("missing-data holes removed every point");

    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        Segment seg;
        for (int idx : m.segments[s].indices)
            if (remap[idx] >= 0) seg.indices.push_back(remap[idx]);
        if (seg.indices.empty()) continue;
        out.segments.push_back(std::move(seg));
        if (!m.parametric.empty()) out.parametric.push_back(m.parametric[s]);
        if (!m.implicit.empty()) out.implicit.push_back(m.implicit[s]);
    }
    out.validate();
    return out;
}

std::string format_segment_line(int number, const std::vector<int>& indices) {
    std::ostringstream os;
    os << "Primitive" << number << ":=[";
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i) os << ' ';
        os << indices[i];
    }
    os << ']';
    return os.str();
}

std::string format_primitive_line(int number, PrimitiveKind kind,
                                  const std::vector<double>& values) {
    std::ostringstream os;
    os << "Primitive" << number << ":=[" << kind_name(kind) << ", [";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ' ';
        os << format_double(values[i]);
    }
    os << "]]";
    return os.str();
}

void write_ground_truth(const GroundTruthModel& m, const std::filesystem::path& dir) {
    m.validate();
    std::filesystem::create_directories(dir);

    {
        std::ofstream f(dir / "points.txt");
        if (!f) throw std::runtime_error("cannot write " + (dir / "points.txt").string());
        for (const Point3& q : m.cloud)
            f << format_double(q.x()) << ' ' << format_double(q.y()) << ' '
              << format_double(q.z()) << '\n';
    }
    {
        std::ofstream f(dir / "segments.txt");
        if (!f) throw std::runtime_error("cannot write " + (dir / "segments.txt").string());
        for (std::size_t s = 0; s < m.segments.size(); ++s)
            f << format_segment_line(static_cast<int>(s) + 1, m.segments[s].indices) << '\n';
    }
    if (!m.parametric.empty()) {
        std::ofstream f(dir / "parametric.txt");
        if (!f) throw std::runtime_error("cannot write " + (dir / "parametric.txt").string());
        for (std::size_t s = 0; s < m.parametric.size(); ++s)
            f << format_primitive_line(static_cast<int>(s) + 1, m.parametric[s].kind(),
                                       m.parametric[s].params())
              << '\n';
    }
    if (!m.implicit.empty()) {
        std::ofstream f(dir / "implicit.txt");
        if (!f) throw std::runtime_error("cannot write " + (dir / "implicit.txt").string());
        for (std::size_t s = 0; s < m.implicit.size(); ++s)
            f << format_primitive_line(static_cast<int>(s) + 1, m.implicit[s].kind(),
                                       m.implicit[s].coeffs())
              << '\n';
    }
}

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& file, int line, const std::string& why) {
    throw std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + why);
}

// "PrimitiveK:=[<payload>]" -> payload
std::string statement_payload(const std::string& line, const std::filesystem::path& file,
                              int line_no) {
    auto assign = line.find(":=[");
    if (line.rfind("Primitive", 0) != 0 || assign == std::string::npos || line.back() != ']')
        parse_fail(file, line_no, "expected 'PrimitiveK:=[...]'");
    return line.substr(assign + 3, line.size() - assign - 4);
}

}  // namespace

namespace {

using PrimitiveStatement = std::pair<PrimitiveKind, std::vector<double>>;

std::vector<PrimitiveStatement> read_primitive_file(const std::filesystem::path& path,
                                                    bool required) {
    std::vector<PrimitiveStatement> out;
    std::ifstream f(path);
    if (!f) {
        if (required) throw std::runtime_error("cannot open " + path.string());
        return out;
    }
    int no = 0;
    std::string ln;
    while (std::getline(f, ln)) {
        ++no;
        if (ln.empty()) continue;
        std::string payload = statement_payload(ln, path, no);
        auto comma = payload.find(',');
        if (comma == std::string::npos || payload.find('[', comma) == std::string::npos)
            parse_fail(path, no, "expected '[Kind, [values]]'");
        PrimitiveKind kind;
        try {
            kind = kind_from_name(payload.substr(0, comma));
        } catch (const std::exception& e) {
            parse_fail(path, no, e.what());
        }
        auto open = payload.find('[', comma);
        auto close = payload.rfind(']');
        if (close == std::string::npos || close <= open)
            parse_fail(path, no, "unterminated value list");
        std::istringstream is(payload.substr(open + 1, close - open - 1));
        std::vector<double> values;
        double v;
        while (is >> v) values.push_back(v);
        out.emplace_back(kind, std::move(values));
    }
    return out;
}

}  // namespace

std::vector<Segment> read_segment_file(const std::filesystem::path& file, int cloud_size,
                                       int index_base) {
    std::ifstream sf(file);
    if (!sf) throw std::runtime_error("cannot open " + file.string());
    std::vector<Segment> segments;
    std::string line;
    int line_no = 0;
    while (std::getline(sf, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(statement_payload(line, file, line_no));
        Segment seg;
        int idx;
        while (is >> idx) {
            idx -= index_base;
            if (idx < 0 || idx >= cloud_size)
                parse_fail(file, line_no, "point index out of range");
            seg.indices.push_back(idx);
        }
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::vector<ParametricPrimitive> read_parametric_file(const std::filesystem::path& file) {
    std::vector<ParametricPrimitive> out;
    for (auto& [kind, values] : read_primitive_file(file, true))
        out.emplace_back(kind, std::move(values));
    return out;
}

std::vector<ImplicitPrimitive> read_implicit_file(const std::filesystem::path& file) {
    std::vector<ImplicitPrimitive> out;
    for (auto& [kind, values] : read_primitive_file(file, true))
        out.emplace_back(kind, std::move(values));
    return out;
}

GroundTruthModel read_ground_truth(const std::filesystem::path& dir, const ReadOptions& opts) {
    GroundTruthModel m;

    const auto points_path = dir / "points.txt";
    std::ifstream pf(points_path);
    if (!pf) throw std::runtime_error("cannot open " + points_path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(pf, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        double x, y, z;
        if (!(is >> x >> y >> z)) parse_fail(points_path, line_no, "expected three coordinates");
        m.cloud.emplace_back(x, y, z);
    }

    m.segments = read_segment_file(dir / "segments.txt", static_cast<int>(m.cloud.size()),
                                   opts.index_base);

    const auto load = [&](const std::filesystem::path& path, bool parametric) {
        std::size_t count = 0;
        for (auto& [kind, values] : read_primitive_file(path, false)) {
            try {
                if (parametric)
                    m.parametric.emplace_back(kind, std::move(values));
                else
                    m.implicit.emplace_back(kind, std::move(values));
            } catch (const std::exception& e) {
                throw std::runtime_error(path.string() + ": " + e.what());
            }
            ++count;
        }
        if (count != 0 && count != m.segments.size())
            throw std::runtime_error(path.string() + ": primitive count does not match File 2");
    };
    load(dir / "parametric.txt", true);
    load(dir / "implicit.txt", false);

    m.validate();
    return m;
}

std::pair<std::vector<int>, std::vector<int>> split_train_test(int model_count,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
    if (model_count < 2) throw std::invalid_argument("need at least two models to split");
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("test fraction must be in (0,1)");
    std::vector<int> ids(model_count);
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    int n_test = std::clamp(static_cast<int>(std::lround(test_fraction * model_count)), 1,
                            model_count - 1);
    std::vector<int> test(ids.begin(), ids.begin() + n_test);
    std::vector<int> train(ids.begin() + n_test, ids.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

}  // namespace fit4cad
