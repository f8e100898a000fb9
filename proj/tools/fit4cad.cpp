// Command-line front end: generate synthetic benchmarks, run the two
// fitting methods, evaluate predictions and aggregate reports.

#include "fit4cad/dataset.hpp"
#include "fit4cad/fit_ht.hpp"
#include "fit4cad/fit_pg.hpp"
#include "fit4cad/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fit4cad;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

std::string fnv1a_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string model_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "model_%03d", i);
    return buf;
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << doc.dump(2) << '\n';
}

int worker_count() {
    if (const char* env = std::getenv("FIT4CAD_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<fs::path> model_dirs(const fs::path& root) {
    std::vector<fs::path> dirs;
    if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "points.txt")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::vector<Point3> read_points(const fs::path& file) {
    std::ifstream f(file);
    if (!f) throw std::runtime_error("cannot open " + file.string());
    std::vector<Point3> pts;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        double x, y, z;
        if (!(is >> x >> y >> z)) throw std::runtime_error("bad point line in " + file.string());
        pts.emplace_back(x, y, z);
    }
    return pts;
}

void write_prediction(const fs::path& dir, const Segmentation& seg,
                      const std::vector<ParametricPrimitive>& parametric,
                      const std::vector<ImplicitPrimitive>& implicit) {
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "segments.txt");
        for (std::size_t s = 0; s < seg.segments.size(); ++s)
            f << format_segment_line(static_cast<int>(s) + 1, seg.segments[s].indices) << '\n';
    }
    {
        std::ofstream f(dir / "parametric.txt");
        for (std::size_t s = 0; s < parametric.size(); ++s)
            f << format_primitive_line(static_cast<int>(s) + 1, parametric[s].kind(),
                                       parametric[s].params())
              << '\n';
    }
    {
        std::ofstream f(dir / "implicit.txt");
        for (std::size_t s = 0; s < implicit.size(); ++s)
            f << format_primitive_line(static_cast<int>(s) + 1, implicit[s].kind(),
                                       implicit[s].coeffs())
              << '\n';
    }
}

std::string csv_cell(const std::optional<double>& v) {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

// --------------------------------------------------------------------------

int cmd_generate(const fs::path& out, int models, std::uint64_t seed, int density_lo,
                 int density_hi, double missing_frac, double test_frac) {
    fs::create_directories(out);
    json files = json::object();
    auto record = [&](const fs::path& p) {
        files[fs::relative(p, out).generic_string()] = fnv1a_file(p);
    };

    for (int i = 0; i < models; ++i) {
        GeneratorSpec spec;
        spec.min_points = density_lo;
        spec.max_points = density_hi;
        // Spread the missing-data models evenly over the index range.
        bool missing = std::floor((i + 1) * missing_frac) > std::floor(i * missing_frac);
        if (missing) {
            spec.hole_count = 1;
            spec.hole_radius = 0.05;
        }
        GroundTruthModel m = generate_model(spec, seed + static_cast<std::uint64_t>(i));
        fs::path dir = out / model_name(i);
        write_ground_truth(m, dir);

        json manifest;
        manifest["model_id"] = model_name(i);
        manifest["seed"] = seed + static_cast<std::uint64_t>(i);
        manifest["missing_data"] = missing;
        manifest["primitives"] = m.segments.size();
        manifest["points"] = m.cloud.size();
        json mf = json::object();
        for (const char* name : {"points.txt", "segments.txt", "parametric.txt", "implicit.txt"})
            mf[name] = fnv1a_file(dir / name);
        manifest["files"] = mf;
        write_json(dir / "manifest.json", manifest);

        for (const auto& e : fs::directory_iterator(dir)) record(e.path());
    }

    if (models >= 2) {
        auto [train, test] = split_train_test(models, test_frac, seed);
        json split;
        for (int i : train) split["train"].push_back(model_name(i));
        for (int i : test) split["test"].push_back(model_name(i));
        write_json(out / "split.json", split);
        record(out / "split.json");
    }

    json manifest;
    manifest["tool_version"] = kVersion;
    manifest["command"] = "generate";
    manifest["seed"] = seed;
    manifest["models"] = models;
    manifest["density"] = {density_lo, density_hi};
    manifest["missing_frac"] = missing_frac;
    manifest["test_frac"] = test_frac;
    manifest["files"] = files;
    write_json(out / "manifest.json", manifest);
    return 0;
}

int cmd_fit(const std::string& method, const fs::path& input, const std::string& config_file,
            const fs::path& out) {
    std::string config_text = "{}";
    if (!config_file.empty()) {
        std::ifstream f(config_file);
        if (!f) {
            std::cerr << "error: cannot open config " << config_file << '\n';
            return kExitData;
        }
        std::stringstream ss;
        ss << f.rdbuf();
        config_text = ss.str();
    }
    HtConfig ht_cfg;
    PgConfig pg_cfg;
    if (method == "ht")
        ht_cfg = ht_config_from_json(config_text);
    else
        pg_cfg = pg_config_from_json(config_text);

    std::vector<fs::path> dirs = model_dirs(input);
    if (dirs.empty()) {
        std::cerr << "error: no model directories under " << input << '\n';
        return kExitData;
    }
    fs::create_directories(out);

    std::mutex mu;
    std::map<std::string, double> timing;
    std::vector<std::string> failures;
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= dirs.size()) return;
            const fs::path& dir = dirs[i];
            std::string id = dir.filename().string();
            try {
                std::vector<Point3> pts = read_points(dir / "points.txt");
                auto t0 = std::chrono::steady_clock::now();
                Segmentation seg;
                std::vector<ParametricPrimitive> parametric;
                std::vector<ImplicitPrimitive> implicit;
                if (method == "ht") {
                    HtResult r = fit_ht(pts, ht_cfg);
                    seg = std::move(r.segmentation);
                    parametric = std::move(r.parametric);
                    implicit = std::move(r.implicit);
                } else {
                    PgResult r = fit_pg(pts, pg_cfg);
                    seg = std::move(r.segmentation);
                    parametric = std::move(r.parametric);
                    implicit = std::move(r.implicit);
                }
                double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                 .count();
                write_prediction(out / id, seg, parametric, implicit);
                std::lock_guard<std::mutex> lock(mu);
                timing[id] = sec;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                failures.push_back(id);
                std::cerr << "fit failed for " << id << ": " << e.what() << '\n';
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < worker_count(); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    json manifest;
    manifest["tool_version"] = kVersion;
    manifest["command"] = "fit";
    manifest["method"] = method;
    manifest["config"] = json::parse(config_text);
    json per_model = json::object();
    double mn = 0, mx = 0, sum = 0;
    bool first = true;
    for (const auto& [id, sec] : timing) {
        per_model[id] = sec;
        mn = first ? sec : std::min(mn, sec);
        mx = first ? sec : std::max(mx, sec);
        sum += sec;
        first = false;
    }
    json t;
    t["per_model"] = per_model;
    if (!timing.empty()) {
        t["min"] = mn;
        t["mean"] = sum / timing.size();
        t["max"] = mx;
    }
    manifest["timing"] = t;
    manifest["failures"] = failures;
    json files = json::object();
    for (const auto& [id, sec] : timing) {
        (void)sec;
        for (const char* name : {"segments.txt", "parametric.txt", "implicit.txt"})
            files[id + "/" + name] = fnv1a_file(out / id / name);
    }
    manifest["files"] = files;
    write_json(out / "manifest.json", manifest);

    if (timing.empty()) return kExitData;
    return failures.empty() ? 0 : kExitPartial;
}

int cmd_eval(const fs::path& gt_dir, const fs::path& pred_dir, const fs::path& report_path,
             const fs::path& accuracy_path) {
    std::vector<fs::path> gt_models = model_dirs(gt_dir);
    if (gt_models.empty()) {
        std::cerr << "error: no ground-truth models under " << gt_dir << '\n';
        return kExitData;
    }

    std::ofstream report(report_path);
    if (!report) {
        std::cerr << "error: cannot write " << report_path << '\n';
        return kExitData;
    }
    report << "# classification scores are unweighted means over ground-truth segments\n";
    report << "model_id,point_count,true_primitives,predicted_primitives,"
              "DSC,PPV,TPR,TNR,NPV,ACC,missing_data\n";

    std::ofstream accuracy;
    if (!accuracy_path.empty()) {
        accuracy.open(accuracy_path);
        if (!accuracy) {
            std::cerr << "error: cannot write " << accuracy_path << '\n';
            return kExitData;
        }
        accuracy << "model_id,MFE,d_dHaus,d1\n";
    }

    int evaluated = 0, skipped = 0;
    for (const fs::path& dir : gt_models) {
        std::string id = dir.filename().string();
        fs::path pred_model = pred_dir / id;
        if (!fs::exists(pred_model / "segments.txt")) {
            std::cerr << "skipped (no prediction): " << id << '\n';
            ++skipped;
            continue;
        }
        try {
            GroundTruthModel gt = read_ground_truth(dir);
            Segmentation pred;
            pred.cloud_size = static_cast<int>(gt.cloud.size());
            pred.segments = read_segment_file(pred_model / "segments.txt", pred.cloud_size);

            bool missing = false;
            if (fs::exists(dir / "manifest.json")) {
                std::ifstream mf(dir / "manifest.json");
                json doc = json::parse(mf);
                missing = doc.value("missing_data", false);
            }

            ModelReportRow row = model_report(id, gt, pred);
            report << row.model_id << ',' << row.point_count << ',' << row.true_primitives << ','
                   << row.predicted_primitives << ',' << csv_cell(row.dsc) << ','
                   << csv_cell(row.ppv) << ',' << csv_cell(row.tpr) << ',' << csv_cell(row.tnr)
                   << ',' << csv_cell(row.npv) << ',' << csv_cell(row.acc) << ','
                   << (missing ? 1 : 0) << '\n';

            if (accuracy.is_open() && fs::exists(pred_model / "parametric.txt")) {
                auto parametric = read_parametric_file(pred_model / "parametric.txt");
                std::vector<ImplicitPrimitive> implicit;
                if (fs::exists(pred_model / "implicit.txt"))
                    implicit = read_implicit_file(pred_model / "implicit.txt");
                AccuracyRow arow = accuracy_report(id, gt, pred, parametric, implicit);
                accuracy << arow.model_id << ',' << csv_cell(arow.mean_mfe) << ','
                         << csv_cell(arow.mean_hausdorff) << ','
                         << csv_cell(arow.mean_coeff_distance) << '\n';
            }
            ++evaluated;
        } catch (const std::exception& e) {
            std::cerr << "skipped (" << e.what() << "): " << id << '\n';
            ++skipped;
        }
    }
    if (evaluated == 0) {
        std::cerr << "error: no model could be evaluated\n";
        return kExitData;
    }
    return skipped == 0 ? 0 : kExitPartial;
}

int cmd_report(const fs::path& in_path, const fs::path& boxplot_path, bool filter_missing) {
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "error: cannot open " << in_path << '\n';
        return kExitData;
    }
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (header.empty())
            header = std::move(cells);
        else
            rows.push_back(std::move(cells));
    }
    if (header.empty() || rows.empty()) {
        std::cerr << "error: empty report\n";
        return kExitData;
    }

    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    int missing_col = column("missing_data");
    if (filter_missing && missing_col < 0) {
        std::cerr << "error: report has no missing_data column\n";
        return kExitData;
    }

    std::ofstream out(boxplot_path);
    if (!out) {
        std::cerr << "error: cannot write " << boxplot_path << '\n';
        return kExitData;
    }
    out << "metric,group,count,min,q1,median,q3,max,outliers\n";

    const std::vector<std::string> metrics = {"DSC", "PPV", "TPR", "TNR", "NPV", "ACC"};
    std::vector<std::string> groups =
        filter_missing ? std::vector<std::string>{"complete", "missing-data"}
                       : std::vector<std::string>{"all"};
    for (const std::string& metric : metrics) {
        int col = column(metric);
        if (col < 0) continue;
        for (const std::string& group : groups) {
            std::vector<double> values;
            for (const auto& row : rows) {
                if (static_cast<int>(row.size()) <= col || row[col].empty()) continue;
                if (filter_missing) {
                    bool missing = row[missing_col] == "1";
                    if (missing != (group == "missing-data")) continue;
                }
                values.push_back(std::stod(row[col]));
            }
            if (values.empty()) continue;
            BoxplotStats s = boxplot_stats(values);
            out << metric << ',' << group << ',' << values.size() << ',' << s.min << ',' << s.q1
                << ',' << s.median << ',' << s.q3 << ',' << s.max << ',';
            for (std::size_t i = 0; i < s.outliers.size(); ++i) {
                if (i) out << ';';
                out << s.outliers[i];
            }
            out << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic CAD point-cloud benchmark: generation, primitive fitting, evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate synthetic benchmark models");
    std::string gen_out;
    int gen_models = 10;
    std::uint64_t gen_seed = 0;
    std::string gen_density = "8000..12000";
    double gen_missing = 0.0;
    double gen_test_frac = 35.0 / 225.0;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--models", gen_models, "Number of models")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Base RNG seed");
    gen->add_option("--density", gen_density, "Point count range LO..HI");
    gen->add_option("--missing-frac", gen_missing, "Fraction of models with a missing-data hole")
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--test-frac", gen_test_frac, "Test fraction of the train/test split")
        ->check(CLI::Range(0.0, 1.0));

    // fit
    auto* fit = app.add_subcommand("fit", "Fit primitives to every model of a benchmark");
    std::string fit_method, fit_input, fit_config, fit_out;
    fit->add_option("--method", fit_method, "Fitting method")
        ->required()
        ->check(CLI::IsMember({"ht", "pg"}));
    fit->add_option("--input", fit_input, "Benchmark directory")->required();
    fit->add_option("--config", fit_config, "JSON config file");
    fit->add_option("--out", fit_out, "Prediction output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
    std::string eval_gt, eval_pred, eval_out, eval_accuracy;
    eval->add_option("--gt", eval_gt, "Ground-truth directory")->required();
    eval->add_option("--pred", eval_pred, "Prediction directory")->required();
    eval->add_option("--out", eval_out, "Classification report CSV")->required();
    eval->add_option("--accuracy", eval_accuracy, "Accuracy report CSV");

    // report
    auto* rep = app.add_subcommand("report", "Aggregate a report CSV into boxplot statistics");
    std::string rep_in, rep_boxplot, rep_filter_value;
    rep->add_option("--in", rep_in, "Report CSV")->required();
    rep->add_option("--boxplot", rep_boxplot, "Boxplot statistics CSV")->required();
    rep->add_option("--filter", rep_filter_value, "Split statistics by a recorded flag")
        ->check(CLI::IsMember({"missing-data"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            auto sep = gen_density.find("..");
            if (sep == std::string::npos) {
                std::cerr << "error: --density expects LO..HI\n";
                return kExitUsage;
            }
            int lo = std::stoi(gen_density.substr(0, sep));
            int hi = std::stoi(gen_density.substr(sep + 2));
            return cmd_generate(gen_out, gen_models, gen_seed, lo, hi, gen_missing, gen_test_frac);
        }
        if (fit->parsed()) return cmd_fit(fit_method, fit_input, fit_config, fit_out);
        if (eval->parsed()) return cmd_eval(eval_gt, eval_pred, eval_out, eval_accuracy);
        if (rep->parsed())
            return cmd_report(rep_in, rep_boxplot, rep_filter_value == "missing-data");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
