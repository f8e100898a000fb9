#include "fit4cad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fit4cad {

namespace {

std::vector<char> membership_mask(const std::vector<int>& set, int total) {
    std::vector<char> mask(total, 0);
    for (int i : set) {
        if (i < 0 || i >= total) throw std::invalid_argument("point index out of range");
        mask[i] = 1;
    }
    return mask;
}

std::optional<double> ratio(long long num, long long den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

// Mean of the defined entries, or nullopt when none is defined.
std::optional<double> mean_defined(const std::vector<std::optional<double>>& xs) {
    double sum = 0.0;
    int n = 0;
    for (const auto& x : xs)
        if (x) {
            sum += *x;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / n;
}

double segment_diagonal(const std::vector<Point3>& cloud, const std::vector<int>& pts) {
    if (pts.empty()) throw std::invalid_argument("empty point selection");
    std::vector<Point3> sel;
    sel.reserve(pts.size());
    for (int i : pts) sel.push_back(cloud[i]);
    double l = bounding_box_diagonal(sel);
    if (l <= 0.0) throw std::invalid_argument("coincident point selection has zero diagonal");
    return l;
}

}  // namespace

std::vector<std::optional<int>> match_segments(const GroundTruthModel& gt,
                                               const Segmentation& pred) {
    const int total = static_cast<int>(gt.cloud.size());
    if (pred.cloud_size != total)
        throw std::invalid_argument("prediction refers to a different cloud size");

    std::vector<std::optional<int>> matches(gt.segments.size());
    std::vector<std::vector<char>> pred_masks;
    pred_masks.reserve(pred.segments.size());
    for (const Segment& s : pred.segments) pred_masks.push_back(membership_mask(s.indices, total));

    for (std::size_t g = 0; g < gt.segments.size(); ++g) {
        long long best = 0;
        std::optional<int> best_idx;
        for (std::size_t p = 0; p < pred.segments.size(); ++p) {
            long long inter = 0;
            for (int i : gt.segments[g].indices) inter += pred_masks[p][i];
            if (inter > best) {
                best = inter;
                best_idx = static_cast<int>(p);
            }
        }
        matches[g] = best_idx;
    }
    return matches;
}

ConfusionCounts confusion_counts(const std::vector<int>& benchmark_set,
                                 const std::vector<int>& predicted_set, int total) {
    auto gt_mask = membership_mask(benchmark_set, total);
    auto pred_mask = membership_mask(predicted_set, total);
    ConfusionCounts c;
    for (int i = 0; i < total; ++i) {
        if (gt_mask[i] && pred_mask[i])
            ++c.tp;
        else if (!gt_mask[i] && pred_mask[i])
            ++c.fp;
        else if (gt_mask[i] && !pred_mask[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

ClassificationScores classification_scores(const ConfusionCounts& c) {
    ClassificationScores s;
    s.tpr = ratio(c.tp, c.tp + c.fn);
    s.tnr = ratio(c.tn, c.tn + c.fp);
    s.ppv = ratio(c.tp, c.tp + c.fp);
    s.npv = ratio(c.tn, c.tn + c.fn);
    s.acc = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
    s.dsc = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return s;
}

double mean_fitting_error(const std::vector<Point3>& cloud, const std::vector<int>& pts,
                          const ParametricPrimitive& surf) {
    double l = segment_diagonal(cloud, pts);
    double sum = 0.0;
    for (int i : pts) sum += distance_to_surface(surf, cloud[i]);
    return sum / (l * pts.size());
}

double directed_hausdorff(const std::vector<Point3>& cloud, const std::vector<int>& pts,
                          const ParametricPrimitive& surf) {
    double l = segment_diagonal(cloud, pts);
    double worst = 0.0;
    for (int i : pts) worst = std::max(worst, distance_to_surface(surf, cloud[i]));
    return worst / l;
}

double coefficient_distance(const ImplicitPrimitive& a, const ImplicitPrimitive& b) {
    if (a.coeffs().size() != b.coeffs().size())
        throw std::invalid_argument("coefficient vectors of incompatible length");
    double d = 0.0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i)
        d += std::abs(a.coeffs()[i] - b.coeffs()[i]);
    return d;
}

ModelReportRow model_report(const std::string& model_id, const GroundTruthModel& gt,
                            const Segmentation& pred) {
    auto matches = match_segments(gt, pred);
    const int total = static_cast<int>(gt.cloud.size());

    std::vector<std::optional<double>> dsc, ppv, tpr, tnr, npv, acc;
    static const std::vector<int> kEmpty;
    for (std::size_t g = 0; g < gt.segments.size(); ++g) {
        const std::vector<int>& pred_set =
            matches[g] ? pred.segments[*matches[g]].indices : kEmpty;
        auto scores = classification_scores(confusion_counts(gt.segments[g].indices, pred_set, total));
        dsc.push_back(scores.dsc);
        ppv.push_back(scores.ppv);
        tpr.push_back(scores.tpr);
        tnr.push_back(scores.tnr);
        npv.push_back(scores.npv);
        acc.push_back(scores.acc);
    }

    ModelReportRow row;
    row.model_id = model_id;
    row.point_count = total;
    row.true_primitives = static_cast<int>(gt.segments.size());
    row.predicted_primitives = static_cast<int>(pred.segments.size());
    row.dsc = mean_defined(dsc);
    row.ppv = mean_defined(ppv);
    row.tpr = mean_defined(tpr);
    row.tnr = mean_defined(tnr);
    row.npv = mean_defined(npv);
    row.acc = mean_defined(acc);
    return row;
}

AccuracyRow accuracy_report(const std::string& model_id, const GroundTruthModel& gt,
                            const Segmentation& pred,
                            const std::vector<ParametricPrimitive>& pred_parametric,
                            const std::vector<ImplicitPrimitive>& pred_implicit) {
    if (pred_parametric.size() != pred.segments.size())
        throw std::invalid_argument("one parametric form per predicted segment required");

    std::vector<std::optional<double>> mfe, haus;
    for (std::size_t p = 0; p < pred.segments.size(); ++p) {
        if (pred.segments[p].indices.empty()) {
            mfe.emplace_back();
            haus.emplace_back();
            continue;
        }
        mfe.push_back(mean_fitting_error(gt.cloud, pred.segments[p].indices, pred_parametric[p]));
        haus.push_back(directed_hausdorff(gt.cloud, pred.segments[p].indices, pred_parametric[p]));
    }

    // d1 compares each predicted implicit form with the matched ground-truth
    // one; segments of incompatible algebraic degree are skipped.
    std::vector<std::optional<double>> d1;
    if (!pred_implicit.empty() && !gt.implicit.empty()) {
        auto matches = match_segments(gt, pred);
        for (std::size_t g = 0; g < gt.segments.size(); ++g) {
            if (!matches[g]) continue;
            const ImplicitPrimitive& a = gt.implicit[g];
            const ImplicitPrimitive& b = pred_implicit[*matches[g]];
            if (a.coeffs().size() != b.coeffs().size()) continue;
            d1.push_back(coefficient_distance(a, b));
        }
    }

    AccuracyRow row;
    row.model_id = model_id;
    row.mean_mfe = mean_defined(mfe);
    row.mean_hausdorff = mean_defined(haus);
    row.mean_coeff_distance = mean_defined(d1);
    return row;
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(values.begin(), values.end());
    double h = q * (values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

BoxplotStats boxplot_stats(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("boxplot of empty sample");
    std::sort(values.begin(), values.end());
    BoxplotStats s;
    s.q1 = quantile_type7(values, 0.25);
    s.median = quantile_type7(values, 0.50);
    s.q3 = quantile_type7(values, 0.75);
    double iqr = s.q3 - s.q1;
    double lo_fence = s.q1 - 1.5 * iqr;
    double hi_fence = s.q3 + 1.5 * iqr;
    s.min = s.q1;
    s.max = s.q3;
    bool any_inside = false;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            s.outliers.push_back(v);
        } else {
            if (!any_inside) {
                s.min = v;
                any_inside = true;
            }
            s.max = v;
        }
    }
    return s;
}

}  // namespace fit4cad
