#pragma once

#include "fit4cad/dataset.hpp"
#include "fit4cad/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fit4cad {

struct ConfusionCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// The six point-classification ratios; a ratio is absent when its
/// denominator is zero.
struct ClassificationScores {
    std::optional<double> tpr, tnr, ppv, npv, acc, dsc;
};

struct ModelReportRow {
    std::string model_id;
    int point_count = 0;
    int true_primitives = 0;
    int predicted_primitives = 0;
    // Unweighted means over ground-truth segments with defined values.
    std::optional<double> dsc, ppv, tpr, tnr, npv, acc;
};

struct AccuracyRow {
    std::string model_id;
    std::optional<double> mean_mfe;
    std::optional<double> mean_hausdorff;
    std::optional<double> mean_coeff_distance;
};

struct BoxplotStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;  // whisker ends
    std::vector<double> outliers;
};

/// For each ground-truth segment, the index of the predicted segment with
/// the largest intersection (ties to the lower predicted index), or nullopt
/// when every intersection is empty.
std::vector<std::optional<int>> match_segments(const GroundTruthModel& gt,
                                               const Segmentation& pred);

ConfusionCounts confusion_counts(const std::vector<int>& benchmark_set,
                                 const std::vector<int>& predicted_set, int total);

ClassificationScores classification_scores(const ConfusionCounts& c);

/// Mean point-to-surface distance over the selected points, normalized by
/// the bounding-box diagonal of those points.
double mean_fitting_error(const std::vector<Point3>& cloud, const std::vector<int>& pts,
                          const ParametricPrimitive& surf);

/// Maximum point-to-surface distance, normalized by the same diagonal.
double directed_hausdorff(const std::vector<Point3>& cloud, const std::vector<int>& pts,
                          const ParametricPrimitive& surf);

/// l1 distance between the (already normalized) coefficient vectors.
double coefficient_distance(const ImplicitPrimitive& a, const ImplicitPrimitive& b);

ModelReportRow model_report(const std::string& model_id, const GroundTruthModel& gt,
                            const Segmentation& pred);

/// Accuracy measures of a prediction that carries primitive forms, averaged
/// over predicted segments; d1 only over segments matched to a ground-truth
/// segment with a compatible implicit form.
AccuracyRow accuracy_report(const std::string& model_id, const GroundTruthModel& gt,
                            const Segmentation& pred,
                            const std::vector<ParametricPrimitive>& pred_parametric,
                            const std::vector<ImplicitPrimitive>& pred_implicit);

/// Type-7 quartiles; whiskers at 1.5 IQR, points beyond them reported as
/// outliers.
BoxplotStats boxplot_stats(std::vector<double> values);

/// Type-7 (linear interpolation) quantile of a sample.
double quantile_type7(std::vector<double> values, double q);

}  // namespace fit4cad
