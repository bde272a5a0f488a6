#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tamperlab/raster.hpp"

namespace tamperlab {

inline constexpr double kGiouEpsilon = 1e-7;

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o)
    {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const BinaryLabel& pred, const BinaryLabel& gt);

// Degenerate 0/0 cases evaluate to 0.
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);

/// Pools counts over samples, then tp / (tp + fp + fn).
double iou_dataset(std::span<const ConfusionCounts> counts);

/// Mean over samples of |pred & gt| / (|pred | gt| + eps).
double g_iou(std::span<const std::pair<BinaryLabel, BinaryLabel>> samples,
             double eps = kGiouEpsilon);
double g_iou(std::span<const ConfusionCounts> counts, double eps = kGiouEpsilon);

/// Pooled-pixel ROC AUC: (FPR, TPR) at n_thresholds evenly spaced
/// thresholds on [0,1] (pixel positive iff p >= t) plus the all-positive
/// and all-negative endpoints, integrated by trapezoid over FPR.
double auc(std::span<const FloatMap> prob_maps, std::span<const BinaryLabel> gts,
           int n_thresholds = 256);

/// Fraction of samples whose k top-scoring classes (ties toward the lower
/// class index) hit any ground-truth class.
double topk_accuracy(std::span<const std::vector<double>> scores,
                     std::span<const std::vector<std::size_t>> gt_sets, std::size_t k);

/// Class indices in descending score order, ties toward the lower index.
std::vector<std::size_t> rank_classes(const std::vector<double>& scores);

struct EvalReport {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::optional<double> auc; ///< absent when the pixel pool is single-class
    double iou = 0.0;
    double g_iou = 0.0;
    std::optional<double> top1_acc;
    std::optional<double> top5_acc;
    std::size_t n_samples = 0;
    std::size_t n_semantic = 0;
    std::vector<std::string> missing;

    nlohmann::ordered_json to_json() const;
    /// Fixed column order: Top-1, Top-5, Recall, F1, AUC, g-IoU, IoU.
    std::string table() const;
};

} // namespace tamperlab
