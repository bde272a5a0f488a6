#include "tamperlab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace tamperlab {

namespace {

double safe_ratio(double num, double den)
{
    return den > 0 ? num / den : 0.0;
}

} // namespace

ConfusionCounts confusion(const BinaryLabel& pred, const BinaryLabel& gt)
{
    if (!same_shape(pred, gt))
        throw Error(Errc::shape_mismatch, "prediction and ground truth differ in size");
    ConfusionCounts c;
    c.tp = (pred && gt).count();
    c.fp = (pred && !gt).count();
    c.fn = (!pred && gt).count();
    c.tn = pred.size() - c.tp - c.fp - c.fn;
    return c;
}

double recall(const ConfusionCounts& c)
{
    return safe_ratio(double(c.tp), double(c.tp + c.fn));
}

double precision(const ConfusionCounts& c)
{
    return safe_ratio(double(c.tp), double(c.tp + c.fp));
}

double f1(const ConfusionCounts& c)
{
    return safe_ratio(2.0 * double(c.tp), 2.0 * double(c.tp) + double(c.fp) + double(c.fn));
}

double iou(const ConfusionCounts& c)
{
    return safe_ratio(double(c.tp), double(c.tp + c.fp + c.fn));
}

double iou_dataset(std::span<const ConfusionCounts> counts)
{
    return iou(std::accumulate(counts.begin(), counts.end(), ConfusionCounts{}));
}

double g_iou(std::span<const ConfusionCounts> counts, double eps)
{
    if (counts.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& c : counts)
        sum += double(c.tp) / (double(c.tp + c.fp + c.fn) + eps);
    return sum / double(counts.size());
}

double g_iou(std::span<const std::pair<BinaryLabel, BinaryLabel>> samples, double eps)
{
    std::vector<ConfusionCounts> counts;
    counts.reserve(samples.size());
    for (const auto& [pred, gt] : samples)
        counts.push_back(confusion(pred, gt));
    return g_iou(counts, eps);
}

double auc(std::span<const FloatMap> prob_maps, std::span<const BinaryLabel> gts, int n_thresholds)
{
    if (prob_maps.size() != gts.size())
        throw Error(Errc::shape_mismatch, "probability and label lists differ in length");
    if (n_thresholds < 2)
        throw Error(Errc::invalid_argument, "need at least 2 thresholds");

    std::vector<std::pair<double, bool>> pixels;
    for (std::size_t i = 0; i < prob_maps.size(); ++i) {
        if (!same_shape(prob_maps[i], gts[i]))
            throw Error(Errc::shape_mismatch, "probability map and label differ in size");
        for (Index y = 0; y < gts[i].rows(); ++y)
            for (Index x = 0; x < gts[i].cols(); ++x)
                pixels.emplace_back(prob_maps[i](y, x), gts[i](y, x));
    }
    const auto positives = std::count_if(pixels.begin(), pixels.end(),
                                         [](const auto& p) { return p.second; });
    const auto negatives = static_cast<std::int64_t>(pixels.size()) - positives;
    if (positives == 0 || negatives == 0)
        throw Error(Errc::degenerate_ground_truth, "pixel pool holds a single class");

    std::sort(pixels.begin(), pixels.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // walk thresholds from high to low so the positive set only grows
    std::vector<std::pair<double, double>> roc;
    roc.emplace_back(0.0, 0.0);
    std::int64_t tp = 0, fp = 0;
    std::size_t next = 0;
    for (int k = n_thresholds - 1; k >= 0; --k) {
        const double t = double(k) / double(n_thresholds - 1);
        while (next < pixels.size() && pixels[next].first >= t) {
            (pixels[next].second ? tp : fp) += 1;
            ++next;
        }
        roc.emplace_back(double(fp) / double(negatives), double(tp) / double(positives));
    }
    roc.emplace_back(1.0, 1.0);

    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i)
        area += (roc[i].first - roc[i - 1].first) * (roc[i].second + roc[i - 1].second) / 2.0;
    return area;
}

std::vector<std::size_t> rank_classes(const std::vector<double>& scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

double topk_accuracy(std::span<const std::vector<double>> scores,
                     std::span<const std::vector<std::size_t>> gt_sets, std::size_t k)
{
    if (scores.size() != gt_sets.size())
        throw Error(Errc::shape_mismatch, "score and ground-truth lists differ in length");
    if (scores.empty())
        return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (gt_sets[i].empty())
            throw Error(Errc::invalid_argument, "empty ground-truth class set");
        const auto order = rank_classes(scores[i]);
        const std::size_t top = std::min(k, order.size());
        const bool hit = std::any_of(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                                     [&](std::size_t c) {
                                         return std::find(gt_sets[i].begin(), gt_sets[i].end(), c)
                                                != gt_sets[i].end();
                                     });
        correct += hit;
    }
    return double(correct) / double(scores.size());
}

nlohmann::ordered_json EvalReport::to_json() const
{
    nlohmann::ordered_json j;
    j["top1_acc"] = top1_acc ? nlohmann::ordered_json(*top1_acc) : nlohmann::ordered_json();
    j["top5_acc"] = top5_acc ? nlohmann::ordered_json(*top5_acc) : nlohmann::ordered_json();
    j["recall"] = recall;
    j["precision"] = precision;
    j["f1"] = f1;
    j["auc"] = auc ? nlohmann::ordered_json(*auc) : nlohmann::ordered_json();
    j["g_iou"] = g_iou;
    j["iou"] = iou;
    j["n_samples"] = n_samples;
    j["n_semantic"] = n_semantic;
    j["missing"] = missing;
    return j;
}

std::string EvalReport::table() const
{
    auto pct = [](std::optional<double> v) {
        if (!v)
            return std::string("    -");
        char buf[16];
        std::snprintf(buf, sizeof buf, "%5.1f", *v * 100.0);
        return std::string(buf);
    };
    std::string out = "Top-1  Top-5  Recall     F1    AUC  g-IoU    IoU\n";
    for (auto v : {top1_acc, top5_acc, std::optional<double>(recall), std::optional<double>(f1),
                   auc, std::optional<double>(g_iou),
                   std::optional<double>(iou)})
        out += pct(v) + "  ";
    out.resize(out.size() - 2);
    out += "\n";
    return out;
}

} // namespace tamperlab
