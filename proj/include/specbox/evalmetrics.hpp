#pragma once

// Detection evaluation: IoU, greedy one-to-one matching, detection rate and
// precision, VOC-style AP/mAP, and boxplot statistics for feature deviations.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "specbox/annotate.hpp"
#include "specbox/common.hpp"

namespace specbox {

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const long long ix = std::max(
        0LL, static_cast<long long>(std::min(a.x_max, b.x_max)) -
                 static_cast<long long>(std::max(a.x_min, b.x_min)));
    const long long iy = std::max(
        0LL, static_cast<long long>(std::min(a.y_max, b.y_max)) -
                 static_cast<long long>(std::max(a.y_min, b.y_min)));
    const long long inter = ix * iy;
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// ---------------------------------------------------------------------------

struct MatchResult {
    struct Pair {
        int gt = -1;
        int det = -1;
        double iou = 0.0;
    };
    std::vector<Pair> pairs;
    std::vector<int> unmatched_gt;
    std::vector<int> unmatched_det;
};

// Greedy assignment in confidence order: each detection claims the
// highest-IoU unclaimed ground-truth box with IoU >= threshold. Matching is
// class-agnostic; classification correctness is scored separately.
inline MatchResult match(const std::vector<BoundingBox>& gt,
                         const std::vector<Detection>& det,
                         double iou_threshold = 0.5) {
    std::vector<int> order(det.size());
    for (std::size_t i = 0; i < det.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return det[static_cast<std::size_t>(a)].confidence >
               det[static_cast<std::size_t>(b)].confidence;
    });

    MatchResult out;
    std::vector<bool> gt_taken(gt.size(), false);
    std::vector<bool> det_matched(det.size(), false);
    for (int di : order) {
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t gi = 0; gi < gt.size(); ++gi) {
            if (gt_taken[gi]) continue;
            const double v = iou(gt[gi], det[static_cast<std::size_t>(di)].box);
            if (v >= iou_threshold && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(gi);
            }
        }
        if (best_gt >= 0) {
            gt_taken[static_cast<std::size_t>(best_gt)] = true;
            det_matched[static_cast<std::size_t>(di)] = true;
            out.pairs.push_back({best_gt, di, best_iou});
        }
    }
    for (std::size_t gi = 0; gi < gt.size(); ++gi)
        if (!gt_taken[gi]) out.unmatched_gt.push_back(static_cast<int>(gi));
    for (std::size_t di = 0; di < det.size(); ++di)
        if (!det_matched[di]) out.unmatched_det.push_back(static_cast<int>(di));
    return out;
}

struct RatePrecision {
    double detection_rate = 0.0;           // matched GT / total GT
    std::optional<double> precision;       // correct class among matched dets
};

inline RatePrecision detection_and_precision(const MatchResult& m,
                                             const std::vector<BoundingBox>& gt,
                                             const std::vector<Detection>& det) {
    RatePrecision out;
    if (!gt.empty())
        out.detection_rate =
            static_cast<double>(m.pairs.size()) / static_cast<double>(gt.size());
    if (!m.pairs.empty()) {
        std::size_t correct = 0;
        for (const auto& p : m.pairs)
            if (gt[static_cast<std::size_t>(p.gt)].cls ==
                det[static_cast<std::size_t>(p.det)].box.cls)
                ++correct;
        out.precision = static_cast<double>(correct) /
                        static_cast<double>(m.pairs.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// VOC-style average precision over a set of labelled images.

struct LabeledImage {
    std::vector<BoundingBox> gt;
    std::vector<Detection> det;
};

inline std::optional<double> average_precision(const std::vector<LabeledImage>& images,
                                               RatClass cls, double iou_threshold = 0.5) {
    std::size_t n_gt = 0;
    for (const auto& img : images)
        for (const auto& g : img.gt)
            if (g.cls == cls) ++n_gt;
    if (n_gt == 0) return std::nullopt;

    struct Entry {
        double confidence;
        int image;
        int det;
    };
    std::vector<Entry> entries;
    for (std::size_t ii = 0; ii < images.size(); ++ii)
        for (std::size_t di = 0; di < images[ii].det.size(); ++di)
            if (images[ii].det[di].box.cls == cls)
                entries.push_back({images[ii].det[di].confidence,
                                   static_cast<int>(ii), static_cast<int>(di)});
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) {
                         return a.confidence > b.confidence;
                     });

    std::vector<std::vector<bool>> taken(images.size());
    for (std::size_t ii = 0; ii < images.size(); ++ii)
        taken[ii].assign(images[ii].gt.size(), false);

    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const auto& e : entries) {
        const auto& img = images[static_cast<std::size_t>(e.image)];
        const auto& box = img.det[static_cast<std::size_t>(e.det)].box;
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t gi = 0; gi < img.gt.size(); ++gi) {
            if (img.gt[gi].cls != cls || taken[static_cast<std::size_t>(e.image)][gi])
                continue;
            const double v = iou(img.gt[gi], box);
            if (v >= iou_threshold && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(gi);
            }
        }
        if (best_gt >= 0) {
            taken[static_cast<std::size_t>(e.image)][static_cast<std::size_t>(best_gt)] = true;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }

    // all-points interpolation: area under the monotone precision envelope
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
        double max_p = 0.0;
        for (std::size_t k = i; k < precision.size(); ++k)
            max_p = std::max(max_p, precision[k]);
        ap += (recall[i] - prev_recall) * max_p;
        prev_recall = recall[i];
    }
    return ap;
}

inline std::optional<double> mean_ap(const std::map<RatClass, std::optional<double>>& per_class) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& [cls, ap] : per_class) {
        if (!ap) continue;
        acc += *ap;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Boxplot statistics (type-7 linear-interpolation quantiles, 1.5 IQR whiskers)

inline double quantile_type7(std::vector<double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) throw InvalidSpec("quantile of empty sample");
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct BoxplotStats {
    double median = 0.0;
    double q1 = 0.0, q3 = 0.0;
    double whisker_lo = 0.0, whisker_hi = 0.0;
    std::size_t n = 0;
};

inline std::optional<BoxplotStats> deviation_stats(std::vector<double> sample) {
    if (sample.empty()) return std::nullopt;
    std::sort(sample.begin(), sample.end());
    BoxplotStats s;
    s.n = sample.size();
    s.median = quantile_type7(sample, 0.5);
    s.q1 = quantile_type7(sample, 0.25);
    s.q3 = quantile_type7(sample, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_lo = sample.back();
    s.whisker_hi = sample.front();
    for (double v : sample) {
        if (v >= lo_fence) { s.whisker_lo = v; break; }
    }
    for (auto it = sample.rbegin(); it != sample.rend(); ++it) {
        if (*it <= hi_fence) { s.whisker_hi = *it; break; }
    }
    return s;
}

} // namespace specbox
