#pragma once

// Baseline non-ML detector: threshold the spectrogram above a robust noise
// floor, group pixels into connected components, merge nearby components and
// classify the resulting boxes with configurable duration/bandwidth rules.
//
// Two optional stages (both on by default) extend the plain component
// segmentation for the regimes it cannot reach on its own:
//   - projection rescue: row/column power marginals integrate across the box
//     extent and recover frames whose per-pixel SNR is too low for the mask;
//   - edge refinement: half-power edge placement on the raw image removes the
//     one-pixel spectral-leakage bleed at high SNR.
// Both can be disabled to get the bare mask -> components behaviour.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <tuple>
#include <vector>

#include "specbox/annotate.hpp"
#include "specbox/common.hpp"
#include "specbox/spectro.hpp"
#include "specbox/types.hpp"

namespace specbox {

struct ClassifierRule {
    std::optional<double> fd_min_s, fd_max_s;
    std::optional<double> bw_min_hz, bw_max_hz;
    std::optional<double> flatness_min, flatness_max;
    RatClass cls = RatClass::Unknown;
};

inline std::vector<ClassifierRule> default_classifier_rules() {
    std::vector<ClassifierRule> rules(2);
    rules[0].fd_min_s = 2.5e-3;
    rules[0].cls = RatClass::Lte;
    rules[1].fd_max_s = 2.5e-3;
    rules[1].cls = RatClass::Wifi;
    return rules;
}

struct DetectorConfig {
    double threshold_db_above_floor = 18.0;
    int min_box_area = 6;       // pixels^2
    int merge_gap = 2;          // components closer than this merge
    bool projection_rescue = true;
    bool refine_edges = true;
    // rescue row-activity gates, in units of the measured idle-row deviation
    double row_gate_sigmas = 6.0;     // single row
    double pooled_gate_sigmas = 5.5;  // two-row pooled statistic
    std::vector<ClassifierRule> rules = default_classifier_rules();

    void validate() const {
        if (!(threshold_db_above_floor > 0.0))
            throw InvalidSpec("detector threshold must be > 0");
        if (min_box_area < 1) throw InvalidSpec("min_box_area must be >= 1");
        if (merge_gap < 0) throw InvalidSpec("merge_gap must be >= 0");
    }
};

// Robust floor: median of the lowest-quartile pixel values.
inline double estimate_noise_floor(const Spectrogram& spec) {
    if (spec.power_db.empty()) throw InvalidSpec("empty spectrogram");
    std::vector<float> v(spec.power_db);
    const std::size_t m = std::max<std::size_t>(1, v.size() / 4);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m - 1), v.end());
    const std::size_t k1 = (m - 1) / 2;
    const std::size_t k2 = m / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k1),
                     v.begin() + static_cast<std::ptrdiff_t>(m));
    const double a = v[k1];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k2),
                     v.begin() + static_cast<std::ptrdiff_t>(m));
    const double b = v[k2];
    return (a + b) / 2.0;
}

namespace detail {

inline int box_gap(const BoundingBox& a, const BoundingBox& b) {
    const int gx = std::max(std::max(a.x_min, b.x_min) - std::min(a.x_max, b.x_max), 0);
    const int gy = std::max(std::max(a.y_min, b.y_min) - std::min(a.y_max, b.y_max), 0);
    return std::max(gx, gy);
}

inline long long box_intersection(const BoundingBox& a, const BoundingBox& b) {
    const long long ix =
        std::max(0LL, static_cast<long long>(std::min(a.x_max, b.x_max)) -
                          static_cast<long long>(std::max(a.x_min, b.x_min)));
    const long long iy =
        std::max(0LL, static_cast<long long>(std::min(a.y_max, b.y_max)) -
                          static_cast<long long>(std::max(a.y_min, b.y_min)));
    return ix * iy;
}

inline void sort_boxes(std::vector<BoundingBox>& boxes) {
    std::sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
        return std::tie(a.y_min, a.x_min, a.y_max, a.x_max) <
               std::tie(b.y_min, b.x_min, b.y_max, b.x_max);
    });
}

inline double quant_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Linear-power view plus noise statistics shared by rescue and refinement.
// The idle-row mean and its deviation are measured from the image itself (the
// window-induced bin correlation makes the deviation larger than 1/sqrt(W)).
struct LinearView {
    int rows = 0, cols = 0;
    std::vector<double> lin;       // 10^(dB/10)
    std::vector<double> row_mean;  // per-row mean over all columns
    double noise_mean = 0.0;       // mean noise power per pixel
    double row_sigma = 0.0;        // deviation of an idle row's mean

    double at(int r, int c) const {
        return lin[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                   static_cast<std::size_t>(c)];
    }
};

inline LinearView make_linear_view(const Spectrogram& spec, double gate_sigmas) {
    LinearView v;
    v.rows = spec.rows;
    v.cols = spec.cols;
    v.lin.resize(spec.power_db.size());
    for (std::size_t i = 0; i < spec.power_db.size(); ++i)
        v.lin[i] = db_to_power(spec.power_db[i]);
    v.row_mean.resize(static_cast<std::size_t>(spec.rows));
    for (int r = 0; r < spec.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < spec.cols; ++c) acc += v.at(r, c);
        v.row_mean[static_cast<std::size_t>(r)] = acc / static_cast<double>(spec.cols);
    }
    // robust initial centre/spread from quartiles, then one refinement pass
    // over the rows below the activity gate
    std::vector<double> rm(v.row_mean);
    std::sort(rm.begin(), rm.end());
    const double q25 = quant_sorted(rm, 0.25);
    const double q50 = quant_sorted(rm, 0.50);
    double mu = q50;
    double sigma = std::max((q50 - q25) / 0.6745, 1e-12 * std::max(q50, 1e-300));
    for (int pass = 0; pass < 2; ++pass) {
        const double gate = mu + gate_sigmas * sigma;
        double acc = 0.0, acc2 = 0.0;
        std::size_t n_idle = 0;
        for (double m : v.row_mean) {
            if (m > gate) continue;
            acc += m;
            acc2 += m * m;
            ++n_idle;
        }
        if (n_idle < 2) break;
        mu = acc / static_cast<double>(n_idle);
        const double var = acc2 / static_cast<double>(n_idle) - mu * mu;
        sigma = std::sqrt(std::max(var, 1e-24 * mu * mu));
    }
    v.noise_mean = mu;
    v.row_sigma = sigma;
    return v;
}

// Marginal-projection candidates for frames the pixel mask missed. Row
// activity integrates the whole band, so a frame at total SNR near 0 dB still
// lifts its rows several sigma above idle rows. The frequency extent of a run
// comes from the cumulative sum of the mean-removed column profile: a band
// occupying [a,b) makes the cusum ramp up exactly there, so (argmin, argmax]
// estimates the extent with full in-band integration behind it.
inline std::vector<BoundingBox> projection_candidates(const LinearView& v,
                                                      const DetectorConfig& cfg) {
    std::vector<BoundingBox> out;
    const double mu = v.noise_mean;
    if (mu <= 0.0 || v.rows < 1 || v.cols < 2) return out;

    // activity: single-row gate, or a two-row pooled gate for thin frames
    const double single_gate = mu + cfg.row_gate_sigmas * v.row_sigma;
    const double pooled_gate =
        mu + cfg.pooled_gate_sigmas * v.row_sigma / std::sqrt(2.0);
    std::vector<std::uint8_t> active(static_cast<std::size_t>(v.rows), 0);
    for (int r = 0; r < v.rows; ++r) {
        if (v.row_mean[static_cast<std::size_t>(r)] > single_gate)
            active[static_cast<std::size_t>(r)] = 1;
        if (r + 1 < v.rows) {
            const double pooled = (v.row_mean[static_cast<std::size_t>(r)] +
                                   v.row_mean[static_cast<std::size_t>(r + 1)]) /
                                  2.0;
            if (pooled > pooled_gate) {
                active[static_cast<std::size_t>(r)] = 1;
                active[static_cast<std::size_t>(r + 1)] = 1;
            }
        }
    }

    int r = 0;
    while (r < v.rows) {
        if (!active[static_cast<std::size_t>(r)]) { ++r; continue; }
        int r1 = r;
        while (r1 < v.rows && active[static_cast<std::size_t>(r1)]) ++r1;
        const int n_rows = r1 - r;

        std::vector<double> col_profile(static_cast<std::size_t>(v.cols), 0.0);
        for (int rr = r; rr < r1; ++rr)
            for (int c = 0; c < v.cols; ++c)
                col_profile[static_cast<std::size_t>(c)] += v.at(rr, c);
        for (auto& p : col_profile) p /= static_cast<double>(n_rows);

        // cusum extent: b = argmax S, a = argmin S over [0, b]
        std::vector<double> cusum(static_cast<std::size_t>(v.cols) + 1, 0.0);
        for (int c = 0; c < v.cols; ++c)
            cusum[static_cast<std::size_t>(c) + 1] =
                cusum[static_cast<std::size_t>(c)] +
                (col_profile[static_cast<std::size_t>(c)] - mu);
        int b_edge = 0;
        for (int c = 1; c <= v.cols; ++c)
            if (cusum[static_cast<std::size_t>(c)] >
                cusum[static_cast<std::size_t>(b_edge)])
                b_edge = c;
        int a_edge = 0;
        for (int c = 0; c < b_edge; ++c)
            if (cusum[static_cast<std::size_t>(c)] <
                cusum[static_cast<std::size_t>(a_edge)])
                a_edge = c;

        const int width = b_edge - a_edge;
        if (width >= 2) {
            // integrated lift test, calibrated from the measured idle-row
            // deviation: var(mean over w cols, n rows) = row_sigma^2 * W/(n*w)
            const double lift = (cusum[static_cast<std::size_t>(b_edge)] -
                                 cusum[static_cast<std::size_t>(a_edge)]) /
                                static_cast<double>(width);
            const double sigma_lift =
                v.row_sigma * std::sqrt(static_cast<double>(v.cols) /
                                        (static_cast<double>(n_rows) *
                                         static_cast<double>(width)));
            if (lift >= 4.0 * sigma_lift) {
                // tighten rows inside the column range at half level
                std::vector<double> prof2;
                prof2.reserve(static_cast<std::size_t>(n_rows));
                for (int rr = r; rr < r1; ++rr) {
                    double racc = 0.0;
                    for (int cc = a_edge; cc < b_edge; ++cc) racc += v.at(rr, cc);
                    prof2.push_back(racc / static_cast<double>(width));
                }
                std::vector<double> p2(prof2);
                std::sort(p2.begin(), p2.end());
                const double l2 = quant_sorted(p2, 0.75);
                const double thr2 = mu + 0.5 * (l2 - mu);
                int a = 0, b = n_rows;
                while (a < b && prof2[static_cast<std::size_t>(a)] < thr2) ++a;
                while (b > a && prof2[static_cast<std::size_t>(b - 1)] < thr2) --b;
                if (b > a)
                    out.push_back(
                        BoundingBox{a_edge, b_edge, r + a, r + b, RatClass::Unknown});
            }
        }
        r = r1;
    }
    sort_boxes(out);
    return out;
}

// Half-power edge placement on the raw linear image. Each axis snaps to the
// contiguous above-half-level run with the most integrated power inside a
// padded search range; isolated leakage columns (including the cyclic wrap of
// a band-edge frame onto the opposite edge) form weak side runs and lose.
// Refinement only engages on clearly lifted boxes; faint ones keep the
// extents the projection stage integrated for.
inline BoundingBox refine_box(const LinearView& v, BoundingBox box, int pad = 2,
                              int merge_gap = 4) {
    const double mu = v.noise_mean;

    auto snap = [&](int lo, int hi, int range_lo, int range_hi,
                    auto&& marg) -> std::pair<int, int> {
        std::vector<double> inside;
        for (int i = lo; i < hi; ++i) inside.push_back(marg(i));
        std::sort(inside.begin(), inside.end());
        const double level = quant_sorted(inside, 0.5);
        if (level <= mu * 3.0) return {lo, hi};
        const double thr = mu + 0.5 * (level - mu);

        struct Run {
            int lo, hi;
            double power;
        };
        std::vector<Run> runs;
        int i = range_lo;
        while (i < range_hi) {
            if (marg(i) < thr) { ++i; continue; }
            Run run{i, i + 1, marg(i) - mu};
            int gap = 0;
            int k = i + 1;
            while (k < range_hi) {
                const double m = marg(k);
                if (m >= thr) {
                    run.hi = k + 1;
                    run.power += m - mu;
                    gap = 0;
                } else if (++gap > merge_gap) {
                    break;
                }
                ++k;
            }
            runs.push_back(run);
            i = run.hi + gap + 1;
        }
        if (runs.empty()) return {lo, hi};
        const auto best = std::max_element(
            runs.begin(), runs.end(),
            [](const Run& a, const Run& b) { return a.power < b.power; });
        return {best->lo, best->hi};
    };

    auto col_marg = [&](int c) {
        double acc = 0.0;
        for (int r = box.y_min; r < box.y_max; ++r) acc += v.at(r, c);
        return acc / static_cast<double>(box.y_max - box.y_min);
    };
    const auto [x0, x1] =
        snap(box.x_min, box.x_max, std::max(0, box.x_min - pad),
             std::min(v.cols, box.x_max + pad), col_marg);
    box.x_min = x0;
    box.x_max = x1;

    auto row_marg = [&](int r) {
        double acc = 0.0;
        for (int c = box.x_min; c < box.x_max; ++c) acc += v.at(r, c);
        return acc / static_cast<double>(box.x_max - box.x_min);
    };
    const auto [y0, y1] =
        snap(box.y_min, box.y_max, std::max(0, box.y_min - 1),
             std::min(v.rows, box.y_max + 1), row_marg);
    box.y_min = y0;
    box.y_max = y1;
    return box;
}

} // namespace detail

// Mask at floor + threshold, 4-connected components, merge, area filter.
inline std::vector<BoundingBox> segment(const Spectrogram& spec, const DetectorConfig& cfg) {
    cfg.validate();
    const double thr = estimate_noise_floor(spec) + cfg.threshold_db_above_floor;
    const int rows = spec.rows, cols = spec.cols;

    std::vector<std::uint8_t> mask(spec.power_db.size());
    for (std::size_t i = 0; i < spec.power_db.size(); ++i)
        mask[i] = spec.power_db[i] > thr ? 1 : 0;

    std::vector<BoundingBox> boxes;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                                    static_cast<std::size_t>(c);
            if (!mask[idx] || seen[idx]) continue;
            BoundingBox box{c, c + 1, r, r + 1, RatClass::Unknown};
            queue.emplace_back(r, c);
            seen[idx] = 1;
            while (!queue.empty()) {
                const auto [pr, pc] = queue.front();
                queue.pop_front();
                box.x_min = std::min(box.x_min, pc);
                box.x_max = std::max(box.x_max, pc + 1);
                box.y_min = std::min(box.y_min, pr);
                box.y_max = std::max(box.y_max, pr + 1);
                const int neighbours[4][2] = {
                    {pr - 1, pc}, {pr + 1, pc}, {pr, pc - 1}, {pr, pc + 1}};
                for (const auto& nb : neighbours) {
                    const int nr = nb[0], nc = nb[1];
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    const std::size_t nidx =
                        static_cast<std::size_t>(nr) * static_cast<std::size_t>(cols) +
                        static_cast<std::size_t>(nc);
                    if (!mask[nidx] || seen[nidx]) continue;
                    seen[nidx] = 1;
                    queue.emplace_back(nr, nc);
                }
            }
            boxes.push_back(box);
        }
    }

    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
            for (std::size_t k = i + 1; k < boxes.size(); ++k) {
                if (detail::box_gap(boxes[i], boxes[k]) < cfg.merge_gap) {
                    boxes[i].x_min = std::min(boxes[i].x_min, boxes[k].x_min);
                    boxes[i].x_max = std::max(boxes[i].x_max, boxes[k].x_max);
                    boxes[i].y_min = std::min(boxes[i].y_min, boxes[k].y_min);
                    boxes[i].y_max = std::max(boxes[i].y_max, boxes[k].y_max);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(k));
                    merged = true;
                    break;
                }
            }
        }
    }
    std::erase_if(boxes, [&](const BoundingBox& b) {
        return b.area() < static_cast<long long>(cfg.min_box_area);
    });
    detail::sort_boxes(boxes);
    return boxes;
}

// Per-box features for the rule classifier.
struct BoxFeatures {
    double fd_s = 0.0;
    double bw_hz = 0.0;
    double flatness = 0.0;  // geometric/arithmetic mean of in-box linear power
};

inline BoxFeatures box_features(const Spectrogram& spec, const BoundingBox& box) {
    BoxFeatures f;
    f.fd_s = static_cast<double>(box.y_max - box.y_min) * spec.axes.i_t();
    f.bw_hz = static_cast<double>(box.x_max - box.x_min) * spec.axes.i_f();
    double log_acc = 0.0, lin_acc = 0.0;
    long long n = 0;
    for (int r = box.y_min; r < box.y_max; ++r)
        for (int c = box.x_min; c < box.x_max; ++c) {
            const double p = db_to_power(spec.at(r, c));
            log_acc += std::log(p);
            lin_acc += p;
            ++n;
        }
    if (n > 0) {
        const double geo = std::exp(log_acc / static_cast<double>(n));
        const double arith = lin_acc / static_cast<double>(n);
        f.flatness = arith > 0.0 ? geo / arith : 0.0;
    }
    return f;
}

// First matching rule assigns the class; confidence is the rule margin
// normalised to [0,1] (distance of each constrained feature from its bound).
inline std::pair<RatClass, double> classify(const Spectrogram& spec, const BoundingBox& box,
                                            const std::vector<ClassifierRule>& rules) {
    const BoxFeatures f = box_features(spec, box);
    for (const auto& rule : rules) {
        double margin = 1.0;
        bool ok = true;
        auto check = [&](const std::optional<double>& lo, const std::optional<double>& hi,
                         double v) {
            if (!ok) return;
            if (lo) {
                if (v < *lo) { ok = false; return; }
                margin = std::min(margin, std::clamp((v - *lo) / std::max(*lo, 1e-12), 0.0, 1.0));
            }
            if (hi) {
                if (v > *hi) { ok = false; return; }
                margin = std::min(margin, std::clamp((*hi - v) / std::max(*hi, 1e-12), 0.0, 1.0));
            }
        };
        check(rule.fd_min_s, rule.fd_max_s, f.fd_s);
        check(rule.bw_min_hz, rule.bw_max_hz, f.bw_hz);
        check(rule.flatness_min, rule.flatness_max, f.flatness);
        if (ok) return {rule.cls, margin};
    }
    return {RatClass::Unknown, 0.0};
}

// Full detector: segmentation, optional rescue and refinement, classification.
inline std::vector<Detection> detect(const Spectrogram& spec, const DetectorConfig& cfg) {
    cfg.validate();
    std::vector<BoundingBox> boxes = segment(spec, cfg);

    const auto view = detail::make_linear_view(spec, cfg.row_gate_sigmas);
    if (cfg.projection_rescue) {
        const auto candidates = detail::projection_candidates(view, cfg);
        for (const auto& cand : candidates) {
            // absorb component boxes lying mostly inside the candidate
            std::erase_if(boxes, [&](const BoundingBox& b) {
                return b.area() > 0 &&
                       static_cast<double>(detail::box_intersection(b, cand)) >=
                           0.5 * static_cast<double>(b.area());
            });
            bool duplicate = false;
            for (const auto& b : boxes) {
                const long long inter = detail::box_intersection(b, cand);
                const long long uni = b.area() + cand.area() - inter;
                if (uni > 0 && static_cast<double>(inter) / static_cast<double>(uni) >= 0.5) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) boxes.push_back(cand);
        }
        detail::sort_boxes(boxes);
    }

    if (cfg.refine_edges)
        for (auto& b : boxes) b = detail::refine_box(view, b);

    std::vector<Detection> detections;
    detections.reserve(boxes.size());
    for (auto& b : boxes) {
        const auto [cls, confidence] = classify(spec, b, cfg.rules);
        b.cls = cls;
        detections.push_back(Detection{b, confidence});
    }
    std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.box.y_min, a.box.x_min, a.box.y_max, a.box.x_max) <
               std::tie(b.box.y_min, b.box.x_min, b.box.y_max, b.box.x_max);
    });
    return detections;
}

} // namespace specbox
