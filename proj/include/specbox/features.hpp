#pragma once

// Bounding box -> physical transmission features:
//   b_w = (x_max - x_min) * I_f
//   f_c = f1 + I_f * x_min + b_w / 2
//   FD  = (y_max - y_min) * I_t
//   CWT = (t2 - t1) - frame_count * mean_fd
//   FI  = CWT / frame_count
// frame_count is the number of frames visible in the spectrogram and mean_fd
// their mean duration.

#include <cmath>
#include <optional>
#include <vector>

#include "specbox/annotate.hpp"
#include "specbox/common.hpp"
#include "specbox/spectro.hpp"

namespace specbox {

struct ExtractedFeatures {
    double b_w = 0.0;  // Hz
    double f_c = 0.0;  // Hz, relative to band start like FrameSpec.f_center
    double fd = 0.0;   // seconds
};

struct FrameSetStats {
    std::size_t frame_count = 0;
    double mean_fd = 0.0;  // 0 when frame_count is 0
};

struct SetFeatures {
    FrameSetStats stats;
    double cwt = 0.0;              // channel-without-transmission time
    std::optional<double> fi;      // absent when frame_count is 0
    bool cwt_clamped = false;      // overlapping boxes drove CWT negative
};

inline ExtractedFeatures extract_box_features(const BoundingBox& box,
                                              const SpectrogramAxes& axes) {
    axes.validate();
    if (box.x_max <= box.x_min || box.y_max <= box.y_min)
        throw DegenerateBox("box has zero extent");
    ExtractedFeatures out;
    const double i_f = axes.i_f();
    const double i_t = axes.i_t();
    out.b_w = static_cast<double>(box.x_max - box.x_min) * i_f;
    out.f_c = axes.f1 + i_f * static_cast<double>(box.x_min - axes.x_min) + out.b_w / 2.0;
    out.fd = static_cast<double>(box.y_max - box.y_min) * i_t;
    return out;
}

inline SetFeatures extract_set_features(const std::vector<BoundingBox>& boxes,
                                        const SpectrogramAxes& axes) {
    axes.validate();
    SetFeatures out;
    out.stats.frame_count = boxes.size();
    const double span = axes.t2 - axes.t1;
    if (boxes.empty()) {
        out.cwt = span;
        return out;
    }
    double fd_acc = 0.0;
    for (const auto& b : boxes) fd_acc += extract_box_features(b, axes).fd;
    out.stats.mean_fd = fd_acc / static_cast<double>(boxes.size());
    out.cwt = span - static_cast<double>(out.stats.frame_count) * out.stats.mean_fd;
    if (out.cwt < 0.0) {
        out.cwt = 0.0;
        out.cwt_clamped = true;
    }
    out.fi = out.cwt / static_cast<double>(out.stats.frame_count);
    return out;
}

// ---------------------------------------------------------------------------
// Deviation from ground truth, in percent.

struct Deviation {
    double pct = 0.0;
    bool absolute = false;  // truth (reference) was zero; value is |error|
};

inline Deviation deviation_pct(double extracted, double truth, double reference) {
    if (reference <= 0.0) return {std::abs(extracted - truth), true};
    return {std::abs(extracted - truth) / reference * 100.0, false};
}

struct BoxDeviation {
    Deviation b_w;
    Deviation f_c;  // relative to band width
    Deviation fd;
};

inline BoxDeviation feature_deviation(const ExtractedFeatures& extracted,
                                      const FrameSpec& truth, double band_width) {
    BoxDeviation d;
    d.b_w = deviation_pct(extracted.b_w, truth.bandwidth, truth.bandwidth);
    d.f_c = deviation_pct(extracted.f_c, truth.f_center, band_width);
    d.fd = deviation_pct(extracted.fd, truth.duration, truth.duration);
    return d;
}

} // namespace specbox
