#pragma once

// OFDM-parameterised waveform synthesis. The frames mimic the spectro-temporal
// signature of LTE and WiFi transmissions (subcarrier spacing, cyclic prefix,
// WiFi short-preamble power step) without implementing either PHY.

#include <algorithm>
#include <cmath>
#include <vector>

#include "specbox/common.hpp"
#include "specbox/fft.hpp"
#include "specbox/types.hpp"

namespace specbox {

struct OfdmProfile {
    double subcarrier_spacing_hz;
    double cp_fraction;        // cyclic prefix length relative to useful symbol
    double boost_db;           // amplitude step applied at frame start
    double boost_duration_s;
};

inline OfdmProfile ofdm_profile(RatClass cls) {
    switch (cls) {
    case RatClass::Wifi:
        // 802.11a-like: 312.5 kHz spacing, 1/4 guard interval, stronger
        // short-preamble-like leader for the first 16 us.
        return {312.5e3, 0.25, 3.0, 16e-6};
    case RatClass::Lte:
    default:
        // LTE-like: 15 kHz spacing, normal-CP ratio (144/2048).
        return {15e3, 144.0 / 2048.0, 0.0, 0.0};
    }
}

// Synthesise one frame at baseband (spectrally centred on 0 Hz). The result
// has round(duration * fs) samples and RMS 10^(power_db/20).
inline IQRecord synth_ofdm_frame(RatClass cls, const FrameSpec& spec, double sample_rate) {
    spec.validate();
    if (spec.bandwidth > sample_rate)
        throw BandExceeded("frame bandwidth exceeds sample rate");

    const auto n_total =
        static_cast<std::size_t>(std::llround(spec.duration * sample_rate));
    if (n_total == 0) throw InvalidSpec("frame shorter than one sample");

    const OfdmProfile prof = ofdm_profile(cls);
    const auto n_fft = static_cast<std::size_t>(
        std::llround(sample_rate / prof.subcarrier_spacing_hz));
    const double spacing = sample_rate / static_cast<double>(n_fft);
    const auto n_cp = static_cast<std::size_t>(
        std::llround(prof.cp_fraction * static_cast<double>(n_fft)));
    const std::size_t stride = n_fft + n_cp;

    // occupied subcarriers +-1..+-k around (skipped) DC
    auto k_half = static_cast<std::size_t>(spec.bandwidth / (2.0 * spacing));
    k_half = std::min(k_half, (n_fft - 1) / 2);
    k_half = std::max<std::size_t>(k_half, 1);

    Rng rng(spec.seed);
    Fft fft(n_fft);
    std::vector<cdouble> freq(n_fft);
    std::vector<cdouble> time(n_total + stride);

    const double qpsk = std::sqrt(0.5);
    std::size_t filled = 0;
    while (filled < n_total) {
        std::fill(freq.begin(), freq.end(), cdouble{0.0, 0.0});
        for (std::size_t k = 1; k <= k_half; ++k) {
            const auto bits = rng.bits();
            const double re0 = (bits & 1) ? qpsk : -qpsk;
            const double im0 = (bits & 2) ? qpsk : -qpsk;
            const double re1 = (bits & 4) ? qpsk : -qpsk;
            const double im1 = (bits & 8) ? qpsk : -qpsk;
            freq[k] = {re0, im0};
            freq[n_fft - k] = {re1, im1};
        }
        fft.inverse(freq);
        for (std::size_t i = 0; i < n_cp; ++i)
            time[filled + i] = freq[n_fft - n_cp + i];
        for (std::size_t i = 0; i < n_fft; ++i)
            time[filled + n_cp + i] = freq[i];
        filled += stride;
    }
    time.resize(n_total);

    if (prof.boost_db != 0.0 && prof.boost_duration_s > 0.0) {
        const double g = db_to_amplitude(prof.boost_db);
        const auto n_boost = std::min<std::size_t>(
            n_total,
            static_cast<std::size_t>(std::llround(prof.boost_duration_s * sample_rate)));
        for (std::size_t i = 0; i < n_boost; ++i) time[i] *= g;
    }

    double acc = 0.0;
    for (const auto& v : time) acc += std::norm(v);
    const double rms = std::sqrt(acc / static_cast<double>(n_total));
    const double scale = rms > 0.0 ? db_to_amplitude(spec.power_db) / rms : 0.0;

    IQRecord rec;
    rec.sample_rate = sample_rate;
    rec.samples.resize(n_total);
    for (std::size_t i = 0; i < n_total; ++i)
        rec.samples[i] = static_cast<cfloat>(time[i] * scale);
    rec.meta["class"] = default_registry().name(cls);
    rec.meta["seed"] = spec.seed;
    return rec;
}

// Render a full schedule: each frame synthesised at baseband, shifted to its
// centre frequency and placed at its start time. Accumulation happens in a
// double buffer in schedule order; idle regions stay exactly zero.
inline IQRecord render_schedule(const TransmissionSchedule& sched) {
    sched.validate();
    const double fs = sched.sample_rate;
    const auto n_span = static_cast<std::size_t>(std::llround(sched.span * fs));

    std::vector<cdouble> acc(n_span, cdouble{0.0, 0.0});
    for (const auto& frame : sched.frames) {
        const IQRecord fr = synth_ofdm_frame(frame.cls, frame, fs);
        const auto i0 = std::llround(frame.t_start * fs);
        if (i0 < 0 || static_cast<std::size_t>(i0) + fr.samples.size() > n_span)
            throw FrameOutOfSpan("frame outside schedule span");
        const double f_shift = frame.f_center - sched.band_width / 2.0;
        const double w = kTwoPi * f_shift / fs;
        for (std::size_t n = 0; n < fr.samples.size(); ++n) {
            const auto idx = static_cast<std::size_t>(i0) + n;
            const double ph = w * static_cast<double>(idx);
            const cdouble rot{std::cos(ph), std::sin(ph)};
            acc[idx] += static_cast<cdouble>(fr.samples[n]) * rot;
        }
    }

    IQRecord rec;
    rec.sample_rate = fs;
    rec.samples.resize(n_span);
    for (std::size_t i = 0; i < n_span; ++i)
        rec.samples[i] = static_cast<cfloat>(acc[i]);
    rec.meta["schedule"] = json(sched);
    rec.meta["schedule_hash"] = sched.hash();
    return rec;
}

} // namespace specbox
