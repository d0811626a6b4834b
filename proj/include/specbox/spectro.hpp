#pragma once

// Spectrogram computation and the exact pixel <-> (time, frequency) mapping
// used by every downstream consumer. Column 0 is the band start (-fs/2 in
// baseband terms), row 0 the earliest time. One pixel spans I_f Hz by I_t s:
//   I_f = (f2 - f1) / (X_max - X_min)
//   I_t = (t2 - t1) / (Y_max - Y_min)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "specbox/common.hpp"
#include "specbox/fft.hpp"
#include "specbox/types.hpp"

namespace specbox {

struct SpectrogramAxes {
    double f1 = 0.0, f2 = 0.0;  // Hz, band edges
    double t1 = 0.0, t2 = 0.0;  // seconds
    int x_min = 0, x_max = 0;   // pixel bounds, x = frequency axis
    int y_min = 0, y_max = 0;   // pixel bounds, y = time axis

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    double i_f() const { return (f2 - f1) / static_cast<double>(width()); }
    double i_t() const { return (t2 - t1) / static_cast<double>(height()); }

    void validate() const {
        if (!(f2 > f1) || !(t2 > t1)) throw InvalidSpec("axes must have positive extent");
        if (width() < 1 || height() < 1) throw InvalidSpec("axes must be at least 1x1");
    }

    // pixel-centre mapping and its inverse (bijective on pixel centres)
    double time_at_row(int row) const { return t1 + (row - y_min + 0.5) * i_t(); }
    double freq_at_col(int col) const { return f1 + (col - x_min + 0.5) * i_f(); }
    int row_at_time(double t) const {
        return y_min + static_cast<int>(std::floor((t - t1) / i_t()));
    }
    int col_at_freq(double f) const {
        return x_min + static_cast<int>(std::floor((f - f1) / i_f()));
    }

    bool operator==(const SpectrogramAxes&) const = default;
};

inline void to_json(json& j, const SpectrogramAxes& a) {
    j = json{{"f1", a.f1}, {"f2", a.f2}, {"t1", a.t1}, {"t2", a.t2},
             {"x_min", a.x_min}, {"x_max", a.x_max},
             {"y_min", a.y_min}, {"y_max", a.y_max}};
}

inline void from_json(const json& j, SpectrogramAxes& a) {
    a.f1 = j.at("f1").get<double>();
    a.f2 = j.at("f2").get<double>();
    a.t1 = j.at("t1").get<double>();
    a.t2 = j.at("t2").get<double>();
    a.x_min = j.at("x_min").get<int>();
    a.x_max = j.at("x_max").get<int>();
    a.y_min = j.at("y_min").get<int>();
    a.y_max = j.at("y_max").get<int>();
}

struct Spectrogram {
    SpectrogramAxes axes;
    int rows = 0, cols = 0;
    std::vector<float> power_db;  // row-major, rows = time, cols = frequency
    json meta = json::object();

    float at(int r, int c) const {
        return power_db[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                        static_cast<std::size_t>(c)];
    }
    float& at(int r, int c) {
        return power_db[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                        static_cast<std::size_t>(c)];
    }
};

enum class StftWindow { Hann, Rect };

struct StftParams {
    int fft_size = 104;   // W = 104 gives I_f = 20 MHz / 104 = 192.3077 kHz
    int hop = 10384;
    StftWindow window = StftWindow::Hann;
};

// STFT magnitude squared in dB, FFT-shifted so column 0 is the band start.
// H = floor((N - fft_size)/hop) + 1; zero bins clamp at -120 dBFS.
inline Spectrogram compute_spectrogram(const IQRecord& rec, int fft_size, int hop,
                                       StftWindow window = StftWindow::Hann) {
    if (fft_size < 1 || hop < 1) throw InvalidSpec("fft_size and hop must be >= 1");
    const std::size_t n = rec.samples.size();
    if (n < static_cast<std::size_t>(fft_size))
        throw TooShort("record shorter than fft_size");

    const int w = fft_size;
    const int h = static_cast<int>((n - static_cast<std::size_t>(fft_size)) /
                                   static_cast<std::size_t>(hop)) + 1;

    std::vector<double> win(static_cast<std::size_t>(w), 1.0);
    if (window == StftWindow::Hann)
        for (int i = 0; i < w; ++i)
            win[static_cast<std::size_t>(i)] =
                0.5 - 0.5 * std::cos(kTwoPi * i / static_cast<double>(w));

    Spectrogram spec;
    spec.rows = h;
    spec.cols = w;
    // Row r holds the window starting at sample r*hop, so the uniform Table-1
    // time mapping is exact with I_t = hop/fs; t2 extends to H*hop/fs (the
    // default 10384-sample hop at 20 MHz gives I_t = 519.2 us).
    spec.axes = SpectrogramAxes{0.0, rec.sample_rate, 0.0,
                                static_cast<double>(h) * static_cast<double>(hop) /
                                    rec.sample_rate,
                                0, w, 0, h};
    spec.power_db.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    spec.meta = json{{"fft_size", fft_size},
                     {"hop", hop},
                     {"window", window == StftWindow::Hann ? "hann" : "rect"}};

    Fft fft(static_cast<std::size_t>(w));
    std::vector<cdouble> buf(static_cast<std::size_t>(w));
    for (int r = 0; r < h; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * static_cast<std::size_t>(hop);
        for (int i = 0; i < w; ++i)
            buf[static_cast<std::size_t>(i)] =
                static_cast<cdouble>(rec.samples[base + static_cast<std::size_t>(i)]) *
                win[static_cast<std::size_t>(i)];
        fft.forward(buf);
        for (int c = 0; c < w; ++c) {
            const std::size_t k = shifted_bin(static_cast<std::size_t>(c),
                                              static_cast<std::size_t>(w));
            const double p = std::norm(buf[k]);
            spec.at(r, c) = static_cast<float>(std::max(power_to_db(p), -120.0));
        }
    }
    return spec;
}

inline Spectrogram compute_spectrogram(const IQRecord& rec, const StftParams& params) {
    return compute_spectrogram(rec, params.fft_size, params.hop, params.window);
}

// ---------------------------------------------------------------------------
// 8-bit grayscale export

struct GrayImage {
    int width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

inline GrayImage to_image(const Spectrogram& spec, double floor_db, double ceil_db) {
    if (!(ceil_db > floor_db)) throw InvalidSpec("ceil_db must exceed floor_db");
    GrayImage img;
    img.width = spec.cols;
    img.height = spec.rows;
    img.pixels.resize(spec.power_db.size());
    const double scale = 255.0 / (ceil_db - floor_db);
    for (std::size_t i = 0; i < spec.power_db.size(); ++i) {
        const double v = (spec.power_db[i] - floor_db) * scale;
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return img;
}

} // namespace specbox
