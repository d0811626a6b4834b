#pragma once

// Self-contained FFT: iterative radix-2 with a Bluestein chirp-z fallback for
// arbitrary transform sizes (the default STFT width 104 and the OFDM symbol
// lengths used here are not powers of two).

#include <cstddef>
#include <vector>

#include "specbox/common.hpp"

namespace specbox {

class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n_ == 0) throw InvalidSpec("fft size must be positive");
        pow2_ = (n_ & (n_ - 1)) == 0;
        m_ = pow2_ ? n_ : next_pow2(2 * n_ - 1);
        init_pow2_tables(m_);
        if (!pow2_) init_bluestein();
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<cdouble>& x) const { transform(x, false); }

    void inverse(std::vector<cdouble>& x) const {
        for (auto& v : x) v = std::conj(v);
        transform(x, false);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : x) v = std::conj(v) * s;
    }

private:
    static std::size_t next_pow2(std::size_t v) {
        std::size_t p = 1;
        while (p < v) p <<= 1;
        return p;
    }

    void init_pow2_tables(std::size_t m) {
        rev_.resize(m);
        rev_[0] = 0;
        for (std::size_t i = 1; i < m; ++i)
            rev_[i] = (rev_[i >> 1] >> 1) | ((i & 1) ? m >> 1 : 0);
        roots_.resize(m / 2);
        for (std::size_t k = 0; k < m / 2; ++k) {
            const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(m);
            roots_[k] = {std::cos(a), std::sin(a)};
        }
    }

    void init_bluestein() {
        chirp_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            // exponent taken mod 2n to keep sin/cos arguments small
            const std::size_t q = (i * i) % (2 * n_);
            const double a = -kPi * static_cast<double>(q) / static_cast<double>(n_);
            chirp_[i] = {std::cos(a), std::sin(a)};
        }
        std::vector<cdouble> b(m_, cdouble{0.0, 0.0});
        b[0] = std::conj(chirp_[0]);
        for (std::size_t i = 1; i < n_; ++i)
            b[i] = b[m_ - i] = std::conj(chirp_[i]);
        fft_pow2(b, false);
        chirp_fft_ = std::move(b);
    }

    void fft_pow2(std::vector<cdouble>& x, bool inv) const {
        const std::size_t m = x.size();
        for (std::size_t i = 0; i < m; ++i)
            if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
        for (std::size_t len = 2; len <= m; len <<= 1) {
            const std::size_t stride = m / len;
            for (std::size_t blk = 0; blk < m; blk += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    cdouble w = roots_[j * stride];
                    if (inv) w = std::conj(w);
                    const cdouble u = x[blk + j];
                    const cdouble t = x[blk + j + len / 2] * w;
                    x[blk + j] = u + t;
                    x[blk + j + len / 2] = u - t;
                }
            }
        }
    }

    void transform(std::vector<cdouble>& x, bool) const {
        if (x.size() != n_) throw InvalidSpec("fft input size mismatch");
        if (pow2_) {
            fft_pow2(x, false);
            return;
        }
        std::vector<cdouble> a(m_, cdouble{0.0, 0.0});
        for (std::size_t i = 0; i < n_; ++i) a[i] = x[i] * chirp_[i];
        fft_pow2(a, false);
        for (std::size_t i = 0; i < m_; ++i) a[i] *= chirp_fft_[i];
        // inverse of the padded convolution
        for (auto& v : a) v = std::conj(v);
        fft_pow2(a, false);
        const double s = 1.0 / static_cast<double>(m_);
        for (std::size_t k = 0; k < n_; ++k)
            x[k] = std::conj(a[k]) * s * chirp_[k];
    }

    std::size_t n_, m_;
    bool pow2_;
    std::vector<std::size_t> rev_;
    std::vector<cdouble> roots_;
    std::vector<cdouble> chirp_;
    std::vector<cdouble> chirp_fft_;
};

// Spectral column -> FFT bin index so that column 0 is the lowest (most
// negative baseband) frequency. Works for even and odd sizes.
inline std::size_t shifted_bin(std::size_t col, std::size_t n) {
    return (col + (n + 1) / 2) % n;
}

} // namespace specbox
