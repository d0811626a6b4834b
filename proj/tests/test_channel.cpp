#include <catch2/catch_amalgamated.hpp>

#include "specbox/channel.hpp"
#include "specbox/waveforms.hpp"
#include "testutil.hpp"

using namespace specbox;

namespace {

IQRecord frame_record(std::uint64_t seed, double duration = 2e-3) {
    FrameSpec f;
    f.cls = RatClass::Lte;
    f.duration = duration;
    f.f_center = 10e6;
    f.bandwidth = 10e6;
    f.seed = seed;
    return synth_ofdm_frame(RatClass::Lte, f, 20e6);
}

IQRecord constant_one(std::size_t n, double fs = 20e6) {
    IQRecord rec;
    rec.sample_rate = fs;
    rec.samples.assign(n, cfloat{1.0f, 0.0f});
    return rec;
}

double empirical_snr_db(const IQRecord& clean, const IQRecord& noisy) {
    double sig = 0.0, noise = 0.0;
    std::size_t occupied = 0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
        const double p = std::norm(static_cast<cdouble>(clean.samples[i]));
        if (p > 0.0) {
            sig += p;
            ++occupied;
        }
        noise += std::norm(static_cast<cdouble>(noisy.samples[i]) -
                           static_cast<cdouble>(clean.samples[i]));
    }
    sig /= static_cast<double>(occupied);
    noise /= static_cast<double>(clean.samples.size());
    return 10.0 * std::log10(sig / noise);
}

} // namespace

TEST_CASE("awgn hits the target snr at -13 dB") {
    const auto clean = frame_record(1);
    const auto noisy = apply_awgn(clean, -13.0, 99);
    const double snr = empirical_snr_db(clean, noisy);
    REQUIRE(snr >= -13.2);
    REQUIRE(snr <= -12.8);
}

TEST_CASE("awgn calibration holds across the sweep range") {
    // property over random frames and targets in [-13, 35] dB
    Rng rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        const double target = rng.uniform(-13.0, 35.0);
        const auto clean = frame_record(100 + static_cast<std::uint64_t>(trial), 1e-3);
        const auto noisy = apply_awgn(clean, target, 1000 + static_cast<std::uint64_t>(trial));
        REQUIRE_THAT(empirical_snr_db(clean, noisy),
                     Catch::Matchers::WithinAbs(target, 0.2));
    }
}

TEST_CASE("awgn with +inf target is a bit-exact no-op") {
    const auto clean = frame_record(2);
    const auto out = apply_awgn(clean, std::numeric_limits<double>::infinity(), 5);
    REQUIRE(out.samples == clean.samples);
}

TEST_CASE("awgn is deterministic in the seed") {
    const auto clean = frame_record(3);
    const auto a = apply_awgn(clean, 0.0, 7);
    const auto b = apply_awgn(clean, 0.0, 7);
    REQUIRE(a.samples == b.samples);
    const auto c = apply_awgn(clean, 0.0, 8);
    REQUIRE(a.samples != c.samples);
}

TEST_CASE("awgn refuses an all-zero record") {
    IQRecord zeros;
    zeros.sample_rate = 20e6;
    zeros.samples.assign(1000, cfloat{0.0f, 0.0f});
    REQUIRE_THROWS_AS(apply_awgn(zeros, 10.0, 1), CannotCalibrateSnr);
}

TEST_CASE("cfo zero is the identity") {
    const auto rec = frame_record(4);
    const auto out = apply_cfo(rec, 0.0);
    REQUIRE(out.samples == rec.samples);
}

TEST_CASE("cfo then its inverse recovers the record") {
    const auto rec = frame_record(5, 1e-3);
    const auto out = apply_cfo(apply_cfo(rec, 37e3), -37e3);
    double err = 0.0;
    for (std::size_t i = 0; i < rec.samples.size(); ++i)
        err += std::norm(static_cast<cdouble>(out.samples[i]) -
                         static_cast<cdouble>(rec.samples[i]));
    REQUIRE(std::sqrt(err / static_cast<double>(rec.samples.size())) < 1e-6);
}

TEST_CASE("cfo at fs/4 cycles a constant record through 1, j, -1, -j") {
    const auto rec = constant_one(8);
    const auto out = apply_cfo(rec, rec.sample_rate / 4.0);
    const cfloat expect[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        REQUIRE_THAT(out.samples[i].real(),
                     Catch::Matchers::WithinAbs(expect[i % 4].real(), 1e-5));
        REQUIRE_THAT(out.samples[i].imag(),
                     Catch::Matchers::WithinAbs(expect[i % 4].imag(), 1e-5));
    }
}

TEST_CASE("cfo composes additively") {
    const auto rec = frame_record(6, 0.5e-3);
    const auto ab = apply_cfo(apply_cfo(rec, 11e3), 22e3);
    const auto sum = apply_cfo(rec, 33e3);
    double err = 0.0;
    for (std::size_t i = 0; i < rec.samples.size(); ++i)
        err += std::norm(static_cast<cdouble>(ab.samples[i]) -
                         static_cast<cdouble>(sum.samples[i]));
    REQUIRE(std::sqrt(err / static_cast<double>(rec.samples.size())) < 1e-6);
}

TEST_CASE("cfo precondition") {
    const auto rec = constant_one(16);
    REQUIRE_THROWS_AS(apply_cfo(rec, 10.1e6), InvalidSpec);
}

TEST_CASE("multipath with a unit tap is the identity") {
    const auto rec = frame_record(7, 0.2e-3);
    const auto out = apply_multipath(rec, {cdouble{1.0, 0.0}});
    REQUIRE(out.samples == rec.samples);
}

TEST_CASE("multipath on a unit impulse reproduces the taps") {
    IQRecord rec;
    rec.sample_rate = 20e6;
    rec.samples.assign(6, cfloat{0.0f, 0.0f});
    rec.samples[0] = {1.0f, 0.0f};
    const auto out = apply_multipath(rec, {cdouble{1.0, 0.0}, cdouble{0.0, 0.5}});
    REQUIRE_THAT(out.samples[0].real(), Catch::Matchers::WithinAbs(1.0, 1e-9));
    REQUIRE_THAT(out.samples[1].imag(), Catch::Matchers::WithinAbs(0.5, 1e-9));
    for (std::size_t i = 2; i < out.samples.size(); ++i)
        REQUIRE(std::abs(out.samples[i]) == 0.0f);
}

TEST_CASE("gain of -6.0206 dB halves the amplitudes") {
    const auto rec = constant_one(64);
    const auto out = apply_gain(rec, -6.0206);
    for (const auto& v : out.samples)
        REQUIRE_THAT(v.real(), Catch::Matchers::WithinAbs(0.5, 1e-6));
}

TEST_CASE("empty taps are rejected") {
    const auto rec = constant_one(16);
    REQUIRE_THROWS_AS(apply_multipath(rec, {}), InvalidTaps);
    REQUIRE_THROWS_AS(apply_filter(rec, {}), InvalidTaps);
}

TEST_CASE("chain order matters") {
    const auto rec = frame_record(8, 0.5e-3);
    ImpairmentChain gain_then_noise;
    gain_then_noise.noise_seed = 5;
    gain_then_noise.steps = {Gain{-10.0}, AwgnSnr{10.0}};
    ImpairmentChain noise_then_gain;
    noise_then_gain.noise_seed = 5;
    noise_then_gain.steps = {AwgnSnr{10.0}, Gain{-10.0}};
    const auto a = gain_then_noise.apply(rec);
    const auto b = noise_then_gain.apply(rec);
    REQUIRE(a.samples != b.samples);
}

TEST_CASE("chain serialises and deserialises") {
    ImpairmentChain chain;
    chain.noise_seed = 77;
    chain.steps = {Cfo{12.5e3}, Multipath{{cdouble{1, 0}, cdouble{0.25, -0.1}}},
                   Gain{-3.0}, ShapeFilter{{0.5, 0.5}}, AwgnSnr{15.0}};
    const json j = ImpairmentChain::to_json(chain);
    const auto back = ImpairmentChain::from_json(j);
    REQUIRE(ImpairmentChain::to_json(back) == j);

    // an applied chain records itself in the metadata
    const auto rec = frame_record(9, 0.2e-3);
    const auto out = chain.apply(rec);
    REQUIRE(out.meta.at("impairments") == j);
}
