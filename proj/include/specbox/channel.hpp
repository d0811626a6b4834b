#pragma once

// Calibrated channel impairments: AWGN at a target SNR, carrier frequency
// offset, multipath, soft gain and pulse-shape filtering. All operations are
// pure; chains apply strictly in listed order and serialise into record
// metadata for provenance.

#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "specbox/common.hpp"
#include "specbox/types.hpp"

namespace specbox {

// SNR is defined over signal-occupied samples (|x| > 0); noise is added over
// the whole record so the spectrogram noise floor stays uniform.
inline IQRecord apply_awgn(const IQRecord& rec, double target_snr_db, std::uint64_t seed) {
    if (std::isinf(target_snr_db) && target_snr_db > 0.0) return rec;

    double sig_acc = 0.0;
    std::size_t occupied = 0;
    for (const auto& v : rec.samples) {
        const double p = std::norm(static_cast<cdouble>(v));
        if (p > 0.0) {
            sig_acc += p;
            ++occupied;
        }
    }
    if (occupied == 0) throw CannotCalibrateSnr("record has no nonzero samples");

    const double sig_power = sig_acc / static_cast<double>(occupied);
    const double noise_power = sig_power / db_to_power(target_snr_db);
    const double sigma = std::sqrt(noise_power);

    Rng rng(seed);
    IQRecord out = rec;
    for (auto& v : out.samples) {
        const cdouble n = rng.complex_normal() * sigma;
        v = static_cast<cfloat>(static_cast<cdouble>(v) + n);
    }
    return out;
}

inline IQRecord apply_cfo(const IQRecord& rec, double offset_hz) {
    if (std::abs(offset_hz) >= rec.sample_rate / 2.0)
        throw InvalidSpec("cfo beyond +-fs/2");
    IQRecord out = rec;
    const double w = kTwoPi * offset_hz / rec.sample_rate;
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        const double ph = w * static_cast<double>(n);
        const cdouble rot{std::cos(ph), std::sin(ph)};
        out.samples[n] = static_cast<cfloat>(static_cast<cdouble>(rec.samples[n]) * rot);
    }
    return out;
}

inline IQRecord apply_multipath(const IQRecord& rec, const std::vector<cdouble>& taps) {
    if (taps.empty()) throw InvalidTaps("multipath taps must be nonempty");
    IQRecord out = rec;
    const std::size_t n = rec.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        cdouble acc{0.0, 0.0};
        const std::size_t kmax = std::min(taps.size(), i + 1);
        for (std::size_t k = 0; k < kmax; ++k)
            acc += taps[k] * static_cast<cdouble>(rec.samples[i - k]);
        out.samples[i] = static_cast<cfloat>(acc);
    }
    return out;
}

inline IQRecord apply_gain(const IQRecord& rec, double db) {
    IQRecord out = rec;
    const auto g = static_cast<float>(db_to_amplitude(db));
    for (auto& v : out.samples) v *= g;
    return out;
}

inline IQRecord apply_filter(const IQRecord& rec, const std::vector<double>& taps) {
    if (taps.empty()) throw InvalidTaps("filter taps must be nonempty");
    std::vector<cdouble> ctaps(taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) ctaps[i] = {taps[i], 0.0};
    return apply_multipath(rec, ctaps);
}

// ---------------------------------------------------------------------------
// Impairment chains

struct AwgnSnr { double target_snr_db; };
struct Cfo { double offset_hz; };
struct Multipath { std::vector<cdouble> taps; };
struct Gain { double db; };
struct ShapeFilter { std::vector<double> taps; };

using Impairment = std::variant<AwgnSnr, Cfo, Multipath, Gain, ShapeFilter>;

struct ImpairmentChain {
    std::vector<Impairment> steps;
    std::uint64_t noise_seed = 0;

    IQRecord apply(const IQRecord& rec) const {
        IQRecord out = rec;
        std::size_t step_index = 0;
        for (const auto& step : steps) {
            const std::uint64_t seed = mix_seed(noise_seed, step_index);
            out = std::visit(
                [&](const auto& s) -> IQRecord {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, AwgnSnr>)
                        return apply_awgn(out, s.target_snr_db, seed);
                    else if constexpr (std::is_same_v<T, Cfo>)
                        return apply_cfo(out, s.offset_hz);
                    else if constexpr (std::is_same_v<T, Multipath>)
                        return apply_multipath(out, s.taps);
                    else if constexpr (std::is_same_v<T, Gain>)
                        return apply_gain(out, s.db);
                    else
                        return apply_filter(out, s.taps);
                },
                step);
            ++step_index;
        }
        out.meta["impairments"] = to_json(*this);
        return out;
    }

    static json to_json(const ImpairmentChain& chain) {
        json steps = json::array();
        for (const auto& step : chain.steps) {
            std::visit(
                [&](const auto& s) {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, AwgnSnr>)
                        steps.push_back({{"type", "awgn_snr"}, {"snr_db", s.target_snr_db}});
                    else if constexpr (std::is_same_v<T, Cfo>)
                        steps.push_back({{"type", "cfo"}, {"offset_hz", s.offset_hz}});
                    else if constexpr (std::is_same_v<T, Multipath>) {
                        json taps = json::array();
                        for (const auto& t : s.taps) taps.push_back({t.real(), t.imag()});
                        steps.push_back({{"type", "multipath"}, {"taps", taps}});
                    } else if constexpr (std::is_same_v<T, Gain>)
                        steps.push_back({{"type", "gain"}, {"db", s.db}});
                    else
                        steps.push_back({{"type", "filter"}, {"taps", s.taps}});
                },
                step);
        }
        return {{"noise_seed", chain.noise_seed}, {"steps", steps}};
    }

    static ImpairmentChain from_json(const json& j) {
        ImpairmentChain chain;
        chain.noise_seed = j.value("noise_seed", std::uint64_t{0});
        for (const auto& step : j.at("steps")) {
            const auto type = step.at("type").get<std::string>();
            if (type == "awgn_snr") {
                chain.steps.emplace_back(AwgnSnr{step.at("snr_db").get<double>()});
            } else if (type == "cfo") {
                chain.steps.emplace_back(Cfo{step.at("offset_hz").get<double>()});
            } else if (type == "multipath") {
                Multipath m;
                for (const auto& t : step.at("taps"))
                    m.taps.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
                chain.steps.emplace_back(std::move(m));
            } else if (type == "gain") {
                chain.steps.emplace_back(Gain{step.at("db").get<double>()});
            } else if (type == "filter") {
                chain.steps.emplace_back(ShapeFilter{step.at("taps").get<std::vector<double>>()});
            } else {
                throw ParseError("unknown impairment type: " + type);
            }
        }
        return chain;
    }
};

} // namespace specbox
