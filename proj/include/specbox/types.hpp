#pragma once

// Core domain types shared across the toolkit: radio class labels, frame
// ground truth, transmission schedules and IQ sample records.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specbox/common.hpp"

namespace specbox {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Radio access technology classes. Lte/Wifi are built in; further classes can
// be registered at runtime and travel through labels and evaluation unchanged.

enum class RatClass : int {
    Unknown = -1,
    Lte = 0,
    Wifi = 1,
};

class ClassRegistry {
public:
    ClassRegistry() : names_{"lte", "wifi"} {}

    RatClass add(const std::string& name) {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<RatClass>(i);
        names_.push_back(name);
        return static_cast<RatClass>(names_.size() - 1);
    }

    std::string name(RatClass c) const {
        const int id = static_cast<int>(c);
        if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) return "unknown";
        return names_[static_cast<std::size_t>(id)];
    }

    std::optional<RatClass> parse(const std::string& name) const {
        if (name == "unknown") return RatClass::Unknown;
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<RatClass>(i);
        return std::nullopt;
    }

    std::size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
};

inline const ClassRegistry& default_registry() {
    static const ClassRegistry reg;
    return reg;
}

// ---------------------------------------------------------------------------
// Ground truth for one transmitted frame. Times are seconds, frequencies Hz
// relative to the band start (0 .. band_width).

struct FrameSpec {
    RatClass cls = RatClass::Lte;
    double t_start = 0.0;
    double duration = 0.0;     // FD ground truth
    double f_center = 0.0;     // Hz relative to band start
    double bandwidth = 0.0;
    double power_db = 0.0;     // per-frame RMS relative to unit amplitude
    std::uint64_t seed = 0;

    void validate() const {
        if (!(duration > 0.0)) throw InvalidSpec("frame duration must be > 0");
        if (!(bandwidth > 0.0)) throw InvalidSpec("frame bandwidth must be > 0");
        if (t_start < 0.0) throw InvalidSpec("frame t_start must be >= 0");
    }

    void validate_in_band(double band_width) const {
        validate();
        if (f_center - bandwidth / 2.0 < -1e-9 ||
            f_center + bandwidth / 2.0 > band_width + 1e-9)
            throw InvalidSpec("frame band edges outside [0, band_width]");
    }
};

inline void to_json(json& j, const FrameSpec& f) {
    j = json{{"class", default_registry().name(f.cls)},
             {"t_start", f.t_start},
             {"duration", f.duration},
             {"f_center", f.f_center},
             {"bandwidth", f.bandwidth},
             {"power_db", f.power_db},
             {"seed", f.seed}};
}

inline void from_json(const json& j, FrameSpec& f) {
    const auto cls = default_registry().parse(j.at("class").get<std::string>());
    if (!cls) throw ParseError("unknown frame class: " + j.at("class").get<std::string>());
    f.cls = *cls;
    f.t_start = j.at("t_start").get<double>();
    f.duration = j.at("duration").get<double>();
    f.f_center = j.at("f_center").get<double>();
    f.bandwidth = j.at("bandwidth").get<double>();
    f.power_db = j.value("power_db", 0.0);
    f.seed = j.value("seed", std::uint64_t{0});
}

// ---------------------------------------------------------------------------

struct TransmissionSchedule {
    double band_width = 20e6;   // Hz
    double sample_rate = 20e6;  // complex baseband, equal to band_width
    double span = 50e-3;        // seconds
    std::vector<FrameSpec> frames;

    // Frames of one emitter must not overlap in time; emitters here are one
    // per class, so the check is per class. Cross-class overlap is allowed
    // (interference scenarios).
    void validate() const {
        if (!(span > 0.0)) throw InvalidSpec("schedule span must be > 0");
        if (!(band_width > 0.0) || !(sample_rate > 0.0))
            throw InvalidSpec("schedule band_width/sample_rate must be > 0");
        for (const auto& f : frames) {
            f.validate_in_band(band_width);
            if (f.t_start + f.duration > span + 1e-12)
                throw FrameOutOfSpan("frame extends beyond schedule span");
        }
        for (std::size_t i = 0; i < frames.size(); ++i)
            for (std::size_t k = i + 1; k < frames.size(); ++k) {
                if (frames[i].cls != frames[k].cls) continue;
                const double a0 = frames[i].t_start, a1 = a0 + frames[i].duration;
                const double b0 = frames[k].t_start, b1 = b0 + frames[k].duration;
                if (a0 < b1 && b0 < a1)
                    throw InvalidSpec("same-emitter frames overlap in time");
            }
    }

    std::string hash() const;
};

inline void to_json(json& j, const TransmissionSchedule& s) {
    j = json{{"band_width", s.band_width},
             {"sample_rate", s.sample_rate},
             {"span", s.span},
             {"frames", s.frames}};
}

inline void from_json(const json& j, TransmissionSchedule& s) {
    s.band_width = j.at("band_width").get<double>();
    s.sample_rate = j.at("sample_rate").get<double>();
    s.span = j.at("span").get<double>();
    s.frames = j.at("frames").get<std::vector<FrameSpec>>();
}

inline std::string TransmissionSchedule::hash() const {
    json j = *this;
    return hex64(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Complex baseband sample buffer plus provenance metadata. The meta object is
// free-form JSON and is persisted in the IQ sidecar.

struct IQRecord {
    std::vector<cfloat> samples;
    double sample_rate = 0.0;
    json meta = json::object();

    double span() const {
        return sample_rate > 0.0
                   ? static_cast<double>(samples.size()) / sample_rate
                   : 0.0;
    }
};

} // namespace specbox
