#pragma once

// Ground-truth bounding boxes from schedules, Pascal-VOC XML export/import and
// the predictions JSONL bridge for externally trained detectors.
//
// Pixel conventions: x = frequency (columns), y = time (rows); internal boxes
// are 0-based half-open; VOC files are 1-based inclusive (the converters own
// the +-1). Ground-truth edges round outward (floor/ceil) so boxes never
// underestimate a frame's extent.

#include <cmath>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "specbox/common.hpp"
#include "specbox/spectro.hpp"
#include "specbox/sync.hpp"
#include "specbox/types.hpp"

namespace specbox {

struct BoundingBox {
    int x_min = 0, x_max = 0;  // frequency axis
    int y_min = 0, y_max = 0;  // time axis
    RatClass cls = RatClass::Unknown;

    bool valid_in(const SpectrogramAxes& a) const {
        return a.x_min <= x_min && x_min < x_max && x_max <= a.x_max &&
               a.y_min <= y_min && y_min < y_max && y_max <= a.y_max;
    }
    long long area() const {
        return static_cast<long long>(x_max - x_min) * static_cast<long long>(y_max - y_min);
    }
    bool operator==(const BoundingBox&) const = default;
};

struct Detection {
    BoundingBox box;
    double confidence = 0.0;
};

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruth {
    std::vector<BoundingBox> boxes;
    int dropped = 0;  // frames fully outside the axes
};

// t_shift is added to every frame time before mapping (receive-side alignment
// from sync; 0 for loopback identity).
inline GroundTruth ground_truth_boxes(const TransmissionSchedule& sched,
                                      const SpectrogramAxes& axes,
                                      double t_shift = 0.0) {
    axes.validate();
    const double i_f = axes.i_f();
    const double i_t = axes.i_t();
    GroundTruth out;
    for (const auto& fr : sched.frames) {
        const double f_lo = fr.f_center - fr.bandwidth / 2.0;
        const double f_hi = fr.f_center + fr.bandwidth / 2.0;
        const double t_lo = fr.t_start + t_shift;
        const double t_hi = t_lo + fr.duration;

        BoundingBox b;
        b.cls = fr.cls;
        b.x_min = axes.x_min + static_cast<int>(std::floor((f_lo - axes.f1) / i_f));
        b.x_max = axes.x_min + static_cast<int>(std::ceil((f_hi - axes.f1) / i_f));
        b.y_min = axes.y_min + static_cast<int>(std::floor((t_lo - axes.t1) / i_t));
        b.y_max = axes.y_min + static_cast<int>(std::ceil((t_hi - axes.t1) / i_t));

        b.x_min = std::max(b.x_min, axes.x_min);
        b.x_max = std::min(b.x_max, axes.x_max);
        b.y_min = std::max(b.y_min, axes.y_min);
        b.y_max = std::min(b.y_max, axes.y_max);
        if (b.x_min >= b.x_max || b.y_min >= b.y_max) {
            ++out.dropped;
            continue;
        }
        out.boxes.push_back(b);
    }
    return out;
}

// Alignment from a sync result: shift = (detected - nominal) / fs.
inline GroundTruth ground_truth_boxes(const TransmissionSchedule& sched,
                                      const SpectrogramAxes& axes,
                                      const SyncResult& sync,
                                      std::size_t nominal_offset_samples = 0) {
    if (!sync.detected) throw RequiresDetection("ground truth alignment needs sync");
    const double shift = (static_cast<double>(sync.t_offset) -
                          static_cast<double>(nominal_offset_samples)) /
                         sched.sample_rate;
    return ground_truth_boxes(sched, axes, shift);
}

// ---------------------------------------------------------------------------
// Pascal VOC XML

struct VocImageRef {
    std::string filename;
    int width = 0, height = 0;
};

inline std::string export_voc(const VocImageRef& image,
                              const std::vector<BoundingBox>& boxes,
                              const ClassRegistry& reg = default_registry()) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    tree.put("annotation.folder", "");
    tree.put("annotation.filename", image.filename);
    tree.put("annotation.size.width", image.width);
    tree.put("annotation.size.height", image.height);
    tree.put("annotation.size.depth", 1);
    for (const auto& b : boxes) {
        pt::ptree obj;
        obj.put("name", reg.name(b.cls));
        obj.put("pose", "Unspecified");
        obj.put("truncated", 0);
        obj.put("difficult", 0);
        // 1-based inclusive: xmin = x_min + 1, xmax = x_max (half-open upper)
        obj.put("bndbox.xmin", b.x_min + 1);
        obj.put("bndbox.ymin", b.y_min + 1);
        obj.put("bndbox.xmax", b.x_max);
        obj.put("bndbox.ymax", b.y_max);
        tree.add_child("annotation.object", obj);
    }
    std::ostringstream os;
    pt::write_xml(os, tree,
                  pt::xml_writer_settings<std::string>(' ', 2));
    return os.str();
}

inline std::vector<BoundingBox> import_voc(const std::string& xml,
                                           const ClassRegistry& reg = default_registry()) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(xml);
    try {
        pt::read_xml(is, tree);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(std::string("voc xml: ") + e.message(),
                         static_cast<std::size_t>(e.line()));
    }
    std::vector<BoundingBox> boxes;
    const auto annotation = tree.get_child_optional("annotation");
    if (!annotation) throw ParseError("voc xml: missing <annotation> root");
    for (const auto& [key, node] : *annotation) {
        if (key != "object") continue;
        BoundingBox b;
        const auto name = node.get<std::string>("name");
        const auto cls = reg.parse(name);
        b.cls = cls ? *cls : RatClass::Unknown;
        b.x_min = node.get<int>("bndbox.xmin") - 1;
        b.y_min = node.get<int>("bndbox.ymin") - 1;
        b.x_max = node.get<int>("bndbox.xmax");
        b.y_max = node.get<int>("bndbox.ymax");
        if (b.x_min >= b.x_max || b.y_min >= b.y_max)
            throw ParseError("voc xml: degenerate bndbox for " + name);
        boxes.push_back(b);
    }
    return boxes;
}

// ---------------------------------------------------------------------------
// Predictions JSONL: one object per line
//   {"image": id, "class": name, "confidence": c,
//    "x_min": .., "x_max": .., "y_min": .., "y_max": ..}

struct PredictionRecord {
    std::string image;
    Detection det;
};

struct PredictionImport {
    std::vector<PredictionRecord> items;       // grouped by input order
    std::vector<std::string> rejected;         // per-record reasons, not fatal
};

inline PredictionImport import_predictions(std::istream& in,
                                           const ClassRegistry& reg = default_registry()) {
    PredictionImport out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("predictions jsonl: ") + e.what(), line_no);
        }
        auto reject = [&](const std::string& why) {
            out.rejected.push_back("line " + std::to_string(line_no) + ": " + why);
        };
        try {
            PredictionRecord rec;
            rec.image = j.at("image").get<std::string>();
            const auto cls_name = j.at("class").get<std::string>();
            const auto cls = reg.parse(cls_name);
            if (!cls) { reject("unknown class " + cls_name); continue; }
            rec.det.box.cls = *cls;
            rec.det.box.x_min = j.at("x_min").get<int>();
            rec.det.box.x_max = j.at("x_max").get<int>();
            rec.det.box.y_min = j.at("y_min").get<int>();
            rec.det.box.y_max = j.at("y_max").get<int>();
            rec.det.confidence = j.at("confidence").get<double>();
            if (rec.det.box.x_max <= rec.det.box.x_min ||
                rec.det.box.y_max <= rec.det.box.y_min) {
                reject("empty box");
                continue;
            }
            if (rec.det.box.x_min < 0 || rec.det.box.y_min < 0) {
                reject("negative pixel coordinates");
                continue;
            }
            if (!(rec.det.confidence >= 0.0 && rec.det.confidence <= 1.0)) {
                reject("confidence outside [0,1]");
                continue;
            }
            out.items.push_back(std::move(rec));
        } catch (const json::exception& e) {
            reject(e.what());
        }
    }
    return out;
}

inline std::string export_predictions(const std::vector<PredictionRecord>& records,
                                      const ClassRegistry& reg = default_registry()) {
    std::ostringstream os;
    for (const auto& r : records) {
        json j{{"image", r.image},
               {"class", reg.name(r.det.box.cls)},
               {"confidence", r.det.confidence},
               {"x_min", r.det.box.x_min},
               {"x_max", r.det.box.x_max},
               {"y_min", r.det.box.y_min},
               {"y_max", r.det.box.y_max}};
        os << j.dump() << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Dataset manifest entry (one labelled capture)

struct ManifestEntry {
    std::string iq_file;
    std::string spectrogram_file;
    std::string label_file;
    std::string schedule_hash;
    json sync = json::object();
    json extra = json::object();
};

inline void to_json(json& j, const ManifestEntry& e) {
    j = json{{"iq", e.iq_file},
             {"spectrogram", e.spectrogram_file},
             {"labels", e.label_file},
             {"schedule_hash", e.schedule_hash},
             {"sync", e.sync},
             {"extra", e.extra}};
}

inline void from_json(const json& j, ManifestEntry& e) {
    e.iq_file = j.at("iq").get<std::string>();
    e.spectrogram_file = j.at("spectrogram").get<std::string>();
    e.label_file = j.at("labels").get<std::string>();
    e.schedule_hash = j.at("schedule_hash").get<std::string>();
    e.sync = j.value("sync", json::object());
    e.extra = j.value("extra", json::object());
}

} // namespace specbox
