#pragma once

// File formats:
//   .iq        interleaved 32-bit little-endian float pairs (I, Q), with a
//              <name>.meta.json sidecar (sample_rate, span, schedule, seeds,
//              impairment chain)
//   .mat       spectrogram matrix: "SBXM" magic, u32 rows, u32 cols (LE),
//              then row-major 32-bit LE floats; axes in <name>.axes.json
//   .pgm       binary 8-bit grayscale image export

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "specbox/common.hpp"
#include "specbox/spectro.hpp"
#include "specbox/types.hpp"

namespace specbox {

namespace detail {

inline std::uint32_t to_le32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return __builtin_bswap32(v);
}

inline float float_to_le(float v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = __builtin_bswap32(u);
    std::memcpy(&v, &u, 4);
    return v;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p,
                                          const char* suffix) {
    std::filesystem::path out = p;
    out.replace_extension(suffix);
    return out;
}

} // namespace detail

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os << j.dump(2) << '\n';
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// IQ records

inline void write_iq(const std::filesystem::path& path, const IQRecord& rec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    std::vector<float> buf(rec.samples.size() * 2);
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        buf[2 * i] = detail::float_to_le(rec.samples[i].real());
        buf[2 * i + 1] = detail::float_to_le(rec.samples[i].imag());
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("short write: " + path.string());

    json meta = rec.meta;
    meta["sample_rate"] = rec.sample_rate;
    meta["span"] = rec.span();
    write_json_file(detail::sidecar_path(path, ".meta.json"), meta);
}

inline IQRecord read_iq(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw IoError("cannot open: " + path.string());
    const auto bytes = static_cast<std::size_t>(is.tellg());
    if (bytes % (2 * sizeof(float)) != 0)
        throw ParseError("iq file size is not a multiple of 8 bytes: " + path.string());
    is.seekg(0);
    std::vector<float> buf(bytes / sizeof(float));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!is) throw IoError("short read: " + path.string());

    IQRecord rec;
    rec.samples.resize(buf.size() / 2);
    for (std::size_t i = 0; i < rec.samples.size(); ++i)
        rec.samples[i] = {detail::float_to_le(buf[2 * i]), detail::float_to_le(buf[2 * i + 1])};

    const auto meta_path = detail::sidecar_path(path, ".meta.json");
    if (std::filesystem::exists(meta_path)) {
        rec.meta = read_json_file(meta_path);
        rec.sample_rate = rec.meta.value("sample_rate", 0.0);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Spectrogram matrix dump

inline void write_matrix(const std::filesystem::path& path, const Spectrogram& spec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os.write("SBXM", 4);
    const std::uint32_t dims[2] = {detail::to_le32(static_cast<std::uint32_t>(spec.rows)),
                                   detail::to_le32(static_cast<std::uint32_t>(spec.cols))};
    os.write(reinterpret_cast<const char*>(dims), 8);
    std::vector<float> buf(spec.power_db.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = detail::float_to_le(spec.power_db[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("short write: " + path.string());
    write_json_file(detail::sidecar_path(path, ".axes.json"), json(spec.axes));
}

inline Spectrogram read_matrix(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SBXM", 4) != 0)
        throw ParseError("bad matrix magic: " + path.string());
    std::uint32_t dims[2];
    is.read(reinterpret_cast<char*>(dims), 8);
    if (!is) throw ParseError("truncated matrix header: " + path.string());
    Spectrogram spec;
    spec.rows = static_cast<int>(detail::to_le32(dims[0]));
    spec.cols = static_cast<int>(detail::to_le32(dims[1]));
    spec.power_db.resize(static_cast<std::size_t>(spec.rows) *
                         static_cast<std::size_t>(spec.cols));
    is.read(reinterpret_cast<char*>(spec.power_db.data()),
            static_cast<std::streamsize>(spec.power_db.size() * sizeof(float)));
    if (!is) throw ParseError("truncated matrix payload: " + path.string());
    for (auto& v : spec.power_db) v = detail::float_to_le(v);

    const auto axes_path = detail::sidecar_path(path, ".axes.json");
    if (std::filesystem::exists(axes_path))
        spec.axes = read_json_file(axes_path).get<SpectrogramAxes>();
    return spec;
}

// ---------------------------------------------------------------------------
// PGM image export

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError("short write: " + path.string());
}

// ---------------------------------------------------------------------------
// Small CSV writer (fields with commas/quotes are quoted)

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        row(std::move(header));
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << escape(fields[i]);
        }
        os_ << '\n';
    }

    std::string str() const { return os_.str(); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            else out += c;
        }
        out += '"';
        return out;
    }
    std::ostringstream os_;
};

inline std::uint64_t hash_file(const std::filesystem::path& path) {
    return fnv1a64(read_text_file(path));
}

} // namespace specbox
