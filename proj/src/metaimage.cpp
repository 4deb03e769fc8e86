// metaimage.cpp
#include "corrtps/metaimage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "raw MetaImage I/O assumes a little-endian host");

namespace corrtps {

namespace {

struct Header {
    Index3 dims{};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};
    std::string element_type;
    std::string data_file;
    int channels = 1;
    std::string intensity_kind;  // optional, producer-specific
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Header parse_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open MetaImage header: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (trim(line).empty()) continue;
            throw FormatError("malformed MetaImage header line: " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        kv[key] = val;
        if (key == "ElementDataFile") break;  // data file is the last key
    }

    auto require = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("MetaImage header missing " + key);
        return it->second;
    };
    auto parse_triple = [&](const std::string& key, bool integral) -> std::array<double, 3> {
        std::istringstream ss(require(key));
        std::array<double, 3> v{};
        for (int a = 0; a < 3; ++a) {
            if (!(ss >> v[a])) throw FormatError("MetaImage: " + key + " needs 3 values");
            if (integral && v[a] != std::floor(v[a]))
                throw FormatError("MetaImage: " + key + " must be integral");
        }
        return v;
    };

    if (require("ObjectType") != "Image")
        throw UnsupportedFormatError("MetaImage: ObjectType must be Image");
    if (require("NDims") != "3")
        throw UnsupportedFormatError("MetaImage: NDims must be 3");
    if (auto it = kv.find("BinaryData"); it != kv.end() && it->second != "True")
        throw UnsupportedFormatError("MetaImage: only binary data supported");
    for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"})
        if (auto it = kv.find(key); it != kv.end() && it->second != "False")
            throw UnsupportedFormatError("MetaImage: big-endian data not supported");
    if (auto it = kv.find("CompressedData"); it != kv.end() && it->second != "False")
        throw UnsupportedFormatError("MetaImage: compressed data not supported");

    Header h;
    const auto d = parse_triple("DimSize", true);
    const auto s = parse_triple("ElementSpacing", false);
    for (int a = 0; a < 3; ++a) {
        h.dims[a] = static_cast<int>(d[a]);
        h.spacing[a] = s[a];
    }
    if (kv.count("Offset")) {
        const auto o = parse_triple("Offset", false);
        h.origin = {o[0], o[1], o[2]};
    }
    h.element_type = require("ElementType");
    h.data_file = require("ElementDataFile");
    if (h.data_file == "LOCAL" || h.data_file == "LIST")
        throw UnsupportedFormatError("MetaImage: ElementDataFile " + h.data_file +
                                     " not supported; use a separate raw file");
    if (kv.count("ElementNumberOfChannels"))
        h.channels = std::stoi(kv.at("ElementNumberOfChannels"));
    if (kv.count("IntensityKind")) h.intensity_kind = kv.at("IntensityKind");
    return h;
}

std::vector<char> read_raw(const std::filesystem::path& header_path, const Header& h,
                           std::size_t element_size) {
    const std::filesystem::path raw = header_path.parent_path() / h.data_file;
    std::ifstream in(raw, std::ios::binary);
    if (!in) throw IoError("cannot open raw data file: " + raw.string());
    const std::uint64_t count = static_cast<std::uint64_t>(h.dims[0]) * h.dims[1] * h.dims[2] *
                                static_cast<std::uint64_t>(h.channels);
    const std::uint64_t bytes = count * element_size;
    std::vector<char> buf(bytes);
    in.read(buf.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::uint64_t>(in.gcount()) != bytes)
        throw IoError("raw data file shorter than header promises: " + raw.string());
    return buf;
}

void write_header(const std::filesystem::path& header_path, const GridGeometry& g,
                  const std::string& element_type, int channels,
                  const std::string& intensity_kind) {
    std::ofstream out(header_path);
    if (!out) throw IoError("cannot write MetaImage header: " + header_path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "ObjectType = Image\n";
    out << "NDims = 3\n";
    out << "BinaryData = True\n";
    out << "BinaryDataByteOrderMSB = False\n";
    out << "CompressedData = False\n";
    out << "DimSize = " << g.dims[0] << " " << g.dims[1] << " " << g.dims[2] << "\n";
    out << "ElementSpacing = " << g.spacing.x << " " << g.spacing.y << " " << g.spacing.z << "\n";
    out << "Offset = " << g.origin.x << " " << g.origin.y << " " << g.origin.z << "\n";
    if (channels != 1) out << "ElementNumberOfChannels = " << channels << "\n";
    if (!intensity_kind.empty()) out << "IntensityKind = " << intensity_kind << "\n";
    out << "ElementType = " << element_type << "\n";
    std::filesystem::path raw = header_path.filename();
    raw.replace_extension(".raw");
    out << "ElementDataFile = " << raw.string() << "\n";
    if (!out) throw IoError("failed writing MetaImage header: " + header_path.string());
}

void write_raw(const std::filesystem::path& header_path, const char* data, std::size_t bytes) {
    std::filesystem::path raw = header_path;
    raw.replace_extension(".raw");
    std::ofstream out(raw, std::ios::binary);
    if (!out) throw IoError("cannot write raw data file: " + raw.string());
    out.write(data, static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("failed writing raw data file: " + raw.string());
}

GridGeometry geometry_of(const Header& h) {
    GridGeometry g;
    g.dims = h.dims;
    g.spacing = h.spacing;
    g.origin = h.origin;
    g.validate();
    return g;
}

} // namespace

Volume read_metaimage(const std::filesystem::path& header_path) {
    const Header h = parse_header(header_path);
    if (h.channels != 1)
        throw UnsupportedFormatError("read_metaimage: expected a scalar volume");
    Volume vol;
    vol.geometry = geometry_of(h);
    const std::size_t n = static_cast<std::size_t>(vol.geometry.voxel_count());
    vol.values.resize(n);
    if (h.element_type == "MET_SHORT") {
        const auto buf = read_raw(header_path, h, sizeof(std::int16_t));
        const auto* src = reinterpret_cast<const std::int16_t*>(buf.data());
        for (std::size_t i = 0; i < n; ++i) vol.values[i] = static_cast<float>(src[i]);
        vol.kind = IntensityKind::HU;
    } else if (h.element_type == "MET_FLOAT") {
        const auto buf = read_raw(header_path, h, sizeof(float));
        std::memcpy(vol.values.data(), buf.data(), n * sizeof(float));
        vol.kind = h.intensity_kind == "HU" ? IntensityKind::HU : IntensityKind::Normalised;
    } else {
        throw UnsupportedFormatError("read_metaimage: unsupported ElementType " +
                                     h.element_type);
    }
    return vol;
}

void write_metaimage(const Volume& vol, const std::filesystem::path& header_path) {
    vol.validate();
    bool integral_short = vol.kind == IntensityKind::HU;
    if (integral_short) {
        for (float v : vol.values) {
            if (v != std::floor(v) || v < -32768.0f || v > 32767.0f) {
                integral_short = false;
                break;
            }
        }
    }
    if (integral_short) {
        std::vector<std::int16_t> raw(vol.values.size());
        for (std::size_t i = 0; i < raw.size(); ++i)
            raw[i] = static_cast<std::int16_t>(vol.values[i]);
        write_header(header_path, vol.geometry, "MET_SHORT", 1, "");
        write_raw(header_path, reinterpret_cast<const char*>(raw.data()),
                  raw.size() * sizeof(std::int16_t));
    } else {
        const std::string kind = vol.kind == IntensityKind::HU ? "HU" : "";
        write_header(header_path, vol.geometry, "MET_FLOAT", 1, kind);
        write_raw(header_path, reinterpret_cast<const char*>(vol.values.data()),
                  vol.values.size() * sizeof(float));
    }
}

Mask read_mask(const std::filesystem::path& header_path, const std::string& label) {
    const Header h = parse_header(header_path);
    if (h.element_type != "MET_UCHAR")
        throw UnsupportedFormatError("read_mask: expected MET_UCHAR, got " + h.element_type);
    if (h.channels != 1) throw UnsupportedFormatError("read_mask: expected a scalar mask");
    Mask m;
    m.geometry = geometry_of(h);
    m.label = label.empty() ? header_path.stem().string() : label;
    const auto buf = read_raw(header_path, h, 1);
    m.bits.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const auto v = static_cast<std::uint8_t>(buf[i]);
        if (v > 1) throw FormatError("read_mask: mask voxels must be 0 or 1");
        m.bits[i] = v;
    }
    return m;
}

void write_mask(const Mask& mask, const std::filesystem::path& header_path) {
    mask.validate();
    write_header(header_path, mask.geometry, "MET_UCHAR", 1, "");
    write_raw(header_path, reinterpret_cast<const char*>(mask.bits.data()), mask.bits.size());
}

DisplacementField read_field(const std::filesystem::path& header_path) {
    const Header h = parse_header(header_path);
    if (h.element_type != "MET_FLOAT" || h.channels != 3)
        throw UnsupportedFormatError("read_field: expected 3-channel MET_FLOAT");
    DisplacementField f;
    f.geometry = geometry_of(h);
    const std::size_t n = static_cast<std::size_t>(f.geometry.voxel_count());
    const auto buf = read_raw(header_path, h, sizeof(float));
    const auto* src = reinterpret_cast<const float*>(buf.data());
    f.vectors.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        f.vectors[i] = {static_cast<double>(src[3 * i]), static_cast<double>(src[3 * i + 1]),
                        static_cast<double>(src[3 * i + 2])};
    return f;
}

void write_field(const DisplacementField& field, const std::filesystem::path& header_path) {
    field.validate();
    std::vector<float> raw(field.vectors.size() * 3);
    for (std::size_t i = 0; i < field.vectors.size(); ++i) {
        raw[3 * i] = static_cast<float>(field.vectors[i].x);
        raw[3 * i + 1] = static_cast<float>(field.vectors[i].y);
        raw[3 * i + 2] = static_cast<float>(field.vectors[i].z);
    }
    write_header(header_path, field.geometry, "MET_FLOAT", 3, "");
    write_raw(header_path, reinterpret_cast<const char*>(raw.data()),
              raw.size() * sizeof(float));
}

} // namespace corrtps
