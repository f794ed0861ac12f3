#include "stemalign/cloud_io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "stemalign/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

namespace stemalign {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool ends_with_ci(const std::string& path, const std::string& ext) {
    if (path.size() < ext.size()) return false;
    return lower(path.substr(path.size() - ext.size())) == ext;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& tok, const std::string& path, std::size_t lineno) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
    if (!std::isfinite(v))
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-finite value '" + tok + "'");
    return v;
}

// ---- xyz ascii ----

PointCloud read_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    int arity = 0;  // 0 until the first data line fixes it at 3 or 4
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        auto toks = split_ws(line);
        if (toks.size() != 3 && toks.size() != 4)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 or 4 fields, got " +
                             std::to_string(toks.size()));
        if (arity == 0) arity = static_cast<int>(toks.size());
        if (static_cast<int>(toks.size()) != arity)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": inconsistent field count (file started with " + std::to_string(arity) + ")");
        Point3 p{parse_double(toks[0], path, lineno), parse_double(toks[1], path, lineno),
                 parse_double(toks[2], path, lineno)};
        cloud.points.push_back(p);
        if (arity == 4) cloud.intensity.push_back(static_cast<float>(parse_double(toks[3], path, lineno)));
    }
    if (in.bad()) throw IoError("read failure on " + path);
    return cloud;
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open " + path + " for writing");
    const bool has_i = cloud.has_intensity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        if (has_i)
            std::fprintf(f, "%.6f %.6f %.6f %.6f\n", p.x, p.y, p.z, static_cast<double>(cloud.intensity[i]));
        else
            std::fprintf(f, "%.6f %.6f %.6f\n", p.x, p.y, p.z);
    }
    if (std::fclose(f) != 0) throw IoError("write failure on " + path);
}

// ---- ply ----

struct PlyProperty {
    std::string type;  // scalar type name as written
    std::string name;
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t header_lines = 0;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
    if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
    if (type == "int" || type == "int32" || type == "uint" || type == "uint32") return 4;
    if (type == "float" || type == "float32") return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

bool is_float32(const std::string& type) { return type == "float" || type == "float32"; }
bool is_uchar(const std::string& type) { return type == "uchar" || type == "uint8"; }

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
    PlyHeader hdr;
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(path + ": unexpected end of header");
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };
    next_line();
    if (line != "ply") throw ParseError(path + ":1: missing 'ply' magic");
    bool have_format = false, done = false;
    while (!done) {
        next_line();
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        const std::string& kw = toks[0];
        if (kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            if (toks.size() != 3 || toks[2] != "1.0")
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad format line");
            if (toks[1] == "ascii") hdr.binary = false;
            else if (toks[1] == "binary_little_endian") hdr.binary = true;
            else
                throw ParseError(path + ":" + std::to_string(lineno) + ": unsupported format '" + toks[1] + "'");
            have_format = true;
        } else if (kw == "element") {
            if (toks.size() != 3)
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad element line");
            PlyElement e;
            e.name = toks[1];
            try {
                e.count = std::stoull(toks[2]);
            } catch (...) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad element count '" + toks[2] + "'");
            }
            hdr.elements.push_back(e);
        } else if (kw == "property") {
            if (hdr.elements.empty())
                throw ParseError(path + ":" + std::to_string(lineno) + ": property before any element");
            PlyProperty p;
            if (toks.size() == 3) {
                p.type = toks[1];
                p.name = toks[2];
                if (scalar_size(p.type) == 0)
                    throw ParseError(path + ":" + std::to_string(lineno) + ": unknown property type '" + p.type + "'");
            } else if (toks.size() == 5 && toks[1] == "list") {
                p.is_list = true;
                p.type = toks[3];
                p.name = toks[4];
            } else {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad property line");
            }
            hdr.elements.back().properties.push_back(p);
        } else if (kw == "end_header") {
            done = true;
        } else {
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown header keyword '" + kw + "'");
        }
    }
    if (!have_format) throw ParseError(path + ": header has no format line");
    hdr.header_lines = lineno;
    return hdr;
}

// Column roles inside the vertex element.
struct VertexLayout {
    int ix = -1, iy = -1, iz = -1, ii = -1, ir = -1, ig = -1, ib = -1;
    std::size_t row_bytes = 0;               // binary stride
    std::vector<std::size_t> offsets;        // per-property byte offset
    bool has_color = false;
};

VertexLayout vertex_layout(const PlyElement& e, const std::string& path) {
    VertexLayout lay;
    std::size_t off = 0;
    for (std::size_t c = 0; c < e.properties.size(); ++c) {
        const PlyProperty& p = e.properties[c];
        if (p.is_list)
            throw ParseError(path + ": list property '" + p.name + "' in vertex element is not supported");
        lay.offsets.push_back(off);
        off += scalar_size(p.type);
        if (p.name == "x" || p.name == "y" || p.name == "z") {
            if (!is_float32(p.type))
                throw ParseError(path + ": vertex property '" + p.name + "' must be float32, got '" + p.type + "'");
            (p.name == "x" ? lay.ix : p.name == "y" ? lay.iy : lay.iz) = static_cast<int>(c);
        } else if (p.name == "intensity" && is_float32(p.type)) {
            lay.ii = static_cast<int>(c);
        } else if (p.name == "red" && is_uchar(p.type)) {
            lay.ir = static_cast<int>(c);
        } else if (p.name == "green" && is_uchar(p.type)) {
            lay.ig = static_cast<int>(c);
        } else if (p.name == "blue" && is_uchar(p.type)) {
            lay.ib = static_cast<int>(c);
        }
        // anything else is carried in the stride and ignored
    }
    lay.row_bytes = off;
    if (lay.ix < 0 || lay.iy < 0 || lay.iz < 0)
        throw ParseError(path + ": vertex element lacks float32 x, y, z properties");
    lay.has_color = lay.ir >= 0 && lay.ig >= 0 && lay.ib >= 0;
    return lay;
}

double check_finite(double v, const std::string& path, const std::string& where) {
    if (!std::isfinite(v)) throw ParseError(path + ": non-finite coordinate at " + where);
    return v;
}

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    PlyHeader hdr = read_ply_header(in, path);

    PointCloud cloud;
    bool seen_vertex = false;
    std::size_t lineno = hdr.header_lines;
    for (const PlyElement& e : hdr.elements) {
        if (e.name != "vertex") {
            std::cerr << "warning: " << path << ": skipping element '" << e.name << "' (" << e.count
                      << " rows)\n";
            if (!hdr.binary) {
                std::string line;
                for (std::size_t r = 0; r < e.count; ++r) {
                    if (!std::getline(in, line))
                        throw ParseError(path + ": truncated element '" + e.name + "' at line " +
                                         std::to_string(lineno + r + 1));
                }
                lineno += e.count;
            } else {
                std::size_t row = 0;
                for (const PlyProperty& p : e.properties) {
                    if (p.is_list)
                        throw ParseError(path + ": cannot skip binary element '" + e.name +
                                         "' with list property '" + p.name + "'");
                    row += scalar_size(p.type);
                }
                in.seekg(static_cast<std::streamoff>(row * e.count), std::ios::cur);
                if (!in)
                    throw ParseError(path + ": truncated element '" + e.name + "' at byte offset " +
                                     std::to_string(static_cast<long long>(in.tellg())));
            }
            continue;
        }
        if (seen_vertex) throw ParseError(path + ": multiple vertex elements");
        seen_vertex = true;
        VertexLayout lay = vertex_layout(e, path);
        cloud.points.reserve(e.count);
        if (lay.ii >= 0) cloud.intensity.reserve(e.count);
        if (lay.has_color) cloud.color.reserve(e.count);

        if (!hdr.binary) {
            std::string line;
            for (std::size_t r = 0; r < e.count; ++r) {
                if (!std::getline(in, line))
                    throw ParseError(path + ": vertex element declares " + std::to_string(e.count) +
                                     " rows but ends after " + std::to_string(r));
                ++lineno;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                auto toks = split_ws(line);
                if (toks.size() != e.properties.size())
                    throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(e.properties.size()) + " values, got " +
                                     std::to_string(toks.size()));
                auto val = [&](int c) { return parse_double(toks[static_cast<std::size_t>(c)], path, lineno); };
                cloud.points.push_back({val(lay.ix), val(lay.iy), val(lay.iz)});
                if (lay.ii >= 0) cloud.intensity.push_back(static_cast<float>(val(lay.ii)));
                if (lay.has_color)
                    cloud.color.push_back({static_cast<std::uint8_t>(val(lay.ir)),
                                           static_cast<std::uint8_t>(val(lay.ig)),
                                           static_cast<std::uint8_t>(val(lay.ib))});
            }
        } else {
            std::vector<char> row(lay.row_bytes);
            auto f32 = [&](int c) {
                float v;
                std::memcpy(&v, row.data() + lay.offsets[static_cast<std::size_t>(c)], 4);
                return v;
            };
            for (std::size_t r = 0; r < e.count; ++r) {
                in.read(row.data(), static_cast<std::streamsize>(lay.row_bytes));
                if (in.gcount() != static_cast<std::streamsize>(lay.row_bytes))
                    throw ParseError(path + ": vertex payload truncated at byte offset " +
                                     std::to_string(static_cast<long long>(in.tellg())) + " (row " +
                                     std::to_string(r) + " of " + std::to_string(e.count) + ")");
                std::string where = "vertex row " + std::to_string(r);
                cloud.points.push_back({check_finite(f32(lay.ix), path, where),
                                        check_finite(f32(lay.iy), path, where),
                                        check_finite(f32(lay.iz), path, where)});
                if (lay.ii >= 0) {
                    float v = f32(lay.ii);
                    if (!std::isfinite(v)) throw ParseError(path + ": non-finite intensity at " + where);
                    cloud.intensity.push_back(v);
                }
                if (lay.has_color) {
                    auto u8 = [&](int c) {
                        std::uint8_t v;
                        std::memcpy(&v, row.data() + lay.offsets[static_cast<std::size_t>(c)], 1);
                        return v;
                    };
                    cloud.color.push_back({u8(lay.ir), u8(lay.ig), u8(lay.ib)});
                }
            }
        }
    }
    if (!seen_vertex) throw ParseError(path + ": no vertex element");
    return cloud;
}

void write_ply_header(std::FILE* f, const PointCloud& cloud, bool binary) {
    std::fprintf(f, "ply\nformat %s 1.0\n", binary ? "binary_little_endian" : "ascii");
    std::fprintf(f, "element vertex %zu\n", cloud.size());
    std::fprintf(f, "property float x\nproperty float y\nproperty float z\n");
    if (cloud.has_intensity()) std::fprintf(f, "property float intensity\n");
    if (cloud.has_color())
        std::fprintf(f, "property uchar red\nproperty uchar green\nproperty uchar blue\n");
    std::fprintf(f, "end_header\n");
}

void write_ply(const PointCloud& cloud, const std::string& path, bool binary) {
    std::FILE* f = std::fopen(path.c_str(), binary ? "wb" : "w");
    if (!f) throw IoError("cannot open " + path + " for writing");
    write_ply_header(f, cloud, binary);
    const bool has_i = cloud.has_intensity();
    const bool has_c = cloud.has_color();
    if (binary) {
        std::vector<char> row;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            row.clear();
            float xyz[3] = {static_cast<float>(cloud.points[i].x), static_cast<float>(cloud.points[i].y),
                            static_cast<float>(cloud.points[i].z)};
            row.insert(row.end(), reinterpret_cast<char*>(xyz), reinterpret_cast<char*>(xyz) + 12);
            if (has_i) {
                float v = cloud.intensity[i];
                row.insert(row.end(), reinterpret_cast<char*>(&v), reinterpret_cast<char*>(&v) + 4);
            }
            if (has_c)
                row.insert(row.end(), reinterpret_cast<const char*>(cloud.color[i].data()),
                           reinterpret_cast<const char*>(cloud.color[i].data()) + 3);
            if (std::fwrite(row.data(), 1, row.size(), f) != row.size()) {
                std::fclose(f);
                throw IoError("write failure on " + path);
            }
        }
    } else {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            // %.9g round-trips the float32 payload exactly through text
            std::fprintf(f, "%.9g %.9g %.9g", static_cast<float>(cloud.points[i].x),
                         static_cast<float>(cloud.points[i].y), static_cast<float>(cloud.points[i].z));
            if (has_i) std::fprintf(f, " %.9g", cloud.intensity[i]);
            if (has_c)
                std::fprintf(f, " %u %u %u", cloud.color[i][0], cloud.color[i][1], cloud.color[i][2]);
            std::fprintf(f, "\n");
        }
    }
    if (std::fclose(f) != 0) throw IoError("write failure on " + path);
}

}  // namespace

CloudFormat cloud_format_from_name(const std::string& name) {
    if (name == "xyz-ascii") return CloudFormat::XyzAscii;
    if (name == "ply-ascii") return CloudFormat::PlyAscii;
    if (name == "ply-binary-le") return CloudFormat::PlyBinaryLe;
    throw ArgumentError("unknown cloud format '" + name + "' (expected xyz-ascii, ply-ascii, ply-binary-le)");
}

std::string cloud_format_name(CloudFormat fmt) {
    switch (fmt) {
        case CloudFormat::XyzAscii: return "xyz-ascii";
        case CloudFormat::PlyAscii: return "ply-ascii";
        case CloudFormat::PlyBinaryLe: return "ply-binary-le";
    }
    return "?";
}

CloudFormat detect_cloud_format(const std::string& path) {
    if (!ends_with_ci(path, ".ply")) return CloudFormat::XyzAscii;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    PlyHeader hdr = read_ply_header(in, path);
    return hdr.binary ? CloudFormat::PlyBinaryLe : CloudFormat::PlyAscii;
}

CloudFormat default_write_format(const std::string& path) {
    return ends_with_ci(path, ".ply") ? CloudFormat::PlyBinaryLe : CloudFormat::XyzAscii;
}

PointCloud read_cloud(const std::string& path, CloudFormat format) {
    PointCloud cloud;
    switch (format) {
        case CloudFormat::XyzAscii: cloud = read_xyz(path); break;
        case CloudFormat::PlyAscii:
        case CloudFormat::PlyBinaryLe: {
            cloud = read_ply(path);
            break;
        }
    }
    if (!cloud.attributes_consistent()) throw ParseError(path + ": attribute arrays inconsistent with point count");
    return cloud;
}

PointCloud read_cloud(const std::string& path) { return read_cloud(path, detect_cloud_format(path)); }

void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format) {
    if (cloud.empty()) throw ArgumentError("write_cloud: refusing to write empty cloud to " + path);
    if (!cloud.attributes_consistent()) throw ArgumentError("write_cloud: attribute arrays inconsistent");
    switch (format) {
        case CloudFormat::XyzAscii: write_xyz(cloud, path); break;
        case CloudFormat::PlyAscii: write_ply(cloud, path, false); break;
        case CloudFormat::PlyBinaryLe: write_ply(cloud, path, true); break;
    }
}

void write_cloud(const PointCloud& cloud, const std::string& path) {
    write_cloud(cloud, path, default_write_format(path));
}

RigidTransform read_transform(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Eigen::Matrix4d M;
    std::string line;
    std::size_t lineno = 0;
    int row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (row >= 4) throw ParseError(path + ":" + std::to_string(lineno) + ": more than 4 matrix rows");
        auto toks = split_ws(line);
        if (toks.size() != 4)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 numbers, got " +
                             std::to_string(toks.size()));
        for (int c = 0; c < 4; ++c) M(row, c) = parse_double(toks[static_cast<std::size_t>(c)], path, lineno);
        ++row;
    }
    if (row != 4) throw ParseError(path + ": expected 4 matrix rows, got " + std::to_string(row));
    const double tol = 1e-9;
    if (std::abs(M(3, 0)) > tol || std::abs(M(3, 1)) > tol || std::abs(M(3, 2)) > tol ||
        std::abs(M(3, 3) - 1.0) > tol)
        throw DataError(path + ": bottom row is not (0, 0, 0, 1)");
    RigidTransform T = RigidTransform::from_matrix(M);
    if (!T.valid(tol)) throw DataError(path + ": rotation block is not orthonormal with det +1");
    return T;
}

void write_transform(const RigidTransform& T, const std::string& path) {
    if (!T.valid()) throw ArgumentError("write_transform: invalid rigid transform");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open " + path + " for writing");
    Eigen::Matrix4d M = T.matrix();
    for (int r = 0; r < 4; ++r)
        std::fprintf(f, "%.17g %.17g %.17g %.17g\n", M(r, 0), M(r, 1), M(r, 2), M(r, 3));
    if (std::fclose(f) != 0) throw IoError("write failure on " + path);
}

}  // namespace stemalign
