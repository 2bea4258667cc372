#include "valvekit/core/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <fmt/format.h>
#include <zlib.h>

namespace valvekit {
namespace {

static_assert(std::endian::native == std::endian::little,
              "volume I/O assumes a little-endian host");

// NIfTI-1 header, 348 bytes, naturally aligned.
struct NiftiHeader {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1;
    float intent_p2;
    float intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max;
    float cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax;
    std::int32_t glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b;
    float quatern_c;
    float quatern_d;
    float qoffset_x;
    float qoffset_y;
    float qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
static_assert(sizeof(NiftiHeader) == 348);

enum NiftiType : std::int16_t {
    kUInt8 = 2,
    kInt16 = 4,
    kInt32 = 8,
    kFloat32 = 16,
    kFloat64 = 64,
    kInt8 = 256,
    kUInt16 = 512,
    kUInt32 = 768,
};

constexpr std::int16_t kIntentVector = 1007;
constexpr char kUnitsMm = 2;

// Decoded volume prior to conversion to a typed Volume.
struct RawVolume {
    ImageGeometry geometry;
    int components = 1;
    bool integral_type = true;
    std::vector<double> values;  // component-major: all of c0, then c1, ...
};

int bytes_per_voxel(std::int16_t datatype) {
    switch (datatype) {
        case kUInt8:
        case kInt8: return 1;
        case kInt16:
        case kUInt16: return 2;
        case kInt32:
        case kUInt32:
        case kFloat32: return 4;
        case kFloat64: return 8;
        default: return 0;
    }
}

template <typename T>
void decode_as(const std::vector<char>& bytes, std::vector<double>& out) {
    const std::size_t n = bytes.size() / sizeof(T);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
        out[i] = static_cast<double>(v);
    }
}

void decode(std::int16_t datatype, const std::vector<char>& bytes, std::vector<double>& out) {
    switch (datatype) {
        case kUInt8: decode_as<std::uint8_t>(bytes, out); break;
        case kInt8: decode_as<std::int8_t>(bytes, out); break;
        case kInt16: decode_as<std::int16_t>(bytes, out); break;
        case kUInt16: decode_as<std::uint16_t>(bytes, out); break;
        case kInt32: decode_as<std::int32_t>(bytes, out); break;
        case kUInt32: decode_as<std::uint32_t>(bytes, out); break;
        case kFloat32: decode_as<float>(bytes, out); break;
        case kFloat64: decode_as<double>(bytes, out); break;
        default: throw IoError(fmt::format("unsupported datatype code {}", datatype));
    }
}

template <typename T>
std::vector<char> encode_as(const std::vector<double>& values) {
    std::vector<char> bytes(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const T v = static_cast<T>(values[i]);
        std::memcpy(bytes.data() + i * sizeof(T), &v, sizeof(T));
    }
    return bytes;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// zlib's gz* API reads plain and gzip-compressed files alike.
class GzReader {
public:
    explicit GzReader(const std::filesystem::path& path)
        : file_(gzopen(path.string().c_str(), "rb")) {
        if (file_ == nullptr) throw IoError("cannot open " + path.string());
    }
    ~GzReader() { gzclose(file_); }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read(void* dst, std::size_t n, const char* what) {
        auto* p = static_cast<char*>(dst);
        while (n > 0) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
            const int got = gzread(file_, p, chunk);
            if (got <= 0) throw IoError(fmt::format("truncated file while reading {}", what));
            p += got;
            n -= static_cast<std::size_t>(got);
        }
    }

    void skip(std::size_t n) {
        std::vector<char> tmp(n);
        if (n > 0) read(tmp.data(), n, "header extension");
    }

private:
    gzFile file_;
};

void write_bytes(const std::filesystem::path& path, const std::vector<char>& header,
                 const std::vector<char>& payload, bool compress) {
    const auto parent = path.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
        throw IoError("output directory does not exist: " + parent.string());
    }
    if (compress) {
        gzFile f = gzopen(path.string().c_str(), "wb6");
        if (f == nullptr) throw IoError("cannot write " + path.string());
        bool ok = true;
        for (const auto* buf : {&header, &payload}) {
            std::size_t off = 0;
            while (ok && off < buf->size()) {
                const unsigned chunk =
                    static_cast<unsigned>(std::min<std::size_t>(buf->size() - off, 1u << 30));
                ok = gzwrite(f, buf->data() + off, chunk) == static_cast<int>(chunk);
                off += chunk;
            }
        }
        ok = (gzclose(f) == Z_OK) && ok;
        if (!ok) throw IoError("write failed: " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// NIfTI-1

Mat3 quaternion_to_rotation(double b, double c, double d) {
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= s;
        c *= s;
        d *= s;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    return Eigen::Quaterniond(a, b, c, d).toRotationMatrix();
}

RawVolume read_nifti(const std::filesystem::path& path) {
    GzReader in(path);
    NiftiHeader h{};
    in.read(&h, sizeof h, "NIfTI header");
    if (h.sizeof_hdr != 348) {
        if (__builtin_bswap32(static_cast<std::uint32_t>(h.sizeof_hdr)) == 348u) {
            throw IoError("big-endian NIfTI files are not supported: " + path.string());
        }
        throw IoError("not a NIfTI-1 file: " + path.string());
    }
    if (std::strncmp(h.magic, "n+1", 4) != 0) {
        throw IoError("only single-file NIfTI-1 (n+1) is supported: " + path.string());
    }
    const int ndim = h.dim[0];
    if (ndim < 1 || ndim > 7) throw IoError("invalid NIfTI dim[0]");

    RawVolume raw;
    auto& g = raw.geometry;
    for (int d = 0; d < 3; ++d) g.dims[d] = d < ndim ? std::max<int>(1, h.dim[d + 1]) : 1;
    int extra = 1;
    for (int d = 4; d <= ndim; ++d) extra *= std::max<int>(1, h.dim[d]);
    raw.components = extra;

    Vec3 pixdim(std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), std::abs(h.pixdim[3]));
    for (int d = 0; d < 3; ++d) {
        if (!(pixdim[d] > 0.0)) pixdim[d] = 1.0;
    }

    if (h.sform_code > 0) {
        Mat3 affine;
        affine << h.srow_x[0], h.srow_x[1], h.srow_x[2], h.srow_y[0], h.srow_y[1],
            h.srow_y[2], h.srow_z[0], h.srow_z[1], h.srow_z[2];
        for (int d = 0; d < 3; ++d) {
            const double norm = affine.col(d).norm();
            if (!(norm > 0.0)) throw IoError("degenerate sform");
            // pixdim carries the exact float spacing when it agrees with the sform
            g.spacing[d] = std::abs(norm - pixdim[d]) <= 1e-5 * norm ? pixdim[d] : norm;
            g.direction.col(d) = affine.col(d) / norm;
        }
        g.origin = Vec3(h.srow_x[3], h.srow_y[3], h.srow_z[3]);
    } else if (h.qform_code > 0) {
        g.spacing = pixdim;
        g.direction = quaternion_to_rotation(h.quatern_b, h.quatern_c, h.quatern_d);
        if (h.pixdim[0] < 0) g.direction.col(2) *= -1.0;
        g.origin = Vec3(h.qoffset_x, h.qoffset_y, h.qoffset_z);
    } else {
        g.spacing = pixdim;
    }
    g.validate();

    const int bpv = bytes_per_voxel(h.datatype);
    if (bpv == 0) throw IoError(fmt::format("unsupported NIfTI datatype {}", h.datatype));
    raw.integral_type = h.datatype != kFloat32 && h.datatype != kFloat64;

    const auto offset = static_cast<std::size_t>(h.vox_offset);
    if (offset < sizeof h) throw IoError("invalid vox_offset");
    in.skip(offset - sizeof h);

    std::vector<char> bytes(g.voxel_count() * static_cast<std::size_t>(raw.components) * bpv);
    in.read(bytes.data(), bytes.size(), "voxel data");
    decode(h.datatype, bytes, raw.values);

    if (h.scl_slope != 0.0f && (h.scl_slope != 1.0f || h.scl_inter != 0.0f)) {
        for (auto& v : raw.values) v = v * h.scl_slope + h.scl_inter;
        raw.integral_type = false;
    }
    return raw;
}

void write_nifti(const RawVolume& raw, std::int16_t datatype,
                 const std::filesystem::path& path, bool compress) {
    const auto& g = raw.geometry;
    NiftiHeader h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = raw.components > 1 ? 5 : 3;
    for (int d = 0; d < 3; ++d) h.dim[d + 1] = static_cast<std::int16_t>(g.dims[d]);
    h.dim[4] = 1;
    h.dim[5] = static_cast<std::int16_t>(raw.components);
    h.dim[6] = h.dim[7] = 1;
    if (raw.components > 1) h.intent_code = kIntentVector;
    h.datatype = datatype;
    h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));

    Mat3 rot = g.direction;
    float qfac = 1.0f;
    if (rot.determinant() < 0) {
        qfac = -1.0f;
        rot.col(2) *= -1.0;
    }
    Eigen::Quaterniond q(rot);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;

    h.pixdim[0] = qfac;
    for (int d = 0; d < 3; ++d) h.pixdim[d + 1] = static_cast<float>(g.spacing[d]);
    for (int d = 4; d < 8; ++d) h.pixdim[d] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.xyzt_units = kUnitsMm;
    std::strncpy(h.descrip, "valvekit", sizeof h.descrip);
    h.qform_code = 1;
    h.sform_code = 1;
    h.quatern_b = static_cast<float>(q.x());
    h.quatern_c = static_cast<float>(q.y());
    h.quatern_d = static_cast<float>(q.z());
    h.qoffset_x = static_cast<float>(g.origin[0]);
    h.qoffset_y = static_cast<float>(g.origin[1]);
    h.qoffset_z = static_cast<float>(g.origin[2]);
    float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            rows[r][c] = static_cast<float>(g.direction(r, c) * g.spacing[c]);
        }
        rows[r][3] = static_cast<float>(g.origin[r]);
    }
    std::memcpy(h.magic, "n+1\0", 4);

    std::vector<char> header(352, 0);
    std::memcpy(header.data(), &h, sizeof h);

    std::vector<char> payload;
    switch (datatype) {
        case kUInt8: payload = encode_as<std::uint8_t>(raw.values); break;
        case kFloat32: payload = encode_as<float>(raw.values); break;
        default: throw IoError("unsupported output datatype");
    }
    write_bytes(path, header, payload, compress);
}

// ---------------------------------------------------------------------------
// MetaImage

struct MetaType {
    const char* name;
    std::int16_t nifti_equivalent;
};

constexpr MetaType kMetaTypes[] = {
    {"MET_UCHAR", kUInt8},  {"MET_CHAR", kInt8},    {"MET_USHORT", kUInt16},
    {"MET_SHORT", kInt16},  {"MET_UINT", kUInt32},  {"MET_INT", kInt32},
    {"MET_FLOAT", kFloat32}, {"MET_DOUBLE", kFloat64},
};

std::vector<double> parse_numbers(const std::string& s, std::size_t expected,
                                  const std::string& key) {
    std::istringstream is(s);
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    if (out.size() != expected) {
        throw IoError(fmt::format("MetaImage field {} expects {} values", key, expected));
    }
    return out;
}

RawVolume read_metaimage(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::map<std::string, std::string> fields;
    std::string line;
    bool found_data = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        fields[key] = value;
        if (key == "ElementDataFile") {
            if (value != "LOCAL") {
                throw IoError("only inline (ElementDataFile = LOCAL) MetaImage is supported");
            }
            found_data = true;
            break;
        }
    }
    if (!found_data) throw IoError("MetaImage header lacks ElementDataFile");

    auto get = [&](const std::string& key) -> const std::string* {
        auto it = fields.find(key);
        return it == fields.end() ? nullptr : &it->second;
    };
    if (const auto* nd = get("NDims"); nd == nullptr || std::stoi(*nd) != 3) {
        throw IoError("only 3D MetaImage volumes are supported");
    }
    if (const auto* c = get("CompressedData"); c != nullptr && lower(*c) == "true") {
        throw IoError("compressed MetaImage is not supported");
    }
    for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
        if (const auto* msb = get(key); msb != nullptr && lower(*msb) == "true") {
            throw IoError("big-endian MetaImage is not supported");
        }
    }

    RawVolume raw;
    auto& g = raw.geometry;
    const auto* dimsize = get("DimSize");
    if (dimsize == nullptr) throw IoError("MetaImage header lacks DimSize");
    const auto dims = parse_numbers(*dimsize, 3, "DimSize");
    for (int d = 0; d < 3; ++d) g.dims[d] = static_cast<int>(dims[d]);
    if (const auto* sp = get("ElementSpacing")) {
        const auto s = parse_numbers(*sp, 3, "ElementSpacing");
        g.spacing = Vec3(s[0], s[1], s[2]);
    }
    const auto* off = get("Offset");
    if (off == nullptr) off = get("Position");
    if (off == nullptr) off = get("Origin");
    if (off != nullptr) {
        const auto o = parse_numbers(*off, 3, "Offset");
        g.origin = Vec3(o[0], o[1], o[2]);
    }
    const auto* tm = get("TransformMatrix");
    if (tm == nullptr) tm = get("Rotation");
    if (tm == nullptr) tm = get("Orientation");
    if (tm != nullptr) {
        const auto m = parse_numbers(*tm, 9, "TransformMatrix");
        for (int c = 0; c < 3; ++c) {
            for (int r = 0; r < 3; ++r) g.direction(r, c) = m[c * 3 + r];
        }
    }
    g.validate();

    if (const auto* ch = get("ElementNumberOfChannels")) raw.components = std::stoi(*ch);
    const auto* et = get("ElementType");
    if (et == nullptr) throw IoError("MetaImage header lacks ElementType");
    std::int16_t datatype = 0;
    for (const auto& t : kMetaTypes) {
        if (*et == t.name) datatype = t.nifti_equivalent;
    }
    if (datatype == 0) throw IoError("unsupported MetaImage ElementType " + *et);
    raw.integral_type = datatype != kFloat32 && datatype != kFloat64;

    const std::size_t n = g.voxel_count() * static_cast<std::size_t>(raw.components);
    std::vector<char> bytes(n * bytes_per_voxel(datatype));
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw IoError("truncated MetaImage data: " + path.string());
    }
    std::vector<double> interleaved;
    decode(datatype, bytes, interleaved);
    // MetaImage interleaves channels per voxel; RawVolume is component-major.
    raw.values.resize(n);
    const std::size_t nv = g.voxel_count();
    for (std::size_t v = 0; v < nv; ++v) {
        for (int c = 0; c < raw.components; ++c) {
            raw.values[c * nv + v] = interleaved[v * raw.components + c];
        }
    }
    return raw;
}

void write_metaimage(const RawVolume& raw, std::int16_t datatype,
                     const std::filesystem::path& path) {
    const auto& g = raw.geometry;
    std::string header;
    header += "ObjectType = Image\nNDims = 3\nBinaryData = True\n";
    header += "BinaryDataByteOrderMSB = False\nCompressedData = False\n";
    header += "TransformMatrix =";
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) header += fmt::format(" {:.17g}", g.direction(r, c));
    }
    header += fmt::format("\nOffset = {:.17g} {:.17g} {:.17g}\n", g.origin[0], g.origin[1],
                          g.origin[2]);
    header += "CenterOfRotation = 0 0 0\nAnatomicalOrientation = RAI\n";
    header += fmt::format("ElementSpacing = {:.17g} {:.17g} {:.17g}\n", g.spacing[0],
                          g.spacing[1], g.spacing[2]);
    header += fmt::format("DimSize = {} {} {}\n", g.dims[0], g.dims[1], g.dims[2]);
    if (raw.components > 1) {
        header += fmt::format("ElementNumberOfChannels = {}\n", raw.components);
    }
    header += fmt::format("ElementType = {}\n", datatype == kUInt8 ? "MET_UCHAR" : "MET_FLOAT");
    header += "ElementDataFile = LOCAL\n";

    const std::size_t nv = g.voxel_count();
    std::vector<double> interleaved(raw.values.size());
    for (std::size_t v = 0; v < nv; ++v) {
        for (int c = 0; c < raw.components; ++c) {
            interleaved[v * raw.components + c] = raw.values[c * nv + v];
        }
    }
    std::vector<char> payload = datatype == kUInt8 ? encode_as<std::uint8_t>(interleaved)
                                                   : encode_as<float>(interleaved);
    write_bytes(path, std::vector<char>(header.begin(), header.end()), payload, false);
}

RawVolume read_raw(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
    return format_from_path(path) == VolumeFormat::MetaImage ? read_metaimage(path)
                                                             : read_nifti(path);
}

void write_raw(const RawVolume& raw, std::int16_t datatype, const std::filesystem::path& path) {
    switch (format_from_path(path)) {
        case VolumeFormat::Nifti: write_nifti(raw, datatype, path, false); break;
        case VolumeFormat::NiftiGz: write_nifti(raw, datatype, path, true); break;
        case VolumeFormat::MetaImage: write_metaimage(raw, datatype, path); break;
    }
}

}  // namespace

VolumeFormat format_from_path(const std::filesystem::path& path) {
    const auto name = lower(path.filename().string());
    if (ends_with(name, ".nii.gz")) return VolumeFormat::NiftiGz;
    if (ends_with(name, ".nii")) return VolumeFormat::Nifti;
    if (ends_with(name, ".mha")) return VolumeFormat::MetaImage;
    throw IoError("unsupported volume extension: " + path.string());
}

LabelVolume load_volume(const std::filesystem::path& path) {
    const RawVolume raw = read_raw(path);
    if (raw.components != 1) throw IoError("label volume must have a single component");
    std::vector<LabelId> data(raw.values.size());
    std::size_t unknown = 0;
    std::size_t first_unknown = 0;
    double first_value = 0;
    for (std::size_t i = 0; i < raw.values.size(); ++i) {
        const double v = raw.values[i];
        if (!raw.integral_type && v != std::floor(v)) {
            const auto ijk = raw.geometry.unravel(i);
            throw IoError(fmt::format("non-integer voxel value {} at [{}, {}, {}] in {}", v,
                                      ijk[0], ijk[1], ijk[2], path.string()));
        }
        if (v < 0 || v > kMaxLabelId) {
            if (unknown == 0) {
                first_unknown = i;
                first_value = v;
            }
            ++unknown;
            continue;
        }
        data[i] = static_cast<LabelId>(v);
    }
    if (unknown > 0) {
        const auto ijk = raw.geometry.unravel(first_unknown);
        throw Error(fmt::format("unknown label id {} ({} voxels, first at [{}, {}, {}]) in {}",
                                first_value, unknown, ijk[0], ijk[1], ijk[2], path.string()));
    }
    return LabelVolume(raw.geometry, std::move(data));
}

void save_volume(const LabelVolume& v, const std::filesystem::path& path) {
    RawVolume raw;
    raw.geometry = v.geometry();
    raw.values.assign(v.data().begin(), v.data().end());
    write_raw(raw, kUInt8, path);
}

ScalarVolume load_image(const std::filesystem::path& path) {
    const RawVolume raw = read_raw(path);
    if (raw.components != 1) throw IoError("image must have a single component");
    std::vector<float> data(raw.values.begin(), raw.values.end());
    return ScalarVolume(raw.geometry, std::move(data));
}

void save_image(const ScalarVolume& v, const std::filesystem::path& path) {
    RawVolume raw;
    raw.geometry = v.geometry();
    raw.values.assign(v.data().begin(), v.data().end());
    write_raw(raw, kFloat32, path);
}

void save_vector_image(const ScalarVolume& x, const ScalarVolume& y, const ScalarVolume& z,
                       const std::filesystem::path& path) {
    require_same_geometry(x.geometry(), y.geometry(), "vector image components");
    require_same_geometry(x.geometry(), z.geometry(), "vector image components");
    RawVolume raw;
    raw.geometry = x.geometry();
    raw.components = 3;
    for (const auto* c : {&x, &y, &z}) {
        raw.values.insert(raw.values.end(), c->data().begin(), c->data().end());
    }
    write_raw(raw, kFloat32, path);
}

}  // namespace valvekit
