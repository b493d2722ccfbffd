#include "carotid/volume_io.hpp"

#include "carotid/error.hpp"
#include "carotid/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

namespace carotid {

static_assert(std::endian::native == std::endian::little, "volume codecs assume a little-endian host");

// ---------------------------------------------------------------------------
// gzip

std::string gzip_compress(std::string_view bytes) {
  z_stream zs{};
  // 15 + 16 selects the gzip wrapper; zlib leaves mtime at zero
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::IoFailure, "deflateInit2 failed");
  std::string out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoFailure, "deflate did not finish");
  out.resize(produced);
  return out;
}

std::string gzip_decompress(std::string_view bytes) {
  z_stream zs{};
  // 15 + 32 detects gzip or zlib headers
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(ErrorCode::IoFailure, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buffer[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buffer);
    zs.avail_out = sizeof(buffer);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::CorruptHeader, "compressed stream is damaged or truncated");
    }
    out.append(buffer, sizeof(buffer) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::CorruptHeader, "compressed stream is truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b;
}

// ---------------------------------------------------------------------------
// Sample conversion

std::size_t sample_size(SampleType t) {
  switch (t) {
    case SampleType::uint8: return 1;
    case SampleType::int16:
    case SampleType::uint16: return 2;
    case SampleType::int32:
    case SampleType::float32: return 4;
    case SampleType::float64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

std::vector<double> decode_samples(std::string_view data, SampleType t, std::size_t n) {
  const std::size_t sz = sample_size(t);
  if (data.size() < n * sz) throw Error(ErrorCode::CorruptHeader, "voxel data shorter than the header declares");
  std::vector<double> values(n);
  const char* p = data.data();
  for (std::size_t i = 0; i < n; ++i, p += sz) {
    switch (t) {
      case SampleType::uint8: values[i] = load_le<std::uint8_t>(p); break;
      case SampleType::int16: values[i] = load_le<std::int16_t>(p); break;
      case SampleType::uint16: values[i] = load_le<std::uint16_t>(p); break;
      case SampleType::int32: values[i] = load_le<std::int32_t>(p); break;
      case SampleType::float32: values[i] = load_le<float>(p); break;
      case SampleType::float64: values[i] = load_le<double>(p); break;
    }
  }
  return values;
}

template <typename T>
T clamp_to(double v) {
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(v);
  } else {
    const double r = std::round(v);
    return static_cast<T>(std::clamp(r, static_cast<double>(std::numeric_limits<T>::min()),
                                      static_cast<double>(std::numeric_limits<T>::max())));
  }
}

void encode_samples(std::string& out, const std::vector<double>& values, SampleType t) {
  out.reserve(out.size() + values.size() * sample_size(t));
  for (double v : values) {
    switch (t) {
      case SampleType::uint8: store_le(out, clamp_to<std::uint8_t>(v)); break;
      case SampleType::int16: store_le(out, clamp_to<std::int16_t>(v)); break;
      case SampleType::uint16: store_le(out, clamp_to<std::uint16_t>(v)); break;
      case SampleType::int32: store_le(out, clamp_to<std::int32_t>(v)); break;
      case SampleType::float32: store_le(out, static_cast<float>(v)); break;
      case SampleType::float64: store_le(out, v); break;
    }
  }
}

std::size_t total_samples(const Dims& d, int frames) { return voxel_count(d) * static_cast<std::size_t>(frames); }

// ---------------------------------------------------------------------------
// NIfTI-1

constexpr std::size_t kNiftiHeader = 348;
constexpr std::size_t kNiftiDataOffset = 352;

short nifti_datatype(SampleType t) {
  switch (t) {
    case SampleType::uint8: return 2;
    case SampleType::int16: return 4;
    case SampleType::int32: return 8;
    case SampleType::float32: return 16;
    case SampleType::float64: return 64;
    case SampleType::uint16: return 512;
  }
  return 64;
}

SampleType sample_type_from_nifti(short code) {
  switch (code) {
    case 2: return SampleType::uint8;
    case 4: return SampleType::int16;
    case 8: return SampleType::int32;
    case 16: return SampleType::float32;
    case 64: return SampleType::float64;
    case 512: return SampleType::uint16;
    default: throw Error(ErrorCode::UnsupportedFormat, "unsupported NIfTI datatype " + std::to_string(code));
  }
}

double nifti_time_scale_to_ms(char xyzt_units) {
  switch (xyzt_units & 0x38) {
    case 8: return 1000.0;   // seconds
    case 24: return 0.001;   // microseconds
    default: return 1.0;     // milliseconds or unspecified
  }
}

double nifti_space_scale_to_mm(char xyzt_units) {
  switch (xyzt_units & 0x07) {
    case 1: return 1000.0;  // meters
    case 3: return 0.001;   // micrometers
    default: return 1.0;
  }
}

Affine nifti_affine(const char* h) {
  const auto f = [h](std::size_t off) { return static_cast<double>(load_le<float>(h + off)); };
  const short qform = load_le<std::int16_t>(h + 252);
  const short sform = load_le<std::int16_t>(h + 254);
  const double space = nifti_space_scale_to_mm(h[123]);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  if (sform > 0) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = f(280 + 16 * r + 4 * c);
  } else if (qform > 0) {
    const double b = f(256), c = f(260), d = f(264);
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    Eigen::Matrix3d r;
    r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
        2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
        2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
    const double qfac = f(76) < 0.0 ? -1.0 : 1.0;
    m.topLeftCorner<3, 3>() = r * Eigen::Vector3d(f(80), f(84), qfac * f(88)).asDiagonal();
    m.topRightCorner<3, 1>() = Vec3(f(268), f(272), f(276));
  } else {
    m.topLeftCorner<3, 3>() = Eigen::Vector3d(f(80), f(84), f(88)).asDiagonal();
  }
  m.topRows<3>() *= space;
  return Affine(m);
}

// ---------------------------------------------------------------------------
// NRRD

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

SampleType sample_type_from_nrrd(const std::string& type) {
  static const std::map<std::string, SampleType> types = {
      {"uchar", SampleType::uint8},        {"unsigned char", SampleType::uint8}, {"uint8", SampleType::uint8},
      {"uint8_t", SampleType::uint8},      {"short", SampleType::int16},         {"short int", SampleType::int16},
      {"signed short", SampleType::int16}, {"int16", SampleType::int16},         {"int16_t", SampleType::int16},
      {"ushort", SampleType::uint16},      {"unsigned short", SampleType::uint16}, {"uint16", SampleType::uint16},
      {"uint16_t", SampleType::uint16},    {"int", SampleType::int32},           {"signed int", SampleType::int32},
      {"int32", SampleType::int32},        {"int32_t", SampleType::int32},       {"float", SampleType::float32},
      {"double", SampleType::float64}};
  const auto it = types.find(type);
  if (it == types.end()) throw Error(ErrorCode::UnsupportedFormat, "unsupported NRRD type: " + type);
  return it->second;
}

std::string_view nrrd_type_name(SampleType t) {
  switch (t) {
    case SampleType::uint8: return "uint8";
    case SampleType::int16: return "int16";
    case SampleType::uint16: return "uint16";
    case SampleType::int32: return "int32";
    case SampleType::float32: return "float";
    case SampleType::float64: return "double";
  }
  return "double";
}

std::vector<Vec3> parse_vectors(const std::string& text) {
  std::vector<Vec3> out;
  std::size_t pos = 0;
  while ((pos = text.find('(', pos)) != std::string::npos) {
    const std::size_t close = text.find(')', pos);
    if (close == std::string::npos) throw Error(ErrorCode::CorruptHeader, "unterminated NRRD vector");
    std::string inner = text.substr(pos + 1, close - pos - 1);
    std::replace(inner.begin(), inner.end(), ',', ' ');
    std::istringstream ss(inner);
    Vec3 v;
    if (!(ss >> v.x() >> v.y() >> v.z())) throw Error(ErrorCode::CorruptHeader, "bad NRRD vector: " + inner);
    out.push_back(v);
    pos = close + 1;
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string vector_text(const Vec3& v) { return "(" + fmt17(v.x()) + "," + fmt17(v.y()) + "," + fmt17(v.z()) + ")"; }

}  // namespace

VolumeFormat volume_format_from_path(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return VolumeFormat::nifti;
  if (ends_with(name, ".nrrd")) return VolumeFormat::nrrd;
  throw Error(ErrorCode::UnsupportedFormat, "unknown volume extension: " + name);
}

ScalarVolume parse_nifti(std::string_view raw) {
  std::string inflated;
  if (is_gzip(raw)) {
    inflated = gzip_decompress(raw);
    raw = inflated;
  }
  if (raw.size() < kNiftiHeader) throw Error(ErrorCode::CorruptHeader, "NIfTI header truncated");
  const char* h = raw.data();
  if (load_le<std::int32_t>(h) != 348) {
    throw Error(load_le<std::int32_t>(h) == 0x5c010000 ? ErrorCode::UnsupportedFormat : ErrorCode::CorruptHeader,
                "not a little-endian NIfTI-1 header");
  }
  if (std::memcmp(h + 344, "n+1", 4) != 0) throw Error(ErrorCode::UnsupportedFormat, "only single-file NIfTI-1 is read");

  const int ndim = load_le<std::int16_t>(h + 40);
  if (ndim < 3 || ndim > 4) throw Error(ErrorCode::UnsupportedFormat, "NIfTI must be 3D or 4D");
  Dims d{};
  for (int a = 0; a < 3; ++a) d[a] = load_le<std::int16_t>(h + 42 + 2 * a);
  const int frames = ndim == 4 ? load_le<std::int16_t>(h + 48) : 1;
  if (d[0] < 1 || d[1] < 1 || d[2] < 1 || frames < 1) throw Error(ErrorCode::CorruptHeader, "non-positive NIfTI dimension");

  const SampleType type = sample_type_from_nifti(load_le<std::int16_t>(h + 70));
  const double offset = load_le<float>(h + 108);
  if (offset < kNiftiHeader || offset > static_cast<double>(raw.size()))
    throw Error(ErrorCode::CorruptHeader, "vox_offset outside the file");
  std::vector<double> values =
      decode_samples(raw.substr(static_cast<std::size_t>(offset)), type, total_samples(d, frames));
  const double slope = load_le<float>(h + 112), inter = load_le<float>(h + 116);
  if (slope != 0.0 && (slope != 1.0 || inter != 0.0))
    for (double& v : values) v = v * slope + inter;

  std::vector<double> times;
  if (ndim == 4) {
    const double scale = nifti_time_scale_to_ms(h[123]);
    const double dt = load_le<float>(h + 92) * scale, t0 = load_le<float>(h + 136) * scale;
    for (int k = 0; k < frames; ++k) times.push_back(t0 + k * dt);
  }
  return ScalarVolume(d, nifti_affine(h), std::move(values), std::move(times));
}

std::string encode_nifti(const ScalarVolume& volume, SampleType type) {
  std::string h(kNiftiDataOffset, '\0');
  const auto put_i16 = [&h](std::size_t off, std::int16_t v) { std::memcpy(&h[off], &v, 2); };
  const auto put_f32 = [&h](std::size_t off, double v) {
    const float f = static_cast<float>(v);
    std::memcpy(&h[off], &f, 4);
  };
  const std::int32_t size = 348;
  std::memcpy(&h[0], &size, 4);
  const Dims& d = volume.dims();
  const int frames = volume.frame_count();
  const bool timed = !volume.time_axis().empty();
  for (int a = 0; a < 3; ++a)
    if (d[a] > 32767) throw Error(ErrorCode::InvalidArgument, "dimension too large for NIfTI-1");
  put_i16(40, timed ? 4 : 3);
  for (int a = 0; a < 3; ++a) put_i16(42 + 2 * a, static_cast<std::int16_t>(d[a]));
  put_i16(48, static_cast<std::int16_t>(frames));
  for (int a = 4; a < 8; ++a) put_i16(42 + 2 * a, 1);
  put_i16(70, nifti_datatype(type));
  put_i16(72, static_cast<std::int16_t>(8 * sample_size(type)));
  const Vec3 spacing = volume.spacing();
  put_f32(76, 1.0);
  for (int a = 0; a < 3; ++a) put_f32(80 + 4 * a, spacing[a]);
  if (timed) {
    const auto& t = volume.time_axis();
    const double dt = frames > 1 ? t[1] - t[0] : 1.0;
    for (int k = 1; k < frames; ++k) {
      if (std::abs(t[k] - (t[0] + k * dt)) > 1e-9 * std::max(1.0, std::abs(t[k])))
        throw Error(ErrorCode::InvalidArgument, "NIfTI needs uniformly spaced timepoints; use NRRD");
    }
    put_f32(92, dt);
    put_f32(136, t[0]);
  }
  put_f32(108, static_cast<double>(kNiftiDataOffset));
  put_f32(112, 1.0);
  h[123] = static_cast<char>(2 | 16);  // mm, ms
  put_i16(254, 1);                      // sform: scanner anatomical
  const Eigen::Matrix4d& m = volume.affine().matrix();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) put_f32(280 + 16 * r + 4 * c, m(r, c));
  std::memcpy(&h[344], "n+1", 4);
  encode_samples(h, volume.values(), type);
  return h;
}

ScalarVolume parse_nrrd(std::string_view raw) {
  if (raw.substr(0, 4) != "NRRD") throw Error(ErrorCode::UnsupportedFormat, "missing NRRD magic");
  const std::size_t blank = raw.find("\n\n");
  if (blank == std::string_view::npos) throw Error(ErrorCode::CorruptHeader, "NRRD header not terminated");
  std::istringstream header{std::string(raw.substr(0, blank))};
  std::string line;
  std::getline(header, line);  // magic
  std::map<std::string, std::string> fields, pairs;
  while (std::getline(header, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (const auto kv = line.find(":="); kv != std::string::npos) {
      pairs[trim(line.substr(0, kv))] = trim(line.substr(kv + 2));
    } else if (const auto colon = line.find(": "); colon != std::string::npos) {
      fields[trim(line.substr(0, colon))] = trim(line.substr(colon + 2));
    } else {
      throw Error(ErrorCode::CorruptHeader, "bad NRRD header line: " + line);
    }
  }
  const auto need = [&fields](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::CorruptHeader, "NRRD header lacks \"" + key + "\"");
    return it->second;
  };
  if (fields.count("data file") || fields.count("datafile"))
    throw Error(ErrorCode::UnsupportedFormat, "detached NRRD data is not supported");

  const SampleType type = sample_type_from_nrrd(need("type"));
  const int ndim = std::stoi(need("dimension"));
  if (ndim < 3 || ndim > 4) throw Error(ErrorCode::UnsupportedFormat, "NRRD must be 3D or 4D");
  std::istringstream sizes(need("sizes"));
  std::array<int, 4> n{1, 1, 1, 1};
  for (int a = 0; a < ndim; ++a)
    if (!(sizes >> n[a]) || n[a] < 1) throw Error(ErrorCode::CorruptHeader, "bad NRRD sizes");
  if (sample_size(type) > 1) {
    const auto e = fields.find("endian");
    if (e != fields.end() && e->second != "little") throw Error(ErrorCode::UnsupportedFormat, "big-endian NRRD");
  }

  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  if (const auto sd = fields.find("space directions"); sd != fields.end()) {
    const std::vector<Vec3> dirs = parse_vectors(sd->second);
    if (dirs.size() != 3) throw Error(ErrorCode::CorruptHeader, "expected three space directions");
    for (int a = 0; a < 3; ++a) m.block<3, 1>(0, a) = dirs[a];
  } else if (const auto sp = fields.find("spacings"); sp != fields.end()) {
    std::istringstream ss(sp->second);
    for (int a = 0; a < 3; ++a)
      if (!(ss >> m(a, a))) throw Error(ErrorCode::CorruptHeader, "bad NRRD spacings");
  }
  if (const auto so = fields.find("space origin"); so != fields.end()) {
    const std::vector<Vec3> origin = parse_vectors(so->second);
    if (origin.size() != 1) throw Error(ErrorCode::CorruptHeader, "bad NRRD space origin");
    m.topRightCorner<3, 1>() = origin[0];
  }

  const std::string encoding = fields.count("encoding") ? fields["encoding"] : "raw";
  std::string_view data = raw.substr(blank + 2);
  std::string inflated;
  if (encoding == "gzip" || encoding == "gz") {
    inflated = gzip_decompress(data);
    data = inflated;
  } else if (encoding != "raw") {
    throw Error(ErrorCode::UnsupportedFormat, "unsupported NRRD encoding: " + encoding);
  }

  const Dims d{n[0], n[1], n[2]};
  std::vector<double> values = decode_samples(data, type, total_samples(d, n[3]));
  std::vector<double> times;
  if (ndim == 4) {
    if (const auto t = pairs.find("carotid_times"); t != pairs.end()) {
      std::istringstream ss(t->second);
      double v;
      while (ss >> v) times.push_back(v);
    }
    if (static_cast<int>(times.size()) != n[3]) {
      times.clear();
      for (int k = 0; k < n[3]; ++k) times.push_back(k);
    }
  }
  return ScalarVolume(d, Affine(m), std::move(values), std::move(times));
}

std::string encode_nrrd(const ScalarVolume& volume, const VolumeWriteOptions& options) {
  const Dims& d = volume.dims();
  const bool timed = !volume.time_axis().empty();
  std::ostringstream h;
  h << "NRRD0004\n"
    << "type: " << nrrd_type_name(options.sample_type) << "\n"
    << "dimension: " << (timed ? 4 : 3) << "\n"
    << "space dimension: 3\n"
    << "sizes: " << d[0] << " " << d[1] << " " << d[2];
  if (timed) h << " " << volume.frame_count();
  const Eigen::Matrix4d& m = volume.affine().matrix();
  h << "\nspace directions: " << vector_text(m.block<3, 1>(0, 0)) << " " << vector_text(m.block<3, 1>(0, 1)) << " "
    << vector_text(m.block<3, 1>(0, 2)) << (timed ? " none" : "") << "\n"
    << "kinds: domain domain domain" << (timed ? " time" : "") << "\n"
    << "endian: little\n"
    << "encoding: " << (options.gzip ? "gzip" : "raw") << "\n"
    << "space origin: " << vector_text(m.topRightCorner<3, 1>()) << "\n";
  if (timed) {
    h << "carotid_times:=";
    for (std::size_t k = 0; k < volume.time_axis().size(); ++k) h << (k ? " " : "") << fmt17(volume.time_axis()[k]);
    h << "\n";
  }
  h << "\n";
  std::string body;
  encode_samples(body, volume.values(), options.sample_type);
  return h.str() + (options.gzip ? gzip_compress(body) : body);
}

ScalarVolume load_volume(const std::filesystem::path& path) {
  const VolumeFormat format = volume_format_from_path(path);
  const std::string bytes = read_file(path);
  return format == VolumeFormat::nifti ? parse_nifti(bytes) : parse_nrrd(bytes);
}

void save_volume(const ScalarVolume& volume, const std::filesystem::path& path, const VolumeWriteOptions& options) {
  if (volume_format_from_path(path) == VolumeFormat::nrrd) {
    write_file_atomic(path, encode_nrrd(volume, options));
    return;
  }
  const std::string bytes = encode_nifti(volume, options.sample_type);
  write_file_atomic(path, ends_with(path.filename().string(), ".gz") ? gzip_compress(bytes) : bytes);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const ScalarVolume v = load_volume(path);
  if (v.frame_count() != 1) throw Error(ErrorCode::ShapeMismatch, "a mask must be a single 3D frame");
  std::vector<std::uint8_t> bits(v.values().size());
  std::transform(v.values().begin(), v.values().end(), bits.begin(), [](double x) { return x != 0.0 ? 1 : 0; });
  return BinaryMask(v.dims(), v.affine(), std::move(bits));
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<double> values(mask.bits().begin(), mask.bits().end());
  save_volume(ScalarVolume(mask.dims(), mask.affine(), std::move(values)), path, {SampleType::uint8, true});
}

VelocityField assemble_flow(const ScalarVolume& vx, const ScalarVolume& vy, const ScalarVolume& vz, double venc,
                            double cycle_length, double scale) {
  for (const ScalarVolume* c : {&vy, &vz}) {
    if (c->dims() != vx.dims() || !(c->affine() == vx.affine()) || c->time_axis() != vx.time_axis())
      throw Error(ErrorCode::ShapeMismatch, "velocity components differ in grid or timepoints");
  }
  if (vx.time_axis().size() < 2) throw Error(ErrorCode::InvalidArgument, "a flow series needs at least two timepoints");
  std::array<std::vector<double>, 3> comps{vx.values(), vy.values(), vz.values()};
  if (scale != 1.0)
    for (auto& c : comps)
      for (double& v : c) v *= scale;
  return VelocityField(vx.dims(), vx.affine(), vx.time_axis(), cycle_length, std::move(comps), venc);
}

VelocityField load_flow(const std::filesystem::path& vx, const std::filesystem::path& vy,
                        const std::filesystem::path& vz, double venc, double cycle_length, double scale) {
  return assemble_flow(load_volume(vx), load_volume(vy), load_volume(vz), venc, cycle_length, scale);
}

void save_flow(const VelocityField& field, const std::filesystem::path& vx, const std::filesystem::path& vy,
               const std::filesystem::path& vz, const VolumeWriteOptions& options) {
  const std::array<const std::filesystem::path*, 3> paths{&vx, &vy, &vz};
  for (int a = 0; a < 3; ++a)
    save_volume(ScalarVolume(field.dims(), field.affine(), field.components()[a], field.timepoints()), *paths[a], options);
}

}  // namespace carotid
