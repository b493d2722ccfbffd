#include "carotid/error.hpp"
#include "carotid/io.hpp"
#include "carotid/phantom.hpp"
#include "carotid/session.hpp"
#include "carotid/volume_io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

using namespace carotid;
using carotid::testing::circle_points;
using carotid::testing::make_volume;

namespace {

namespace fs = std::filesystem;

class TempDir {
public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("carotid_store_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

template <typename T>
void poke(std::string& h, std::size_t off, T v) {
  std::memcpy(&h[off], &v, sizeof(T));
}

// Minimal NIfTI-1 writer kept independent of the library encoder.
std::string handmade_nifti(int n, float spacing, short qform, const std::array<float, 3>& quat_bcd) {
  std::string h(352, '\0');
  poke<int>(h, 0, 348);
  poke<short>(h, 40, 3);
  for (int a = 0; a < 3; ++a) poke<short>(h, 42 + 2 * a, static_cast<short>(n));
  poke<short>(h, 70, 16);  // float32
  poke<short>(h, 72, 32);
  poke<float>(h, 76, 1.0f);
  for (int a = 0; a < 3; ++a) poke<float>(h, 80 + 4 * a, spacing);
  poke<float>(h, 108, 352.0f);
  poke<short>(h, 252, qform);
  for (int a = 0; a < 3; ++a) poke<float>(h, 256 + 4 * a, quat_bcd[a]);
  poke<float>(h, 268, -10.0f);
  poke<float>(h, 272, 5.0f);
  poke<float>(h, 276, 2.5f);
  std::memcpy(&h[344], "n+1", 4);
  for (int i = 0; i < n * n * n; ++i) {
    const float v = static_cast<float>(i % 251) * 0.5f;
    h.append(reinterpret_cast<const char*>(&v), 4);
  }
  return h;
}

ScalarVolume sample_volume(bool timed) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix() *
                            Eigen::Vector3d(0.5, 0.7, 1.1).asDiagonal();
  m.topRightCorner<3, 1>() = Vec3(-12.3, 4.56, 7.0);
  const Dims d{7, 6, 5};
  std::vector<double> values;
  const int frames = timed ? 3 : 1;
  for (int f = 0; f < frames; ++f)
    for (std::size_t i = 0; i < voxel_count(d); ++i) values.push_back(std::sin(0.1 * i + f) * 1e3 / 7.0);
  return ScalarVolume(d, Affine(m), values, timed ? std::vector<double>{0.0, 33.3, 66.6} : std::vector<double>{});
}

Session sample_session() {
  Session s;
  s.study_id = "phantom-a";
  Polyline3 pts;
  for (int i = 0; i <= 20; ++i) pts.emplace_back(0.1 * std::sin(0.2 * i), 0.0, i);
  s.centerlines.emplace_back(pts, Branch::ICA);
  s.planes = cross_sections(s.centerlines[0], 4.0, 20.0, 0.25);
  SliceAnnotation a;
  a.plane_id = s.planes[1].id;
  a.lumen = ClosedSplineContour{circle_points(8, 3.0), ContourRole::lumen};
  a.wall = ClosedSplineContour{circle_points(10, 4.1, Vec2(0.1, 0.0)), ContourRole::outer_wall};
  a.source = AnnotationSource::auto_corrected;
  s.annotations.push_back(a);
  SliceAnnotation b;
  b.plane_id = s.planes[2].id;
  b.timepoint = 125.0;
  b.lumen = ClosedSplineContour{circle_points(6, 2.0, Vec2(0.3, -0.2), 0.1), ContourRole::lumen};
  b.usable = false;
  s.annotations.push_back(b);
  s.parameters.mu = 0.004;
  s.volumes.push_back({"bb", "bb.nii.gz", std::string(64, 'a')});
  return s;
}

void expect_near_session(const Session& a, const Session& b) {
  ASSERT_EQ(a.planes.size(), b.planes.size());
  ASSERT_EQ(a.annotations.size(), b.annotations.size());
  EXPECT_EQ(a.study_id, b.study_id);
  EXPECT_EQ(a.parameters, b.parameters);
  EXPECT_EQ(a.volumes, b.volumes);
  for (std::size_t i = 0; i < a.planes.size(); ++i) {
    EXPECT_EQ(a.planes[i].id, b.planes[i].id);
    EXPECT_LT((a.planes[i].center - b.planes[i].center).norm(), 1e-7);
    EXPECT_LT((a.planes[i].frame.normal - b.planes[i].frame.normal).norm(), 1e-8);
  }
  for (std::size_t i = 0; i < a.annotations.size(); ++i) {
    const auto& x = a.annotations[i];
    const auto& y = b.annotations[i];
    EXPECT_EQ(x.plane_id, y.plane_id);
    EXPECT_EQ(x.usable, y.usable);
    EXPECT_EQ(x.source, y.source);
    EXPECT_EQ(x.timepoint, y.timepoint);
    ASSERT_EQ(x.lumen.has_value(), y.lumen.has_value());
    ASSERT_EQ(x.wall.has_value(), y.wall.has_value());
    for (std::size_t k = 0; x.lumen && k < x.lumen->seeds.size(); ++k)
      EXPECT_LT((x.lumen->seeds[k] - y.lumen->seeds[k]).norm(), 1e-8);
  }
}

}  // namespace

TEST(Hashing, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("hello"), "aGVsbG8=");
  EXPECT_EQ(base64_encode(""), "");
}

TEST(Gzip, DeterministicAndReversible) {
  std::string data;
  for (int i = 0; i < 100000; ++i) data += static_cast<char>(i * 7 % 13);
  const std::string a = gzip_compress(data);
  EXPECT_EQ(a, gzip_compress(data));
  EXPECT_EQ(a.substr(4, 4), std::string(4, '\0'));  // mtime
  EXPECT_EQ(gzip_decompress(a), data);
  EXPECT_THROW(gzip_decompress(a.substr(0, a.size() / 2)), Error);
}

TEST(Nifti, HeaderFieldsFromPixdim) {
  const ScalarVolume v = parse_nifti(handmade_nifti(64, 0.5f, 0, {0, 0, 0}));
  EXPECT_EQ(v.dims(), (Dims{64, 64, 64}));
  EXPECT_EQ(v.spacing(), Vec3(0.5, 0.5, 0.5));
  EXPECT_EQ(v.frame_count(), 1);
  EXPECT_EQ(v.at(10, 0, 0), 5.0);
  EXPECT_EQ(v.at(3, 1, 0), static_cast<float>(67 % 251) * 0.5f);
}

TEST(Nifti, QformQuaternion) {
  // 90 degrees about z: (b, c, d) = (0, 0, sin 45)
  const float s = static_cast<float>(std::sqrt(0.5));
  const ScalarVolume v = parse_nifti(handmade_nifti(4, 2.0f, 1, {0, 0, s}));
  EXPECT_LT((v.affine().voxel_to_world(Vec3(1, 0, 0)) - Vec3(-10, 7, 2.5)).norm(), 1e-6);
  EXPECT_LT((v.affine().voxel_to_world(Vec3(0, 1, 0)) - Vec3(-12, 5, 2.5)).norm(), 1e-6);
}

TEST(Nifti, RoundTripPlainAndGzip) {
  TempDir dir("nifti");
  const ScalarVolume v = sample_volume(true);
  for (const char* name : {"v.nii", "v.nii.gz"}) {
    save_volume(v, dir / name);
    const ScalarVolume back = load_volume(dir / name);
    EXPECT_EQ(back.dims(), v.dims());
    EXPECT_EQ(back.values(), v.values());  // float64 samples
    EXPECT_LT((back.affine().matrix() - v.affine().matrix()).norm(), 1e-5);  // sform is float32
    ASSERT_EQ(back.time_axis().size(), 3u);
    EXPECT_NEAR(back.time_axis()[2], 66.6, 1e-4);
  }
  EXPECT_EQ(read_file(dir / "v.nii.gz").substr(0, 2), "\x1f\x8b");
}

TEST(Nrrd, RoundTripIsExact) {
  TempDir dir("nrrd");
  for (bool timed : {false, true}) {
    const ScalarVolume v = sample_volume(timed);
    for (bool gz : {false, true}) {
      save_volume(v, dir / "v.nrrd", {SampleType::float64, gz});
      const ScalarVolume back = load_volume(dir / "v.nrrd");
      EXPECT_EQ(back.dims(), v.dims());
      EXPECT_EQ(back.values(), v.values());
      EXPECT_TRUE(back.affine() == v.affine());
      EXPECT_EQ(back.time_axis(), v.time_axis());
    }
  }
}

TEST(Nrrd, ForeignHeaderWithSpacings) {
  std::string text = "NRRD0005\n# comment\ntype: short\ndimension: 3\nsizes: 2 2 2\nspacings: 0.5 0.5 2\nendian: little\nencoding: raw\n\n";
  for (short i = 0; i < 8; ++i) text.append(reinterpret_cast<const char*>(&i), 2);
  const ScalarVolume v = parse_nrrd(text);
  EXPECT_EQ(v.spacing(), Vec3(0.5, 0.5, 2));
  EXPECT_EQ(v.at(1, 1, 1), 7.0);
}

TEST(VolumeIo, ErrorCases) {
  TempDir dir("errors");
  const ScalarVolume v = sample_volume(false);
  save_volume(v, dir / "v.nii");
  save_volume(v, dir / "w.nrrd", {SampleType::float32, false});
  const std::string nii = read_file(dir / "v.nii");
  const std::string nrrd = read_file(dir / "w.nrrd");
  const auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code_of([&] { parse_nifti(nii.substr(0, nii.size() - 10)); }), ErrorCode::CorruptHeader);
  EXPECT_EQ(code_of([&] { parse_nifti(nii.substr(0, 100)); }), ErrorCode::CorruptHeader);
  EXPECT_EQ(code_of([&] { parse_nrrd(nrrd.substr(0, nrrd.size() - 3)); }), ErrorCode::CorruptHeader);
  EXPECT_EQ(code_of([&] { parse_nrrd("PNG...."); }), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of([&] { load_volume(dir / "v.mha"); }), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(code_of([&] { load_volume(dir / "missing.nii"); }), ErrorCode::IoFailure);
}

TEST(VolumeIo, MaskRoundTrip) {
  TempDir dir("mask");
  BinaryMask m({5, 4, 3}, Affine::from_spacing(Vec3(0.5, 0.5, 1.0), Vec3(1, 2, 3)));
  m.set(1, 2, 0, true);
  m.set(4, 3, 2, true);
  save_mask(m, dir / "m.nii.gz");
  const BinaryMask back = load_mask(dir / "m.nii.gz");
  EXPECT_EQ(back.bits(), m.bits());
  EXPECT_TRUE(back.affine() == m.affine());
}

TEST(Flow, PhantomComponentsReassemble) {
  TempDir dir("flow");
  PhantomSpec spec;
  spec.kind = PhantomKind::straight_tube;
  spec.length = 6.0;
  spec.voxel_spacing = 1.0;
  spec.timepoints = 4;
  const VelocityField f = generate_flow(spec);
  save_flow(f, dir / "vx.nii.gz", dir / "vy.nii.gz", dir / "vz.nii.gz");
  const VelocityField g = load_flow(dir / "vx.nii.gz", dir / "vy.nii.gz", dir / "vz.nii.gz", f.venc(), f.cycle_length());
  const std::size_t n = voxel_count(f.dims());
  for (int fr = 0; fr < 4; ++fr)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = fr * n + i;
      const double expect = std::sqrt(std::pow(f.components()[0][k], 2) + std::pow(f.components()[1][k], 2) +
                                      std::pow(f.components()[2][k], 2));
      const double got = std::sqrt(std::pow(g.components()[0][k], 2) + std::pow(g.components()[1][k], 2) +
                                   std::pow(g.components()[2][k], 2));
      ASSERT_EQ(got, expect);
    }
  EXPECT_EQ(g.timepoints(), f.timepoints());
}

TEST(Flow, MismatchAndSingleFrame) {
  const ScalarVolume a(Dims{2, 2, 2}, Affine::identity(), std::vector<double>(16, 0.0), {0.0, 10.0});
  const ScalarVolume b(Dims{2, 2, 1}, Affine::identity(), std::vector<double>(8, 0.0), {0.0, 10.0});
  try {
    assemble_flow(a, a, b, 1.5, 1000.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  const ScalarVolume single(Dims{2, 2, 2}, Affine::identity(), std::vector<double>(8, 0.0), {0.0});
  EXPECT_THROW(assemble_flow(single, single, single, 1.5, 1000.0), Error);
}

TEST(Session, RoundTripIsCanonical) {
  TempDir dir("session");
  const Session s = sample_session();
  save_session(s, dir / "s.json");
  const Session back = load_session(dir / "s.json");
  expect_near_session(s, back);
  // a second save of the loaded session reproduces the same bytes
  save_session(back, dir / "t.json");
  EXPECT_EQ(read_file(dir / "s.json"), read_file(dir / "t.json"));
  EXPECT_EQ(load_session(dir / "t.json"), back);
  const std::string text = read_file(dir / "s.json");
  EXPECT_LT(text.find("\"annotations\""), text.find("\"centerlines\""));
}

TEST(Session, VersionAndReferenceChecks) {
  Json j = to_json(sample_session());
  j["version"] = 99;
  try {
    session_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaVersionUnsupported);
  }
  j = to_json(sample_session());
  j["annotations"][0]["plane_id"] = 999;
  try {
    session_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    EXPECT_NE(std::string(e.what()).find("999"), std::string::npos);
  }
  j = to_json(sample_session());
  j["annotations"][0]["lumen"]["seeds"] = to_json(ClosedSplineContour{circle_points(8, 6.0), ContourRole::lumen})["seeds"];
  try {
    session_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    EXPECT_NE(std::string(e.what()).find("lumen not strictly inside wall"), std::string::npos);
  }
  EXPECT_THROW(session_from_json(Json{{"version", 1}}), Error);
}

TEST(Study, PhantomStudyRoundTripAndStaleness) {
  TempDir dir("study");
  PhantomSpec spec;
  spec.kind = PhantomKind::straight_tube;
  spec.length = 6.0;
  spec.voxel_spacing = 1.0;
  spec.timepoints = 2;
  const Phantom p = generate_phantom(spec);
  Study st;
  st.id = "tube";
  st.bb = p.bb;
  st.seg3d_mask = p.lumen_mask;
  st.flow = generate_flow(spec);
  st.extras = Json{{"phantom", to_json(spec)}};
  save_study(st, dir / "study.json");
  const Study back = load_study(dir / "study.json");
  EXPECT_EQ(back.id, "tube");
  EXPECT_EQ(back.bb->values(), p.bb.values());
  EXPECT_EQ(back.seg3d_mask->bits(), p.lumen_mask.bits());
  EXPECT_EQ(back.flow->components()[2], st.flow->components()[2]);
  EXPECT_EQ(back.extras, st.extras);
  EXPECT_FALSE(back.tof.has_value());

  Session s;
  s.study_id = "tube";
  s.volumes = back.files;
  EXPECT_TRUE(stale_volumes(s, dir.path()).empty());
  save_volume(*back.bb, dir / "bb.nii.gz", {SampleType::float32, true});
  EXPECT_EQ(stale_volumes(s, dir.path()), std::vector<std::string>{"bb"});
}
