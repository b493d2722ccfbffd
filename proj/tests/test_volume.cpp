#include "carotid/error.hpp"
#include "carotid/volume.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace carotid;
using carotid::testing::make_field;
using carotid::testing::make_volume;

namespace {

Affine random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (;;) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = u(rng) * (c == 3 ? 50.0 : 1.0);
    if (std::abs(m.topLeftCorner<3, 3>().determinant()) > 0.1) return Affine(m);
  }
}

}  // namespace

TEST(Affine, IdentityMapsVoxelToSameWorldPoint) {
  const Vec3 w = voxel_to_world(Vec3(10, 20, 5), Affine::identity());
  EXPECT_EQ(w, Vec3(10, 20, 5));
}

TEST(Affine, DiagonalSpacingScales) {
  const Affine a = Affine::from_spacing(Vec3(0.5, 0.5, 0.5));
  EXPECT_TRUE(voxel_to_world(Vec3(10, 20, 5), a).isApprox(Vec3(5, 10, 2.5)));
  EXPECT_TRUE(a.spacing().isApprox(Vec3(0.5, 0.5, 0.5)));
}

TEST(Affine, RoundTripRandomAffinesWithinOneNanometer) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Affine a = random_affine(rng);
    const Vec3 world(u(rng), u(rng), u(rng));
    const Vec3 back = voxel_to_world(world_to_voxel(world, a), a);
    EXPECT_LT((back - world).norm(), 1e-9);
    // independent oracle: direct 4x4 inverse
    const Eigen::Vector4d h = a.matrix().inverse() * world.homogeneous();
    EXPECT_LT((h.head<3>() - world_to_voxel(world, a)).norm(), 1e-9);
  }
}

TEST(Affine, SingularMatrixRejected) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(2, 2) = 0.0;
  EXPECT_THROW(Affine{m}, Error);
}

TEST(SampleScalar, ConstantVolume) {
  const auto vol = make_volume({8, 8, 8}, Affine::from_spacing(Vec3(0.7, 0.7, 1.1)),
                               [](const Vec3&) { return 7.0; });
  EXPECT_DOUBLE_EQ(*sample_scalar(vol, Vec3(2.13, 3.3, 4.4), Interpolation::trilinear), 7.0);
  EXPECT_DOUBLE_EQ(*sample_scalar(vol, Vec3(2.13, 3.3, 4.4), Interpolation::nearest), 7.0);
}

TEST(SampleScalar, RampReproducedAtHalfVoxel) {
  const auto vol = make_volume({6, 4, 4}, Affine::identity(), [](const Vec3& p) { return p.x(); });
  EXPECT_NEAR(*sample_scalar(vol, Vec3(2.5, 1.2, 0.3), Interpolation::trilinear), 2.5, 1e-12);
  EXPECT_DOUBLE_EQ(*sample_scalar(vol, Vec3(2.4, 1.2, 0.3), Interpolation::nearest), 2.0);
}

TEST(SampleScalar, OutsideIsTypedValue) {
  const auto vol = make_volume({4, 4, 4}, Affine::identity(), [](const Vec3&) { return 1.0; });
  EXPECT_FALSE(sample_scalar(vol, Vec3(3.5, 1, 1), Interpolation::trilinear).has_value());
  EXPECT_FALSE(sample_scalar(vol, Vec3(-0.1, 1, 1), Interpolation::trilinear).has_value());
  EXPECT_FALSE(sample_scalar(vol, Vec3(1, 1, 3.6), Interpolation::nearest).has_value());
  EXPECT_TRUE(sample_scalar(vol, Vec3(3.0, 3.0, 0.0), Interpolation::trilinear).has_value());
}

TEST(SampleScalar, TrilinearReproducesAffineFieldsUnderRandomAffines) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Affine a = random_affine(rng);
    const Vec3 g(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    const double c = u(rng) * 10;
    auto f = [&](const Vec3& p) { return g.dot(p) + c; };
    const auto vol = make_volume({7, 6, 5}, a, f);
    for (int s = 0; s < 50; ++s) {
      const Vec3 voxel(u(rng) * 6, u(rng) * 5, u(rng) * 4);
      const Vec3 w = a.voxel_to_world(voxel);
      EXPECT_NEAR(*vol.sample(w), f(w), 1e-6);
    }
  }
}

TEST(SampleVelocity, LinearInTimeBetweenFrames) {
  const Dims dims{3, 3, 3};
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.assign(27 * 2, 0.0);
  for (std::size_t i = 0; i < 27; ++i) comps[0][27 + i] = 1.0;
  const VelocityField f(dims, Affine::identity(), {0.0, 500.0}, 1000.0, comps, 1.5);
  const Vec3 p(1, 1, 1);
  EXPECT_TRUE(sample_velocity(f, p, 250.0)->isApprox(Vec3(0.5, 0, 0)));
  EXPECT_TRUE(sample_velocity(f, p, 1250.0)->isApprox(Vec3(0.5, 0, 0)));
  // wrap interval between the last frame (500) and the first frame (1000 == 0)
  EXPECT_TRUE(sample_velocity(f, p, 750.0)->isApprox(Vec3(0.5, 0, 0)));
  EXPECT_FALSE(sample_velocity(f, Vec3(5, 1, 1), 0.0).has_value());
}

TEST(SampleVelocity, PeriodicBitForBit) {
  const auto field = make_field({5, 5, 5}, Affine::from_spacing(Vec3(0.5, 0.5, 0.5)),
                                [](const Vec3& p) { return Vec3(p.y(), -p.x(), 0.3); }, 4, 800.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int s = 0; s < 200; ++s) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const double t = std::floor(u(rng) * 400.0);
    const Vec3 a = *field.sample(p, t);
    for (int k : {1, 2, 5, -3}) {
      const Vec3 b = *field.sample(p, t + k * 800.0);
      EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 3), 0);
    }
  }
}

TEST(SampleVelocity, RigidRotationFieldMatchesAnalytic) {
  const double omega = 0.02;
  auto rot = [&](const Vec3& p) { return Vec3(-omega * p.y(), omega * p.x(), 0.0); };
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix() * 0.8;
  m.topRightCorner<3, 1>() = Vec3(-5, -5, -5);
  const Affine a(m);
  const auto field = make_field({14, 14, 14}, a, rot, 3, 900.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 12.5);
  for (int s = 0; s < 500; ++s) {
    const Vec3 w = a.voxel_to_world(Vec3(u(rng), u(rng), u(rng)));
    const auto v = field.sample(w, u(rng) * 100.0);
    ASSERT_TRUE(v.has_value());
    EXPECT_LT((*v - rot(w)).norm(), 1e-6);
  }
}

TEST(ResamplePlane, AxialPlaneOnIdentityGridEqualsSlice) {
  const auto vol = make_volume({10, 10, 6}, Affine::identity(),
                               [](const Vec3& p) { return p.x() * 3 + p.y() * p.y() + p.z() * 100; });
  const Image2D img = resample_plane(vol, Vec3(5, 5, 3), Vec3::UnitX(), Vec3::UnitY(), 10.0, 10.0, 1.0);
  ASSERT_EQ(img.grid.nx, 10);
  for (int j = 0; j < 10; ++j)
    for (int i = 0; i < 10; ++i) {
      EXPECT_DOUBLE_EQ(img.at(i, j), vol.at(i, j, 3));
    }
}

TEST(ResamplePlane, ConstantVolumeGivesConstantImageOnObliquePlane) {
  const auto vol = make_volume({12, 12, 12}, Affine::from_spacing(Vec3(0.5, 0.6, 0.7)),
                               [](const Vec3&) { return 42.0; });
  const Vec3 u = Vec3(1, 1, 0).normalized();
  const Vec3 v = Vec3(-1, 1, 1).normalized();
  const Image2D img = resample_plane(vol, Vec3(3, 3.5, 4), u, v, 3.0, 3.0, 0.25);
  for (std::size_t p = 0; p < img.values.size(); ++p) {
    if (img.inside[p]) EXPECT_DOUBLE_EQ(img.values[p], 42.0);
  }
}

TEST(ResamplePlane, RampOn45DegreePlaneMatchesAnalytic) {
  auto f = [](const Vec3& p) { return 2.0 * p.x() - 0.5 * p.y() + 0.25 * p.z() + 3.0; };
  const auto vol = make_volume({20, 20, 20}, Affine::from_spacing(Vec3(0.5, 0.5, 0.5)), f);
  const Vec3 u = Vec3(1, 0, 1).normalized();
  const Vec3 v = Vec3::UnitY();
  const Vec3 c(5, 5, 5);
  const Image2D img = resample_plane(vol, c, u, v, 6.0, 6.0, 0.2);
  int checked = 0;
  for (int j = 0; j < img.grid.ny; ++j)
    for (int i = 0; i < img.grid.nx; ++i) {
      const Vec2 uv = img.grid.pixel_center(i, j);
      const Vec3 w = c + u * uv.x() + v * uv.y();
      ASSERT_TRUE(img.inside[j * img.grid.nx + i]);
      EXPECT_NEAR(img.at(i, j), f(w), 1e-6);
      ++checked;
    }
  EXPECT_EQ(checked, 30 * 30);
}

TEST(ResamplePlane, NonOrthonormalAxesRejected) {
  const auto vol = make_volume({4, 4, 4}, Affine::identity(), [](const Vec3&) { return 0.0; });
  try {
    resample_plane(vol, Vec3(2, 2, 2), Vec3::UnitX(), Vec3(1, 1, 0).normalized(), 2, 2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonOrthonormalAxes);
  }
}

TEST(ResamplePlane, PixelsOutsideGridAreFlagged) {
  const auto vol = make_volume({4, 4, 4}, Affine::identity(), [](const Vec3&) { return 5.0; });
  const Image2D img = resample_plane(vol, Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 4, 4, 1);
  EXPECT_EQ(img.inside[0], 0);
  EXPECT_EQ(img.values[0], 0.0);
  EXPECT_EQ(img.inside[2 * 4 + 2], 1);
}

TEST(BinaryMask, PaddingKeepsWorldPositions) {
  BinaryMask m({3, 3, 3}, Affine::from_spacing(Vec3(0.5, 0.5, 0.5), Vec3(1, 2, 3)));
  m.set(1, 1, 1, true);
  const BinaryMask p = m.padded();
  EXPECT_EQ(p.dims()[0], 5);
  EXPECT_EQ(p.count(), 1u);
  EXPECT_TRUE(*p.sample(m.affine().voxel_to_world(Vec3(1, 1, 1))));
}
