#include "carotid/volume.hpp"

#include "carotid/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace carotid {

namespace {

constexpr double kBoundsEps = 1e-9;

std::size_t product(const Dims& dims) { return voxel_count(dims); }

void check_dims(const Dims& dims) {
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
}

// Splits a continuous coordinate into a base index and fraction, clamped so
// that base + 1 stays valid. Returns false outside [0, n-1].
bool split_axis(double x, int n, int& base, double& frac) {
  if (!(x >= -kBoundsEps && x <= (n - 1) + kBoundsEps)) return false;
  if (n == 1) {
    base = 0;
    frac = 0.0;
    return true;
  }
  x = std::clamp(x, 0.0, static_cast<double>(n - 1));
  base = std::min(static_cast<int>(std::floor(x)), n - 2);
  frac = x - base;
  return true;
}

}  // namespace

Affine::Affine() : matrix_(Eigen::Matrix4d::Identity()), inverse_(Eigen::Matrix4d::Identity()) {}

Affine::Affine(const Eigen::Matrix4d& matrix) : matrix_(matrix) {
  const double det = matrix_.topLeftCorner<3, 3>().determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) {
    throw Error(ErrorCode::InvalidArgument, "affine linear part is singular");
  }
  matrix_.row(3) << 0.0, 0.0, 0.0, 1.0;
  inverse_ = matrix_.inverse();
}

Affine Affine::from_spacing(const Vec3& spacing, const Vec3& origin) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = spacing.x();
  m(1, 1) = spacing.y();
  m(2, 2) = spacing.z();
  m.topRightCorner<3, 1>() = origin;
  return Affine(m);
}

Vec3 Affine::spacing() const {
  const Eigen::Matrix3d lin = linear();
  return {lin.col(0).norm(), lin.col(1).norm(), lin.col(2).norm()};
}

Vec3 voxel_to_world(const Vec3& voxel, const Affine& affine) { return affine.voxel_to_world(voxel); }
Vec3 world_to_voxel(const Vec3& world, const Affine& affine) { return affine.world_to_voxel(world); }

std::optional<TrilinearStencil> trilinear_stencil(const Dims& dims, const Vec3& voxel) {
  int bx = 0, by = 0, bz = 0;
  double fx = 0, fy = 0, fz = 0;
  if (!split_axis(voxel.x(), dims[0], bx, fx) || !split_axis(voxel.y(), dims[1], by, fy) ||
      !split_axis(voxel.z(), dims[2], bz, fz)) {
    return std::nullopt;
  }
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(dims[1]);
  const std::size_t dx = dims[0] > 1 ? sx : 0;
  const std::size_t dy = dims[1] > 1 ? sy : 0;
  const std::size_t dz = dims[2] > 1 ? sz : 0;
  const std::size_t base = bx * sx + by * sy + bz * sz;

  TrilinearStencil s;
  for (int c = 0; c < 8; ++c) {
    const bool ox = c & 1, oy = c & 2, oz = c & 4;
    s.index[c] = base + (ox ? dx : 0) + (oy ? dy : 0) + (oz ? dz : 0);
    s.weight[c] = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy) * (oz ? fz : 1.0 - fz);
  }
  return s;
}

std::optional<std::size_t> nearest_index(const Dims& dims, const Vec3& voxel) {
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const double x = voxel[a];
    if (!(x >= -0.5 && x < dims[a] - 0.5)) return std::nullopt;
    idx[a] = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, dims[a] - 1);
  }
  return static_cast<std::size_t>(idx[0]) +
         static_cast<std::size_t>(dims[0]) *
             (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(dims[1]) * idx[2]);
}

ScalarVolume::ScalarVolume(Dims dims, Affine affine, std::vector<double> values,
                           std::vector<double> time_axis)
    : dims_(dims), affine_(std::move(affine)), values_(std::move(values)),
      time_axis_(std::move(time_axis)) {
  check_dims(dims_);
  const std::size_t frames = time_axis_.empty() ? 1 : time_axis_.size();
  if (values_.size() != product(dims_) * frames) {
    throw Error(ErrorCode::ShapeMismatch,
                "volume has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(product(dims_) * frames));
  }
}

std::optional<double> ScalarVolume::sample_voxel(const Vec3& voxel, Interpolation mode,
                                                 int frame) const {
  const std::size_t offset = static_cast<std::size_t>(frame) * product(dims_);
  if (mode == Interpolation::nearest) {
    const auto idx = nearest_index(dims_, voxel);
    if (!idx) return std::nullopt;
    return values_[offset + *idx];
  }
  const auto stencil = trilinear_stencil(dims_, voxel);
  if (!stencil) return std::nullopt;
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) acc += stencil->weight[c] * values_[offset + stencil->index[c]];
  return acc;
}

std::optional<double> ScalarVolume::sample(const Vec3& world, Interpolation mode, int frame) const {
  return sample_voxel(affine_.world_to_voxel(world), mode, frame);
}

std::optional<double> sample_scalar(const ScalarVolume& volume, const Vec3& world,
                                    Interpolation mode) {
  return volume.sample(world, mode);
}

BinaryMask::BinaryMask(Dims dims, Affine affine, std::vector<std::uint8_t> bits)
    : dims_(dims), affine_(std::move(affine)), bits_(std::move(bits)) {
  check_dims(dims_);
  if (bits_.size() != product(dims_)) {
    throw Error(ErrorCode::ShapeMismatch, "mask bit count does not match dimensions");
  }
}

BinaryMask::BinaryMask(Dims dims, Affine affine)
    : BinaryMask(dims, std::move(affine), std::vector<std::uint8_t>(product(dims), 0)) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

std::optional<bool> BinaryMask::sample(const Vec3& world) const {
  const auto idx = nearest_index(dims_, affine_.world_to_voxel(world));
  if (!idx) return std::nullopt;
  return bits_[*idx] != 0;
}

BinaryMask BinaryMask::padded(int border) const {
  const Dims out_dims{dims_[0] + 2 * border, dims_[1] + 2 * border, dims_[2] + 2 * border};
  Eigen::Matrix4d m = affine_.matrix();
  m.topRightCorner<3, 1>() = affine_.voxel_to_world(Vec3::Constant(-border));
  BinaryMask out(out_dims, Affine(m));
  for (int k = 0; k < dims_[2]; ++k)
    for (int j = 0; j < dims_[1]; ++j)
      for (int i = 0; i < dims_[0]; ++i)
        if (at(i, j, k)) out.set(i + border, j + border, k + border, true);
  return out;
}

VelocityField::VelocityField(Dims dims, Affine affine, std::vector<double> timepoints,
                             double cycle_length, std::array<std::vector<double>, 3> components,
                             double venc)
    : dims_(dims), affine_(std::move(affine)), timepoints_(std::move(timepoints)),
      cycle_length_(cycle_length), components_(std::move(components)), venc_(venc) {
  check_dims(dims_);
  if (timepoints_.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "velocity field needs at least 2 timepoints");
  }
  for (std::size_t i = 1; i < timepoints_.size(); ++i) {
    if (!(timepoints_[i] > timepoints_[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "timepoints must be strictly increasing");
    }
  }
  if (!(cycle_length_ >= timepoints_.back()) || !(cycle_length_ > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "cycle length must cover the last timepoint");
  }
  const std::size_t expected = product(dims_) * timepoints_.size();
  for (const auto& c : components_) {
    if (c.size() != expected) {
      throw Error(ErrorCode::ShapeMismatch, "velocity component size does not match grid");
    }
  }
}

VelocityField::TimeBracket VelocityField::bracket(double t_ms) const {
  double t = std::fmod(t_ms, cycle_length_);
  if (t < 0.0) t += cycle_length_;
  const double first_t = timepoints_.front();
  const double last_t = timepoints_.back();
  if (t < first_t) t += cycle_length_;

  TimeBracket b;
  if (t >= last_t) {
    const double span = first_t + cycle_length_ - last_t;
    b.first = frame_count() - 1;
    b.second = 0;
    b.weight = span > 0.0 ? std::clamp((t - last_t) / span, 0.0, 1.0) : 0.0;
    return b;
  }
  const auto it = std::upper_bound(timepoints_.begin(), timepoints_.end(), t);
  const int i = static_cast<int>(it - timepoints_.begin()) - 1;
  b.first = i;
  b.second = i + 1;
  b.weight = (t - timepoints_[i]) / (timepoints_[i + 1] - timepoints_[i]);
  return b;
}

std::optional<Vec3> VelocityField::sample(const Vec3& world, double t_ms) const {
  const auto stencil = trilinear_stencil(dims_, affine_.world_to_voxel(world));
  if (!stencil) return std::nullopt;
  const TimeBracket b = bracket(t_ms);
  const std::size_t n = product(dims_);
  const std::size_t o1 = static_cast<std::size_t>(b.first) * n;
  const std::size_t o2 = static_cast<std::size_t>(b.second) * n;
  Vec3 v1 = Vec3::Zero();
  Vec3 v2 = Vec3::Zero();
  for (int a = 0; a < 3; ++a) {
    const auto& comp = components_[a];
    double s1 = 0.0, s2 = 0.0;
    for (int c = 0; c < 8; ++c) {
      s1 += stencil->weight[c] * comp[o1 + stencil->index[c]];
      s2 += stencil->weight[c] * comp[o2 + stencil->index[c]];
    }
    v1[a] = s1;
    v2[a] = s2;
  }
  return (1.0 - b.weight) * v1 + b.weight * v2;
}

std::optional<Vec3> sample_velocity(const VelocityField& field, const Vec3& world, double t_ms) {
  return field.sample(world, t_ms);
}

PlaneGrid PlaneGrid::from_extent(double extent_u, double extent_v, double spacing) {
  if (!(spacing > 0.0) || !(extent_u > 0.0) || !(extent_v > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "plane extent and spacing must be positive");
  }
  PlaneGrid g;
  g.nx = std::max(1, static_cast<int>(std::lround(extent_u / spacing)));
  g.ny = std::max(1, static_cast<int>(std::lround(extent_v / spacing)));
  g.spacing = spacing;
  return g;
}

namespace {

void check_axes(const Vec3& u, const Vec3& v) {
  constexpr double tol = 1e-6;
  if (std::abs(u.norm() - 1.0) > tol || std::abs(v.norm() - 1.0) > tol ||
      std::abs(u.dot(v)) > tol) {
    throw Error(ErrorCode::NonOrthonormalAxes, "plane axes must be orthonormal");
  }
}

}  // namespace

Image2D resample_plane(const ScalarVolume& volume, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, const PlaneGrid& grid, Interpolation mode,
                       int frame) {
  check_axes(axis_u, axis_v);
  Image2D img;
  img.grid = grid;
  img.values.assign(grid.size(), 0.0);
  img.inside.assign(grid.size(), 0);

  // Work in voxel space: the plane maps to an affine lattice of voxel coordinates.
  const Affine& aff = volume.affine();
  const Vec3 step_u = aff.world_direction_to_voxel(axis_u * grid.spacing);
  const Vec3 step_v = aff.world_direction_to_voxel(axis_v * grid.spacing);
  const Vec3 origin = aff.world_to_voxel(center) -
                     step_u * static_cast<double>(grid.nx / 2) -
                     step_v * static_cast<double>(grid.ny / 2);

  for (int j = 0; j < grid.ny; ++j) {
    const Vec3 row = origin + step_v * static_cast<double>(j);
    for (int i = 0; i < grid.nx; ++i) {
      const auto value = volume.sample_voxel(row + step_u * static_cast<double>(i), mode, frame);
      if (!value) continue;
      const std::size_t p = static_cast<std::size_t>(j) * grid.nx + i;
      img.values[p] = *value;
      img.inside[p] = 1;
    }
  }
  return img;
}

Image2D resample_plane(const ScalarVolume& volume, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, double extent_u, double extent_v, double spacing,
                       Interpolation mode, int frame) {
  return resample_plane(volume, center, axis_u, axis_v,
                        PlaneGrid::from_extent(extent_u, extent_v, spacing), mode, frame);
}

Image2D resample_plane(const BinaryMask& mask, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, const PlaneGrid& grid) {
  check_axes(axis_u, axis_v);
  Image2D img;
  img.grid = grid;
  img.values.assign(grid.size(), 0.0);
  img.inside.assign(grid.size(), 0);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const Vec2 uv = grid.pixel_center(i, j);
      const auto bit = mask.sample(center + axis_u * uv.x() + axis_v * uv.y());
      if (!bit) continue;
      const std::size_t p = static_cast<std::size_t>(j) * grid.nx + i;
      img.values[p] = *bit ? 1.0 : 0.0;
      img.inside[p] = 1;
    }
  }
  return img;
}

}  // namespace carotid
