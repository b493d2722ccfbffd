#pragma once

#include "carotid/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace carotid {

/// Homogeneous map from continuous voxel index to world millimeters.
class Affine {
public:
  Affine();
  explicit Affine(const Eigen::Matrix4d& matrix);

  static Affine identity() { return Affine{}; }
  static Affine from_spacing(const Vec3& spacing, const Vec3& origin = Vec3::Zero());

  [[nodiscard]] const Eigen::Matrix4d& matrix() const { return matrix_; }
  [[nodiscard]] const Eigen::Matrix4d& inverse() const { return inverse_; }
  [[nodiscard]] Eigen::Matrix3d linear() const { return matrix_.topLeftCorner<3, 3>(); }
  [[nodiscard]] Vec3 translation() const { return matrix_.topRightCorner<3, 1>(); }

  /// Column norms of the linear part: physical length of one voxel step per axis.
  [[nodiscard]] Vec3 spacing() const;

  [[nodiscard]] Vec3 voxel_to_world(const Vec3& voxel) const {
    return matrix_.topLeftCorner<3, 3>() * voxel + matrix_.topRightCorner<3, 1>();
  }
  [[nodiscard]] Vec3 world_to_voxel(const Vec3& world) const {
    return inverse_.topLeftCorner<3, 3>() * world + inverse_.topRightCorner<3, 1>();
  }
  /// Maps a world-space direction into voxel-index steps.
  [[nodiscard]] Vec3 world_direction_to_voxel(const Vec3& direction) const {
    return inverse_.topLeftCorner<3, 3>() * direction;
  }

  bool operator==(const Affine& other) const { return matrix_ == other.matrix_; }

private:
  Eigen::Matrix4d matrix_;
  Eigen::Matrix4d inverse_;
};

Vec3 voxel_to_world(const Vec3& voxel, const Affine& affine);
Vec3 world_to_voxel(const Vec3& world, const Affine& affine);

using Dims = std::array<int, 3>;

inline std::size_t voxel_count(const Dims& dims) {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
         static_cast<std::size_t>(dims[2]);
}

enum class Interpolation { trilinear, nearest };

/// Precomputed corner indices and weights for trilinear lookup in one frame.
struct TrilinearStencil {
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
};

/// Builds the stencil for a continuous voxel coordinate, or nullopt when the
/// coordinate lies outside [0, n-1] on some axis.
std::optional<TrilinearStencil> trilinear_stencil(const Dims& dims, const Vec3& voxel);
/// Nearest voxel linear index, or nullopt outside [-0.5, n-0.5) on some axis.
std::optional<std::size_t> nearest_index(const Dims& dims, const Vec3& voxel);

/// Immutable scalar grid, x fastest, optionally with a trailing time axis.
class ScalarVolume {
public:
  ScalarVolume(Dims dims, Affine affine, std::vector<double> values,
               std::vector<double> time_axis = {});

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const Affine& affine() const { return affine_; }
  [[nodiscard]] Vec3 spacing() const { return affine_.spacing(); }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] const std::vector<double>& time_axis() const { return time_axis_; }
  [[nodiscard]] int frame_count() const {
    return time_axis_.empty() ? 1 : static_cast<int>(time_axis_.size());
  }

  [[nodiscard]] double at(int i, int j, int k, int frame = 0) const {
    return values_[linear_index(i, j, k) + static_cast<std::size_t>(frame) * voxel_count(dims_)];
  }
  [[nodiscard]] std::size_t linear_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }

  /// Samples one frame at a world point; nullopt means the point is outside the grid.
  [[nodiscard]] std::optional<double> sample(const Vec3& world,
                                             Interpolation mode = Interpolation::trilinear,
                                             int frame = 0) const;
  [[nodiscard]] std::optional<double> sample_voxel(const Vec3& voxel,
                                                   Interpolation mode = Interpolation::trilinear,
                                                   int frame = 0) const;

private:
  Dims dims_;
  Affine affine_;
  std::vector<double> values_;
  std::vector<double> time_axis_;
};

std::optional<double> sample_scalar(const ScalarVolume& volume, const Vec3& world,
                                    Interpolation mode);

/// Boolean grid sharing the geometry conventions of ScalarVolume.
class BinaryMask {
public:
  BinaryMask(Dims dims, Affine affine, std::vector<std::uint8_t> bits);
  BinaryMask(Dims dims, Affine affine);

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const Affine& affine() const { return affine_; }
  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }

  [[nodiscard]] bool at(int i, int j, int k) const { return bits_[linear_index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool value) { bits_[linear_index(i, j, k)] = value ? 1 : 0; }
  [[nodiscard]] std::size_t linear_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }
  [[nodiscard]] bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }
  [[nodiscard]] std::size_t count() const;

  /// Nearest-neighbor lookup; nullopt when outside the grid.
  [[nodiscard]] std::optional<bool> sample(const Vec3& world) const;

  /// Copy with a one-voxel background border, affine adjusted so world positions are kept.
  [[nodiscard]] BinaryMask padded(int border = 1) const;

private:
  Dims dims_;
  Affine affine_;
  std::vector<std::uint8_t> bits_;
};

/// Time-resolved three-component velocity grid in m/s (equivalently mm/ms),
/// periodic over the cardiac cycle.
class VelocityField {
public:
  VelocityField(Dims dims, Affine affine, std::vector<double> timepoints, double cycle_length,
                std::array<std::vector<double>, 3> components, double venc);

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] const Affine& affine() const { return affine_; }
  [[nodiscard]] const std::vector<double>& timepoints() const { return timepoints_; }
  [[nodiscard]] double cycle_length() const { return cycle_length_; }
  [[nodiscard]] double venc() const { return venc_; }
  [[nodiscard]] const std::array<std::vector<double>, 3>& components() const {
    return components_;
  }
  [[nodiscard]] int frame_count() const { return static_cast<int>(timepoints_.size()); }

  [[nodiscard]] Vec3 at(std::size_t voxel_index, int frame) const {
    const std::size_t offset = static_cast<std::size_t>(frame) * voxel_count(dims_) + voxel_index;
    return {components_[0][offset], components_[1][offset], components_[2][offset]};
  }

  /// Trilinear in space, linear in time, periodic with cycle_length.
  [[nodiscard]] std::optional<Vec3> sample(const Vec3& world, double t_ms) const;

  /// Bracketing frames and blend weight of the second frame for time t.
  struct TimeBracket {
    int first = 0;
    int second = 0;
    double weight = 0.0;
  };
  [[nodiscard]] TimeBracket bracket(double t_ms) const;

private:
  Dims dims_;
  Affine affine_;
  std::vector<double> timepoints_;
  double cycle_length_;
  std::array<std::vector<double>, 3> components_;
  double venc_;
};

std::optional<Vec3> sample_velocity(const VelocityField& field, const Vec3& world, double t_ms);

/// Regular 2D pixel grid centered on a plane origin. Pixel (i, j) sits at
/// in-plane coordinate ((i - nx/2) * spacing, (j - ny/2) * spacing), integer division.
struct PlaneGrid {
  int nx = 0;
  int ny = 0;
  double spacing = 1.0;

  [[nodiscard]] Vec2 pixel_center(int i, int j) const {
    return {(i - nx / 2) * spacing, (j - ny / 2) * spacing};
  }
  /// Continuous pixel coordinate of an in-plane point.
  [[nodiscard]] Vec2 to_pixel(const Vec2& uv) const {
    return {uv.x() / spacing + nx / 2, uv.y() / spacing + ny / 2};
  }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  [[nodiscard]] double pixel_area() const { return spacing * spacing; }

  static PlaneGrid from_extent(double extent_u, double extent_v, double spacing);
};

/// Resampled 2D image, x (u) fastest. Pixels whose sample point lies outside
/// the source grid have inside = 0 and value 0.
struct Image2D {
  PlaneGrid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> inside;

  [[nodiscard]] double at(int i, int j) const {
    return values[static_cast<std::size_t>(j) * grid.nx + i];
  }
};

/// Oblique plane resampling; axes must be orthonormal to 1e-6.
Image2D resample_plane(const ScalarVolume& volume, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, double extent_u, double extent_v, double spacing,
                       Interpolation mode = Interpolation::trilinear, int frame = 0);

Image2D resample_plane(const ScalarVolume& volume, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, const PlaneGrid& grid,
                       Interpolation mode = Interpolation::trilinear, int frame = 0);

/// Same grid sampled from a mask with nearest-neighbor lookup (values 0/1).
Image2D resample_plane(const BinaryMask& mask, const Vec3& center, const Vec3& axis_u,
                       const Vec3& axis_v, const PlaneGrid& grid);

}  // namespace carotid
