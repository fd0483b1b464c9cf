#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uvfuse/geometry.hpp"

namespace uvfuse {

/// Pinhole camera looking at the origin. `forward` points from the origin
/// toward the camera (the view direction vector used in normal scoring); the
/// camera itself looks along -forward.
struct CameraPose {
  Vec3 position = Vec3::UnitX();
  Vec3 forward = Vec3::UnitX();
  Vec3 up = Vec3::UnitY();
  double fov_y = 0.785398163397448;  // 45 degrees
  int image_size = 512;

  Vec3 right() const { return up.cross(forward); }
  /// World point to camera space (x right, y up, camera looks down -z).
  Vec3 to_camera(const Vec3& p) const;
  /// Focal length in pixels.
  double focal_px() const;
  /// Continuous pixel coordinates (pixel centers at +0.5) of a camera-space
  /// point; requires z < 0.
  Vec2 project_camera(const Vec3& pc) const;
  /// Unit world-space ray direction through continuous pixel coordinates.
  Vec3 ray_direction(double px, double py) const;
};

/// Builds a valid pose at `position` aimed at the origin. The up vector is
/// world +y unless the view is within ~2.6 degrees of vertical, then +x.
CameraPose look_at_origin(const Vec3& position, double fov_y, int image_size);

struct ViewRig {
  std::vector<CameraPose> poses;
  double radius = 2.5;

  std::size_t size() const { return poses.size(); }
};

struct RigDefaults {
  static constexpr int kAzimuths = 9;
  static constexpr double kRadius = 2.5;
  static constexpr double kFovY = 0.785398163397448;  // 45 degrees
  static constexpr int kImageSize = 512;
  static constexpr int kSelectClusters = 16;
  static std::vector<double> elevations_deg() { return {-30.0, 0.0, 30.0, 60.0}; }
};

/// n_azimuth x |elevations| poses; elevation-major order, azimuths evenly
/// spaced from 0 (azimuth 0, elevation 0 sits on +x). Throws InvalidRadius.
ViewRig uniform_rig(int n_azimuth, std::span<const double> elevations_rad, double radius,
                    double fov_y, int image_size);

/// Default fixed rig for `n_views`: 4 elevations when divisible by 4, else a
/// single ring at elevation 0.
ViewRig default_rig(int n_views, double radius, double fov_y, int image_size);

struct KMeansResult {
  std::vector<Vec3> centroids;
  std::vector<int> assignment;
  std::vector<double> cluster_weights;
  std::vector<double> objective_history;  // after seeding, then after each Lloyd update
  int iterations = 0;
};

/// Spherical weighted K-means (distance 1 - n.c) with k-means++ seeding driven
/// by `seed`. Effective k is min(k, number of distinct normals).
KMeansResult weighted_kmeans(std::span<const Vec3> normals, std::span<const double> weights, int k,
                             std::uint64_t seed);

std::vector<Vec3> weighted_kmeans_directions(std::span<const Vec3> normals,
                                             std::span<const double> weights, int k,
                                             std::uint64_t seed);

/// Cameras facing the area-weighted normal clusters of the mesh, duplicate
/// directions (< 1 degree apart) merged, ordered by descending cluster weight.
ViewRig select_views(const TexturedMesh& mesh, int k, double radius, double fov_y, int image_size,
                     std::uint64_t seed);

/// mean over non-degenerate faces of max over views of cos(angle(n_f, forward)).
double coverage_score(const TexturedMesh& mesh, const ViewRig& rig);

}  // namespace uvfuse
