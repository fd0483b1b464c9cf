#include "uvfuse/cameras.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "uvfuse/error.hpp"

namespace uvfuse {

Vec3 CameraPose::to_camera(const Vec3& p) const {
  const Vec3 d = p - position;
  return {right().dot(d), up.dot(d), forward.dot(d)};
}

double CameraPose::focal_px() const { return 0.5 * image_size / std::tan(0.5 * fov_y); }

Vec2 CameraPose::project_camera(const Vec3& pc) const {
  const double f = focal_px();
  const double inv = 1.0 / -pc.z();
  return {0.5 * image_size + f * pc.x() * inv, 0.5 * image_size - f * pc.y() * inv};
}

Vec3 CameraPose::ray_direction(double px, double py) const {
  const double f = focal_px();
  const Vec3 dir_cam((px - 0.5 * image_size) / f, (0.5 * image_size - py) / f, -1.0);
  return (right() * dir_cam.x() + up * dir_cam.y() + forward * dir_cam.z()).normalized();
}

CameraPose look_at_origin(const Vec3& position, double fov_y, int image_size) {
  CameraPose pose;
  pose.position = position;
  pose.forward = position.normalized();
  const Vec3 world_up = std::abs(pose.forward.dot(Vec3::UnitY())) > 0.999 ? Vec3::UnitX() : Vec3::UnitY();
  pose.up = (world_up - world_up.dot(pose.forward) * pose.forward).normalized();
  pose.fov_y = fov_y;
  pose.image_size = image_size;
  return pose;
}

ViewRig uniform_rig(int n_azimuth, std::span<const double> elevations_rad, double radius,
                    double fov_y, int image_size) {
  if (!(radius > 1.0)) {
    throw Error(ErrorCode::InvalidRadius, "camera radius must exceed the unit bounding sphere");
  }
  if (n_azimuth < 1 || elevations_rad.empty()) {
    throw Error(ErrorCode::InvalidRange, "rig needs at least one azimuth and one elevation");
  }
  ViewRig rig;
  rig.radius = radius;
  for (double el : elevations_rad) {
    for (int a = 0; a < n_azimuth; ++a) {
      const double az = 2.0 * std::numbers::pi * a / n_azimuth;
      const Vec3 dir(std::cos(el) * std::cos(az), std::sin(el), std::cos(el) * std::sin(az));
      rig.poses.push_back(look_at_origin(radius * dir, fov_y, image_size));
    }
  }
  return rig;
}

ViewRig default_rig(int n_views, double radius, double fov_y, int image_size) {
  if (n_views < 1) throw Error(ErrorCode::InvalidRange, "need at least one view");
  std::vector<double> elevations;
  if (n_views % 4 == 0) {
    for (double deg : RigDefaults::elevations_deg()) elevations.push_back(deg * std::numbers::pi / 180.0);
  } else {
    elevations.push_back(0.0);
  }
  const int n_az = n_views / static_cast<int>(elevations.size());
  return uniform_rig(n_az, elevations, radius, fov_y, image_size);
}

namespace {

double cost_to_nearest(const Vec3& n, std::span<const Vec3> centers) {
  double best = -2.0;
  for (const auto& c : centers) best = std::max(best, n.dot(c));
  return 1.0 - best;
}

int nearest_center(const Vec3& n, std::span<const Vec3> centers) {
  int best = 0;
  double best_dot = -2.0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = n.dot(centers[c]);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double objective(std::span<const Vec3> normals, std::span<const double> weights,
                 std::span<const Vec3> centers) {
  double j = 0.0;
  for (std::size_t i = 0; i < normals.size(); ++i) j += weights[i] * cost_to_nearest(normals[i], centers);
  return j;
}

int count_distinct(std::span<const Vec3> normals) {
  std::vector<Vec3> seen;
  for (const auto& n : normals) {
    const bool dup = std::any_of(seen.begin(), seen.end(),
                                 [&](const Vec3& s) { return (s - n).squaredNorm() < 1e-24; });
    if (!dup) seen.push_back(n);
  }
  return static_cast<int>(seen.size());
}

// Index drawn with probability proportional to `mass`; falls back to the
// first index with `fallback_ok` when all mass is zero.
template <class Ok>
std::size_t draw(std::span<const double> mass, std::mt19937_64& rng, Ok&& fallback_ok) {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total > 0.0) {
    const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      acc += mass[i];
      if (mass[i] > 0.0 && r < acc) return i;
    }
    for (std::size_t i = mass.size(); i-- > 0;) {
      if (mass[i] > 0.0) return i;
    }
  }
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (fallback_ok(i)) return i;
  }
  return 0;
}

}  // namespace

KMeansResult weighted_kmeans(std::span<const Vec3> normals, std::span<const double> weights, int k,
                             std::uint64_t seed) {
  if (normals.empty()) throw Error(ErrorCode::EmptyInput, "no normals to cluster");
  if (normals.size() != weights.size()) {
    throw Error(ErrorCode::ShapeMismatch, "normals and weights differ in length");
  }
  if (k < 1) throw Error(ErrorCode::InvalidRange, "k must be at least 1");
  const std::size_t n = normals.size();
  const int k_eff = std::min(k, count_distinct(normals));

  std::mt19937_64 rng(seed);
  KMeansResult out;
  auto& centers = out.centroids;
  auto is_center = [&](std::size_t i) {
    return std::any_of(centers.begin(), centers.end(),
                       [&](const Vec3& c) { return (c - normals[i]).squaredNorm() < 1e-24; });
  };

  // k-means++ seeding on the weighted cosine distance.
  std::vector<double> mass(weights.begin(), weights.end());
  centers.push_back(normals[draw(mass, rng, [](std::size_t) { return true; })]);
  while (static_cast<int>(centers.size()) < k_eff) {
    for (std::size_t i = 0; i < n; ++i) {
      mass[i] = is_center(i) ? 0.0 : weights[i] * cost_to_nearest(normals[i], centers);
    }
    centers.push_back(normals[draw(mass, rng, [&](std::size_t i) { return !is_center(i); })]);
  }
  out.objective_history.push_back(objective(normals, weights, centers));

  out.assignment.assign(n, -1);
  constexpr int kMaxIterations = 100;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    std::vector<int> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_center(normals[i], centers);
    if (assign == out.assignment) break;
    out.assignment = std::move(assign);
    out.iterations = iter + 1;

    std::vector<Vec3> sums(k_eff, Vec3::Zero());
    std::vector<int> members(k_eff, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[out.assignment[i]] += weights[i] * normals[i];
      ++members[out.assignment[i]];
    }
    for (int c = 0; c < k_eff; ++c) {
      if (members[c] > 0 && sums[c].norm() > 1e-12) {
        centers[c] = sums[c].normalized();
        continue;
      }
      // Empty (or cancelling) cluster: reseed at the point farthest from its
      // centroid, weighted.
      double worst = -1.0;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (is_center(i)) continue;
        const double d = weights[i] * (1.0 - normals[i].dot(centers[out.assignment[i]]));
        if (d > worst) {
          worst = d;
          pick = i;
        }
      }
      if (worst >= 0.0) {
        centers[c] = normals[pick];
        out.assignment[pick] = c;
      }
    }
    out.objective_history.push_back(objective(normals, weights, centers));
  }

  for (std::size_t i = 0; i < n; ++i) out.assignment[i] = nearest_center(normals[i], centers);
  out.cluster_weights.assign(k_eff, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.cluster_weights[out.assignment[i]] += weights[i];
  return out;
}

std::vector<Vec3> weighted_kmeans_directions(std::span<const Vec3> normals,
                                             std::span<const double> weights, int k,
                                             std::uint64_t seed) {
  return weighted_kmeans(normals, weights, k, seed).centroids;
}

ViewRig select_views(const TexturedMesh& mesh, int k, double radius, double fov_y, int image_size,
                     std::uint64_t seed) {
  if (!(radius > 1.0)) {
    throw Error(ErrorCode::InvalidRadius, "camera radius must exceed the unit bounding sphere");
  }
  std::vector<Vec3> normals;
  std::vector<double> areas;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    if (mesh.degenerate[f]) continue;
    normals.push_back(mesh.face_normals[f]);
    areas.push_back(mesh.face_areas[f]);
  }
  const int k_eff = std::min<int>(k, static_cast<int>(normals.size()));
  const auto km = weighted_kmeans(normals, areas, std::max(k_eff, 1), seed);

  struct Cluster {
    Vec3 dir;
    double weight;
  };
  std::vector<Cluster> clusters;
  for (std::size_t c = 0; c < km.centroids.size(); ++c) clusters.push_back({km.centroids[c], km.cluster_weights[c]});
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.weight > b.weight; });

  const double merge_cos = std::cos(std::numbers::pi / 180.0);
  std::vector<Cluster> merged;
  for (const auto& c : clusters) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const Cluster& m) { return m.dir.dot(c.dir) > merge_cos; });
    if (it != merged.end()) {
      it->weight += c.weight;
    } else {
      merged.push_back(c);
    }
  }
  std::sort(merged.begin(), merged.end(), [](const Cluster& a, const Cluster& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return std::lexicographical_compare(a.dir.data(), a.dir.data() + 3, b.dir.data(), b.dir.data() + 3);
  });

  ViewRig rig;
  rig.radius = radius;
  for (const auto& c : merged) rig.poses.push_back(look_at_origin(radius * c.dir, fov_y, image_size));
  return rig;
}

double coverage_score(const TexturedMesh& mesh, const ViewRig& rig) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    if (mesh.degenerate[f]) continue;
    double best = -1.0;
    for (const auto& pose : rig.poses) best = std::max(best, mesh.face_normals[f].dot(pose.forward));
    sum += best;
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace uvfuse
