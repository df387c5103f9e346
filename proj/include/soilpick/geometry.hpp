#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace soilpick {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kRotationTolerance = 1e-9;

/// Rigid transform x' = R x + t. Maps points expressed in a child frame into
/// the parent frame (e.g. camera -> arm base).
class Pose {
 public:
  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws std::invalid_argument unless `rotation` is orthonormal with
  /// determinant +1 (within kRotationTolerance).
  Pose(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation)) throw std::invalid_argument("Pose: rotation is not in SO(3)");
    if (!translation.allFinite()) throw std::invalid_argument("Pose: non-finite translation");
  }

  static Pose identity() { return Pose{}; }
  static Pose translation(const Vec3& t) { return unchecked(Mat3::Identity(), t); }
  static Pose rot_x(double angle) {
    return unchecked(Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(), Vec3::Zero());
  }
  static Pose rot_y(double angle) {
    return unchecked(Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(), Vec3::Zero());
  }
  static Pose rot_z(double angle) {
    return unchecked(Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(), Vec3::Zero());
  }
  /// Intrinsic Z-Y-X (yaw, pitch, roll) composition: Rz(yaw) Ry(pitch) Rx(roll).
  static Pose from_rpy(double roll, double pitch, double yaw, const Vec3& t = Vec3::Zero()) {
    const Mat3 r = (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                    Eigen::AngleAxisd(roll, Vec3::UnitX()))
                       .toRotationMatrix();
    return unchecked(r, t);
  }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  static bool is_rotation(const Mat3& r) {
    if (!r.allFinite()) return false;
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= kRotationTolerance && std::abs(r.determinant() - 1.0) <= kRotationTolerance;
  }

  bool is_approx(const Pose& other, double tol) const {
    return (rotation_ - other.rotation_).cwiseAbs().maxCoeff() <= tol &&
           (translation_ - other.translation_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  friend Pose compose(const Pose&, const Pose&);
  friend Pose invert(const Pose&);

  static Pose unchecked(const Mat3& r, const Vec3& t) {
    Pose p;
    p.rotation_ = r;
    p.translation_ = t;
    return p;
  }

  Mat3 rotation_;
  Vec3 translation_;
};

/// a ∘ b: apply b first, then a.
inline Pose compose(const Pose& a, const Pose& b) {
  return Pose::unchecked(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
}

inline Pose invert(const Pose& p) {
  const Mat3 rt = p.rotation_.transpose();
  return Pose::unchecked(rt, -(rt * p.translation_));
}

inline Vec3 transform_point(const Pose& p, const Vec3& x) {
  return p.rotation() * x + p.translation();
}

inline Vec3 transform_direction(const Pose& p, const Vec3& d) { return p.rotation() * d; }

/// Pinhole intrinsics. Camera frame is right-handed with +Z along the optical
/// axis, +X toward increasing u and +Y toward increasing v.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("CameraIntrinsics: empty image");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw std::invalid_argument("CameraIntrinsics: principal point outside image");
  }
};

/// Pixel coordinate plus depth along the optical axis.
struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double d = 0.0;
};

/// Square-pixel intrinsics from a horizontal field of view, principal point at
/// the image center.
inline CameraIntrinsics intrinsics_from_fov(double hfov, int width, int height) {
  if (!(hfov > 0.0 && hfov < std::numbers::pi))
    throw std::invalid_argument("intrinsics_from_fov: hfov must lie in (0, pi)");
  if (width < 1 || height < 1) throw std::invalid_argument("intrinsics_from_fov: empty image");
  const double f = (width / 2.0) / std::tan(hfov / 2.0);
  return CameraIntrinsics{f, f, width / 2.0, height / 2.0, width, height};
}

inline Vec3 back_project(const CameraIntrinsics& k, const PixelDepth& p) {
  if (!(p.d > 0.0)) throw std::domain_error("back_project: depth must be positive");
  return Vec3{(p.u - k.cx) * p.d / k.fx, (p.v - k.cy) * p.d / k.fy, p.d};
}

inline PixelDepth project(const CameraIntrinsics& k, const Vec3& point) {
  if (!(point.z() > 0.0)) throw std::domain_error("project: point is behind the camera");
  return PixelDepth{k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy,
                    point.z()};
}

/// Unit ray direction (camera frame) through pixel (u, v).
inline Vec3 pixel_ray(const CameraIntrinsics& k, double u, double v) {
  return Vec3{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0}.normalized();
}

/// Rotation whose +Z points straight down (-Z of the parent), with +X kept
/// along the parent +X. Used for tools and cameras looking at the ground.
inline Mat3 looking_down() {
  Mat3 r;
  r << 1, 0, 0,
       0, -1, 0,
       0, 0, -1;
  return r;
}

}  // namespace soilpick
