#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "sedm/plane.hpp"

namespace sedm {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const;
};

/// 3x3 matrix, row-major.
struct Mat3 {
    double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }
    double at(int r, int c) const { return m[r * 3 + c]; }
    double& at(int r, int c) { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const;
    Mat3 transposed() const;
    double det() const;
};

/// Rotation about a unit axis by angle (radians).
Mat3 axis_angle(const Vec3& axis, double angle);

struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const;  // throws std::invalid_argument
};

/// Rigid world-to-camera transform: p_cam = rotation * p_world + translation.
struct Pose {
    Mat3 rotation;
    Vec3 translation;

    void validate(double tol = 1e-9) const;  // orthonormal, det +1
    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 to_world(const Vec3& pc) const {
        return rotation.transposed() * (pc - translation);
    }
    Vec3 center() const { return to_world({0, 0, 0}); }
};

/// One rendered viewpoint: image and dense depth share the intrinsics extent.
/// Depth holds the camera-frame z of the nearest surface; non-positive values
/// mean no geometry was hit.
struct CameraView {
    Intrinsics intrinsics;
    Pose pose;
    Plane<float> image;  // grayscale in [0,1]
    Plane<float> depth;  // meters

    void validate() const;
};

/// Uniform voxel grid placement. Cells are half-open:
/// cell i covers [origin + i*extent, origin + (i+1)*extent).
struct GridSpec {
    Vec3 origin;
    double extent = 0.005;
    int nx = 1, ny = 1, nz = 1;

    std::size_t cell_count() const {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    void validate() const;
};

struct PixelDepth {
    Vec2 pixel;    // (u,v); pixel centers sit at integer coordinates
    double depth;  // camera-frame z, meters
};

/// Perspective projection. Returns nullopt when the point is at or behind the
/// camera (z <= 0) or projects outside [0,width) x [0,height).
std::optional<PixelDepth> project(const Vec3& p_world, const Intrinsics& K,
                                  const Pose& pose);
inline std::optional<PixelDepth> project(const Vec3& p_world, const CameraView& v) {
    return project(p_world, v.intrinsics, v.pose);
}

/// Inverse of project. Throws std::invalid_argument for depth <= 0.
Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& K,
                 const Pose& pose);
inline Vec3 backproject(const Vec2& pixel, double depth, const CameraView& v) {
    return backproject(pixel, depth, v.intrinsics, v.pose);
}

struct VoxelIndex {
    int x = 0, y = 0, z = 0;
    bool operator==(const VoxelIndex&) const = default;
};

/// Half-open cell lookup; nullopt for points outside the grid.
std::optional<VoxelIndex> voxel_index(const Vec3& p_world, const GridSpec& grid);

/// 3x3 projective transform acting on pixel coordinates, row-major.
struct Homography {
    double h[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    Homography inverse() const;  // throws std::invalid_argument if singular
    Homography operator*(const Homography& o) const;
};

/// Projective warp with homogeneous normalization. Throws
/// std::runtime_error when |w| < 1e-12 (degenerate warp).
Vec2 warp_homography(const Vec2& pixel, const Homography& H);

// Pose text format, one view per line with %.9g precision:
//   view_id fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
std::string pose_line(int view_id, const Intrinsics& K, const Pose& pose);
// Parses a pose line. Width/height are not part of the format and are left
// untouched. Throws std::runtime_error on malformed input.
void parse_pose_line(const std::string& line, int& view_id, Intrinsics& K, Pose& pose);

}  // namespace sedm
