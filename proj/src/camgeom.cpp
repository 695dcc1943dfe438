#include "sedm/camgeom.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sedm {

Vec3 Vec3::normalized() const {
    const double n = norm();
    if (n < 1e-300) throw std::invalid_argument("Vec3::normalized: zero vector");
    return {x / n, y / n, z / n};
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
            r.at(i, j) = s;
        }
    return r;
}

Mat3 Mat3::transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
    return r;
}

double Mat3::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Mat3 r;
    r.m[0] = t * a.x * a.x + c;
    r.m[1] = t * a.x * a.y - s * a.z;
    r.m[2] = t * a.x * a.z + s * a.y;
    r.m[3] = t * a.x * a.y + s * a.z;
    r.m[4] = t * a.y * a.y + c;
    r.m[5] = t * a.y * a.z - s * a.x;
    r.m[6] = t * a.x * a.z - s * a.y;
    r.m[7] = t * a.y * a.z + s * a.x;
    r.m[8] = t * a.z * a.z + c;
    return r;
}

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("Intrinsics: image extent must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
        throw std::invalid_argument("Intrinsics: principal point outside image");
}

void Pose::validate(double tol) const {
    const Mat3 rtr = rotation.transposed() * rotation;
    const Mat3 eye = Mat3::identity();
    for (int i = 0; i < 9; ++i)
        if (std::abs(rtr.m[i] - eye.m[i]) > tol)
            throw std::invalid_argument("Pose: rotation is not orthonormal");
    if (std::abs(rotation.det() - 1.0) > tol)
        throw std::invalid_argument("Pose: rotation determinant is not +1");
}

void CameraView::validate() const {
    intrinsics.validate();
    if (image.width != intrinsics.width || image.height != intrinsics.height ||
        depth.width != intrinsics.width || depth.height != intrinsics.height)
        throw std::invalid_argument("CameraView: image/depth extent mismatch");
}

void GridSpec::validate() const {
    if (!(extent > 0.0)) throw std::invalid_argument("GridSpec: extent must be > 0");
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("GridSpec: dims must be >= 1");
}

std::optional<PixelDepth> project(const Vec3& p_world, const Intrinsics& K,
                                  const Pose& pose) {
    const Vec3 pc = pose.to_camera(p_world);
    if (!(pc.z > 0.0)) return std::nullopt;
    const double u = K.fx * pc.x / pc.z + K.cx;
    const double v = K.fy * pc.y / pc.z + K.cy;
    if (!(u >= 0.0 && u < K.width && v >= 0.0 && v < K.height)) return std::nullopt;
    return PixelDepth{{u, v}, pc.z};
}

Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& K,
                 const Pose& pose) {
    if (!(depth > 0.0))
        throw std::invalid_argument("backproject: depth must be positive");
    const Vec3 pc{(pixel.x - K.cx) / K.fx * depth, (pixel.y - K.cy) / K.fy * depth,
                  depth};
    return pose.to_world(pc);
}

std::optional<VoxelIndex> voxel_index(const Vec3& p_world, const GridSpec& grid) {
    const double ix = std::floor((p_world.x - grid.origin.x) / grid.extent);
    const double iy = std::floor((p_world.y - grid.origin.y) / grid.extent);
    const double iz = std::floor((p_world.z - grid.origin.z) / grid.extent);
    if (ix < 0 || iy < 0 || iz < 0 || ix >= grid.nx || iy >= grid.ny || iz >= grid.nz)
        return std::nullopt;
    return VoxelIndex{static_cast<int>(ix), static_cast<int>(iy),
                      static_cast<int>(iz)};
}

Homography Homography::inverse() const {
    // adjugate / det
    const double* a = h;
    double c[9];
    c[0] = a[4] * a[8] - a[5] * a[7];
    c[1] = a[2] * a[7] - a[1] * a[8];
    c[2] = a[1] * a[5] - a[2] * a[4];
    c[3] = a[5] * a[6] - a[3] * a[8];
    c[4] = a[0] * a[8] - a[2] * a[6];
    c[5] = a[2] * a[3] - a[0] * a[5];
    c[6] = a[3] * a[7] - a[4] * a[6];
    c[7] = a[1] * a[6] - a[0] * a[7];
    c[8] = a[0] * a[4] - a[1] * a[3];
    const double det = a[0] * c[0] + a[1] * c[3] + a[2] * c[6];
    if (std::abs(det) < 1e-300)
        throw std::invalid_argument("Homography::inverse: singular matrix");
    Homography r;
    for (int i = 0; i < 9; ++i) r.h[i] = c[i] / det;
    return r;
}

Homography Homography::operator*(const Homography& o) const {
    Homography r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += h[i * 3 + k] * o.h[k * 3 + j];
            r.h[i * 3 + j] = s;
        }
    return r;
}

Vec2 warp_homography(const Vec2& pixel, const Homography& H) {
    const double* h = H.h;
    const double x = h[0] * pixel.x + h[1] * pixel.y + h[2];
    const double y = h[3] * pixel.x + h[4] * pixel.y + h[5];
    const double w = h[6] * pixel.x + h[7] * pixel.y + h[8];
    if (std::abs(w) < 1e-12)
        throw std::runtime_error("warp_homography: degenerate warp (w ~ 0)");
    return {x / w, y / w};
}

std::string pose_line(int view_id, const Intrinsics& K, const Pose& pose) {
    char buf[512];
    const Mat3& r = pose.rotation;
    const Vec3& t = pose.translation;
    std::snprintf(buf, sizeof(buf),
                  "%d %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g "
                  "%.9g %.9g %.9g %.9g",
                  view_id, K.fx, K.fy, K.cx, K.cy, r.m[0], r.m[1], r.m[2], r.m[3],
                  r.m[4], r.m[5], r.m[6], r.m[7], r.m[8], t.x, t.y, t.z);
    return buf;
}

void parse_pose_line(const std::string& line, int& view_id, Intrinsics& K,
                     Pose& pose) {
    std::istringstream is(line);
    double vals[16];
    if (!(is >> view_id)) throw std::runtime_error("pose line: missing view id");
    for (int i = 0; i < 16; ++i)
        if (!(is >> vals[i]))
            throw std::runtime_error("pose line: expected 16 numeric fields");
    K.fx = vals[0];
    K.fy = vals[1];
    K.cx = vals[2];
    K.cy = vals[3];
    for (int i = 0; i < 9; ++i) pose.rotation.m[i] = vals[4 + i];
    pose.translation = {vals[13], vals[14], vals[15]};
}

}  // namespace sedm
