#pragma once

#include "sedm/camgeom.hpp"
#include "sedm/scene.hpp"

namespace sedm {

/// Z-buffered Lambertian rasterization of the scene into one view.
/// Pixel value = clamp(ambient + sum_l intensity*max(0, n.l), 0, 1) * albedo;
/// depth holds the camera-frame z of the nearest surface (non-positive where
/// no triangle covers the pixel). Deterministic for fixed inputs.
CameraView render(const Scene& scene, const Intrinsics& K, const Pose& pose,
                  int lighting_index);

/// Depth-only variant for visibility/coverage checks.
Plane<float> render_depth(const Scene& scene, const Intrinsics& K, const Pose& pose);

}  // namespace sedm
