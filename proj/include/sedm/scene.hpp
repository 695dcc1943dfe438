#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sedm/camgeom.hpp"

namespace sedm {

enum class TextureKind : int { Checker = 0, Polygon = 1, Gradient = 2 };

/// Procedural albedo pattern evaluated in the triangle's UV space.
struct TextureParams {
    TextureKind kind = TextureKind::Checker;
    double scale = 4.0;   // checker cells / polygon size / gradient rate per uv unit
    double angle = 0.0;   // pattern rotation (radians)
    double a0 = 0.2;      // albedo levels in [0,1]
    double a1 = 0.9;
    int sides = 4;        // polygon only
    double u0 = 0.5, v0 = 0.5;  // pattern center (polygon)
};

struct SceneTriangle {
    Vec3 v0, v1, v2;
    Vec2 uv0, uv1, uv2;
    int texture = 0;

    double area() const;
    Vec3 normal() const;  // unit geometric normal
};

struct DirectionalLight {
    Vec3 direction;    // unit vector pointing toward the light
    double intensity;  // in [0,2]
};

struct Scene {
    std::vector<SceneTriangle> triangles;
    std::vector<TextureParams> textures;
    std::vector<DirectionalLight> lights;
    double ambient = 0.25;
    int lighting_configs = 4;

    void bounds(Vec3& lo, Vec3& hi) const;
    void validate() const;  // >= 1 triangle, all non-degenerate
};

enum class SceneComplexity { Small, Medium };

double eval_texture(const TextureParams& t, double u, double v);

/// Deterministic procedural scene: a textured ground plane plus boxes and
/// tilted panels carrying checkerboard / polygon / gradient albedos. The
/// geometry fits inside ~0.7 m so camera orbits stay within the unit sphere.
Scene generate_scene(std::uint64_t seed, SceneComplexity complexity);

/// Per-view lighting variation: configuration j rotates the light rig about
/// +z and rescales intensities, deterministically in j. Depth is unaffected.
std::vector<DirectionalLight> lighting_config(const Scene& scene, int index,
                                              double& ambient_out);

// Exact text round-trip (%.17g); used for dataset metadata and the
// generator determinism check.
std::string serialize_scene(const Scene& scene);
Scene parse_scene(const std::string& text);

struct Trajectory {
    std::vector<std::pair<Intrinsics, Pose>> views;
    std::vector<int> lighting;  // lighting configuration per view
};

struct TrajectoryParams {
    int width = 128, height = 128;
    double fov_deg = 48.0;
    double radius_lo = 0.68, radius_hi = 0.84;
    double elev_lo_deg = 25.0, elev_hi_deg = 55.0;
    int min_views = 3;
    double min_coverage = 0.8;   // fraction of hit voxels seen >= min_views times
    double grid_extent = 0.005;  // coverage-check voxel size, meters
    int max_attempts = 10;
};

/// Orbit poses around the scene with jittered radius/elevation and per-view
/// lighting. Renders depth internally and retries (salting the seed) until
/// the multi-view coverage requirement holds; throws std::runtime_error
/// after max_attempts. Requires n_views >= 2.
Trajectory generate_trajectory(const Scene& scene, int n_views, std::uint64_t seed,
                               const TrajectoryParams& params = {});

}  // namespace sedm
