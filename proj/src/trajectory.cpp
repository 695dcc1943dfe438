#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sedm/log.hpp"
#include "sedm/raster.hpp"
#include "sedm/rng.hpp"
#include "sedm/scene.hpp"

namespace sedm {

namespace {

Pose look_at(const Vec3& eye, const Vec3& target) {
    const Vec3 fwd = (target - eye).normalized();
    const Vec3 up{0, 0, 1};
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right);
    Pose p;
    p.rotation.m[0] = right.x;
    p.rotation.m[1] = right.y;
    p.rotation.m[2] = right.z;
    p.rotation.m[3] = down.x;
    p.rotation.m[4] = down.y;
    p.rotation.m[5] = down.z;
    p.rotation.m[6] = fwd.x;
    p.rotation.m[7] = fwd.y;
    p.rotation.m[8] = fwd.z;
    p.translation = (p.rotation * eye) * -1.0;
    return p;
}

// Fraction of depth-hit voxels observed from >= min_views viewpoints.
double coverage_fraction(const Scene& scene,
                         const std::vector<std::pair<Intrinsics, Pose>>& views,
                         double extent, int min_views) {
    Vec3 lo, hi;
    scene.bounds(lo, hi);
    GridSpec grid;
    const double margin = 2.0 * extent;
    grid.origin = {lo.x - margin, lo.y - margin, lo.z - margin};
    grid.extent = extent;
    grid.nx = static_cast<int>(std::ceil((hi.x - lo.x + 2 * margin) / extent)) + 1;
    grid.ny = static_cast<int>(std::ceil((hi.y - lo.y + 2 * margin) / extent)) + 1;
    grid.nz = static_cast<int>(std::ceil((hi.z - lo.z + 2 * margin) / extent)) + 1;

    std::vector<std::uint16_t> hits(grid.cell_count(), 0);
    for (const auto& [K, pose] : views) {
        const Plane<float> depth = render_depth(scene, K, pose);
        for (int y = 0; y < depth.height; ++y)
            for (int x = 0; x < depth.width; ++x) {
                const float d = depth.at(x, y);
                if (d <= 0.0f) continue;
                const Vec3 p = backproject({double(x), double(y)}, d, K, pose);
                if (auto idx = voxel_index(p, grid)) {
                    const std::size_t lin =
                        (static_cast<std::size_t>(idx->z) * grid.ny + idx->y) * grid.nx +
                        idx->x;
                    if (hits[lin] < 65535) ++hits[lin];
                }
            }
    }
    std::size_t occupied = 0, well_observed = 0;
    for (const auto h : hits) {
        if (h == 0) continue;
        ++occupied;
        if (h >= min_views) ++well_observed;
    }
    if (occupied == 0) return 0.0;
    return static_cast<double>(well_observed) / static_cast<double>(occupied);
}

}  // namespace

Trajectory generate_trajectory(const Scene& scene, int n_views, std::uint64_t seed,
                               const TrajectoryParams& params) {
    if (n_views < 2)
        throw std::invalid_argument("generate_trajectory: n_views must be >= 2");

    Vec3 lo, hi;
    scene.bounds(lo, hi);
    const Vec3 center{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y),
                      0.5 * (lo.z + hi.z)};

    Intrinsics K;
    K.width = params.width;
    K.height = params.height;
    K.fx = K.fy = 0.5 * params.width / std::tan(0.5 * params.fov_deg * M_PI / 180.0);
    K.cx = 0.5 * (params.width - 1);
    K.cy = 0.5 * (params.height - 1);
    K.validate();

    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        Rng rng = Rng::derive(seed, "trajectory", attempt);
        Trajectory traj;
        for (int i = 0; i < n_views; ++i) {
            const double az = 2.0 * M_PI * (i + rng.uniform(-0.25, 0.25)) / n_views;
            const double el = rng.uniform(params.elev_lo_deg, params.elev_hi_deg) *
                              M_PI / 180.0;
            const double r = rng.uniform(params.radius_lo, params.radius_hi);
            const Vec3 eye = center + Vec3{std::cos(az) * std::cos(el),
                                           std::sin(az) * std::cos(el),
                                           std::sin(el)} *
                                          r;
            traj.views.emplace_back(K, look_at(eye, center));
            traj.lighting.push_back(
                static_cast<int>(rng.uniform_int(scene.lighting_configs)));
        }
        const double cov = coverage_fraction(scene, traj.views, params.grid_extent,
                                             params.min_views);
        if (cov >= params.min_coverage) return traj;
        log_warn({{"event", "trajectory_retry"},
                  {"attempt", std::to_string(attempt)},
                  {"coverage", std::to_string(cov)}});
    }
    throw std::runtime_error(
        "generate_trajectory: coverage requirement unreachable after " +
        std::to_string(params.max_attempts) + " attempts");
}

}  // namespace sedm
