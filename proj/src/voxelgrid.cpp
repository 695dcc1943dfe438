#include "sedm/voxelgrid.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sedm {

void accumulate_view(VoxelGrid& grid, const CameraView& view,
                     const Plane<float>& heatmap) {
    if (!heatmap.same_size(view.depth))
        throw std::invalid_argument("accumulate: heatmap/view dimension mismatch");
    for (int y = 0; y < heatmap.height; ++y) {
        for (int x = 0; x < heatmap.width; ++x) {
            const float score = heatmap.at(x, y);
            if (!(score >= 0.0f && score <= 1.0f))
                throw std::invalid_argument("accumulate: heatmap value outside [0,1]");
            const float d = view.depth.at(x, y);
            if (d <= 0.0f) continue;
            const Vec3 p = backproject({double(x), double(y)}, d, view);
            const auto idx = voxel_index(p, grid.spec);
            if (!idx) continue;
            const std::size_t lin = grid.linear(*idx);
            grid.N[lin] += 1;
            grid.D[lin] += static_cast<double>(score);
        }
    }
}

VoxelGrid accumulate(std::span<const CameraView> views,
                     std::span<const Plane<float>> heatmaps, const GridSpec& spec) {
    if (views.size() != heatmaps.size())
        throw std::invalid_argument("accumulate: view/heatmap count mismatch");
    VoxelGrid grid(spec);
    for (std::size_t i = 0; i < views.size(); ++i)
        accumulate_view(grid, views[i], heatmaps[i]);
    return grid;
}

std::optional<double> repeatability(const VoxelGrid& grid, const VoxelIndex& idx,
                                    int min_views) {
    if (min_views < 1)
        throw std::invalid_argument("repeatability: min_views must be >= 1");
    const std::size_t lin = grid.linear(idx);
    if (grid.N[lin] < min_views) return std::nullopt;
    return grid.D[lin] / static_cast<double>(grid.N[lin]);
}

RepeatabilityMap render_repeatability(const VoxelGrid& grid, const CameraView& view,
                                      int min_views) {
    if (min_views < 1)
        throw std::invalid_argument("render_repeatability: min_views must be >= 1");
    RepeatabilityMap map;
    map.values = Plane<double>(view.depth.width, view.depth.height, 0.0);
    map.mask = Plane<std::uint8_t>(view.depth.width, view.depth.height, 0);
    for (int y = 0; y < view.depth.height; ++y) {
        for (int x = 0; x < view.depth.width; ++x) {
            const float d = view.depth.at(x, y);
            if (d <= 0.0f) continue;
            const Vec3 p = backproject({double(x), double(y)}, d, view);
            const auto idx = voxel_index(p, grid.spec);
            if (!idx) continue;
            const std::size_t lin = grid.linear(*idx);
            if (grid.N[lin] < min_views) continue;
            map.values.at(x, y) = grid.D[lin] / static_cast<double>(grid.N[lin]);
            map.mask.at(x, y) = 1;
        }
    }
    return map;
}

std::vector<double> visibility_stats(const VoxelGrid& grid, int k_max) {
    std::vector<double> fractions(std::max(0, k_max), 0.0);
    std::size_t occupied = 0;
    std::vector<std::size_t> at_least(fractions.size(), 0);
    for (const auto n : grid.N) {
        if (n <= 0) continue;
        ++occupied;
        for (int k = 1; k <= static_cast<int>(fractions.size()); ++k)
            if (n >= k) ++at_least[k - 1];
    }
    if (occupied == 0) return fractions;
    for (std::size_t i = 0; i < fractions.size(); ++i)
        fractions[i] = static_cast<double>(at_least[i]) / static_cast<double>(occupied);
    return fractions;
}

std::string dump_grid(const VoxelGrid& grid) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %d %d %.17g %.17g %.17g %.17g\n",
                  grid.spec.nx, grid.spec.ny, grid.spec.nz, grid.spec.extent,
                  grid.spec.origin.x, grid.spec.origin.y, grid.spec.origin.z);
    os << buf;
    for (int i = 0; i < grid.spec.nx; ++i)
        for (int j = 0; j < grid.spec.ny; ++j)
            for (int k = 0; k < grid.spec.nz; ++k) {
                const std::size_t lin = grid.linear({i, j, k});
                if (grid.N[lin] == 0) continue;
                std::snprintf(buf, sizeof(buf), "%d %d %d %d %.17g\n", i, j, k,
                              grid.N[lin], grid.D[lin]);
                os << buf;
            }
    return os.str();
}

GridSpec grid_for_bounds(const Vec3& lo, const Vec3& hi, double extent,
                         double margin_frac) {
    GridSpec spec;
    spec.extent = extent;
    const Vec3 size = hi - lo;
    const double mx = std::max(size.x * margin_frac, extent);
    const double my = std::max(size.y * margin_frac, extent);
    const double mz = std::max(size.z * margin_frac, extent);
    spec.origin = {lo.x - mx, lo.y - my, lo.z - mz};
    spec.nx = static_cast<int>(std::ceil((size.x + 2 * mx) / extent)) + 1;
    spec.ny = static_cast<int>(std::ceil((size.y + 2 * my) / extent)) + 1;
    spec.nz = static_cast<int>(std::ceil((size.z + 2 * mz) / extent)) + 1;
    spec.validate();
    return spec;
}

}  // namespace sedm
