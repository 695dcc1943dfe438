#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sedm/camgeom.hpp"

namespace sedm {

/// Accumulation grid of the soft expectation step. Each cell carries two
/// counters: N, the number of pixel rays whose surface hit fell in the cell,
/// and D, the sum of the detector scores of those pixels. D/N is the
/// expected (soft) repeatability of the cell.
struct VoxelGrid {
    GridSpec spec;
    std::vector<double> D;
    std::vector<std::int32_t> N;

    explicit VoxelGrid(const GridSpec& s)
        : spec(s), D(s.cell_count(), 0.0), N(s.cell_count(), 0) {
        spec.validate();
    }

    std::size_t linear(const VoxelIndex& i) const {
        return (static_cast<std::size_t>(i.z) * spec.ny + i.y) * spec.nx + i.x;
    }
};

struct RepeatabilityMap {
    Plane<double> values;        // defined where mask != 0
    Plane<std::uint8_t> mask;
};

/// Accumulates one view: every pixel with depth > 0 whose backprojection
/// lands in the grid adds 1 to N and its heatmap score to D. Throws on
/// dimension mismatch or heatmap values outside [0,1].
void accumulate_view(VoxelGrid& grid, const CameraView& view,
                     const Plane<float>& heatmap);

/// accumulate_view over a view list, in list order (fixed reduction order so
/// results are reproducible).
VoxelGrid accumulate(std::span<const CameraView> views,
                     std::span<const Plane<float>> heatmaps, const GridSpec& spec);

/// D/N of one cell, or nullopt when N < min_views.
std::optional<double> repeatability(const VoxelGrid& grid, const VoxelIndex& idx,
                                    int min_views);

/// Projects the per-voxel repeatability into a view: pixels with valid depth
/// whose voxel has N >= min_views get D/N, all others are masked out.
RepeatabilityMap render_repeatability(const VoxelGrid& grid, const CameraView& view,
                                      int min_views);

/// Element k-1 holds the fraction of occupied cells (N >= 1) with N >= k.
std::vector<double> visibility_stats(const VoxelGrid& grid, int k_max);

/// Debug dump: header "X Y Z extent ox oy oz", then one line "i j k N D" per
/// occupied cell in lexicographic (i,j,k) order.
std::string dump_grid(const VoxelGrid& grid);

/// Grid spec covering [lo,hi] plus a fractional margin, at the given extent.
GridSpec grid_for_bounds(const Vec3& lo, const Vec3& hi, double extent,
                         double margin_frac = 0.05);

}  // namespace sedm
