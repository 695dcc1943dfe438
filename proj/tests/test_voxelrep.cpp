#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sedm/rng.hpp"
#include "sedm/voxelgrid.hpp"

using namespace sedm;

namespace {

// Brute-force oracle: re-derives projection, backprojection and cell lookup
// with plain arithmetic, independent of camgeom/voxelgrid.
struct OracleGrid {
    GridSpec spec;
    std::vector<double> d;
    std::vector<long> n;
};

OracleGrid oracle_accumulate(const std::vector<CameraView>& views,
                             const std::vector<Plane<float>>& heatmaps,
                             const GridSpec& spec) {
    OracleGrid g{spec, std::vector<double>(spec.cell_count(), 0.0),
                 std::vector<long>(spec.cell_count(), 0)};
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        const auto& view = views[vi];
        const double* r = view.pose.rotation.m;
        const Vec3 t = view.pose.translation;
        for (int y = 0; y < view.depth.height; ++y)
            for (int x = 0; x < view.depth.width; ++x) {
                const double depth = view.depth.at(x, y);
                if (depth <= 0.0) continue;
                // camera point from the pinhole model
                const double cx = (x - view.intrinsics.cx) / view.intrinsics.fx * depth;
                const double cy = (y - view.intrinsics.cy) / view.intrinsics.fy * depth;
                const double cz = depth;
                // world point via R^T (pc - t)
                const double px = cx - t.x, py = cy - t.y, pz = cz - t.z;
                const double wx = r[0] * px + r[3] * py + r[6] * pz;
                const double wy = r[1] * px + r[4] * py + r[7] * pz;
                const double wz = r[2] * px + r[5] * py + r[8] * pz;
                const double fx = std::floor((wx - spec.origin.x) / spec.extent);
                const double fy = std::floor((wy - spec.origin.y) / spec.extent);
                const double fz = std::floor((wz - spec.origin.z) / spec.extent);
                if (fx < 0 || fy < 0 || fz < 0 || fx >= spec.nx || fy >= spec.ny ||
                    fz >= spec.nz)
                    continue;
                const std::size_t lin =
                    (static_cast<std::size_t>(fz) * spec.ny +
                     static_cast<std::size_t>(fy)) *
                        spec.nx +
                    static_cast<std::size_t>(fx);
                g.n[lin] += 1;
                g.d[lin] += heatmaps[vi].at(x, y);
            }
    }
    return g;
}

CameraView synthetic_view(Rng& rng, int size) {
    CameraView v;
    v.intrinsics.width = v.intrinsics.height = size;
    v.intrinsics.fx = rng.uniform(0.8, 1.6) * size;
    v.intrinsics.fy = rng.uniform(0.8, 1.6) * size;
    v.intrinsics.cx = 0.5 * (size - 1) + rng.uniform(-2.0, 2.0);
    v.intrinsics.cy = 0.5 * (size - 1) + rng.uniform(-2.0, 2.0);
    const Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    v.pose.rotation = axis_angle(axis.normalized(), rng.uniform(0.0, 2.0 * M_PI));
    v.pose.translation = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(0.2, 0.5)};
    v.image = Plane<float>(size, size, 0.5f);
    v.depth = Plane<float>(size, size);
    for (auto& d : v.depth.data)
        d = rng.uniform() < 0.15 ? -1.0f : static_cast<float>(rng.uniform(0.2, 0.6));
    return v;
}

GridSpec random_grid(Rng& rng) {
    GridSpec g;
    const int n = 8 + static_cast<int>(rng.uniform_int(9));
    g.nx = g.ny = g.nz = n;
    g.extent = rng.uniform(0.01, 0.05);
    g.origin = {-0.5 * n * g.extent + rng.uniform(-0.02, 0.02),
                -0.5 * n * g.extent + rng.uniform(-0.02, 0.02),
                rng.uniform(-0.1, 0.3)};
    return g;
}

// 3 views at distinct positions all observing one world point
void three_view_fixture(const Vec3& p, std::vector<CameraView>& views,
                        std::vector<Plane<float>>& heatmaps,
                        const std::vector<float>& scores) {
    views.clear();
    heatmaps.clear();
    for (int i = 0; i < 3; ++i) {
        CameraView v;
        v.intrinsics = {40.0, 40.0, 7.5, 7.5, 16, 16};
        v.pose.rotation = axis_angle({0, 1, 0}, 0.1 * i);
        v.pose.translation = {0.02 * i, 0.0, 0.3};
        const auto proj = project(p, v.intrinsics, v.pose);
        REQUIRE(proj.has_value());
        const int px = static_cast<int>(std::lround(proj->pixel.x));
        const int py = static_cast<int>(std::lround(proj->pixel.y));
        v.image = Plane<float>(16, 16, 0.0f);
        v.depth = Plane<float>(16, 16, -1.0f);
        // depth chosen so this precise pixel backprojects near p
        const Vec3 exact =
            backproject({double(px), double(py)}, proj->depth, v.intrinsics, v.pose);
        (void)exact;
        v.depth.at(px, py) = static_cast<float>(proj->depth);
        Plane<float> heat(16, 16, 0.0f);
        heat.at(px, py) = scores[i];
        views.push_back(std::move(v));
        heatmaps.push_back(std::move(heat));
    }
}

}  // namespace

TEST_CASE("three views with unit scores give D=N=3 at the shared voxel") {
    const Vec3 p{0.001, 0.002, 0.0};
    std::vector<CameraView> views;
    std::vector<Plane<float>> heatmaps;
    three_view_fixture(p, views, heatmaps, {1.0f, 1.0f, 1.0f});

    // cells centered on p and wide enough to absorb integer-pixel rounding
    GridSpec spec;
    spec.extent = 0.02;
    spec.origin = p - Vec3{4.5 * spec.extent, 4.5 * spec.extent, 4.5 * spec.extent};
    spec.nx = spec.ny = spec.nz = 9;
    const VoxelGrid grid = accumulate(views, heatmaps, spec);

    const auto idx = voxel_index(p, spec);
    REQUIRE(idx.has_value());
    const std::size_t lin = grid.linear(*idx);
    CHECK(grid.N[lin] == 3);
    CHECK(grid.D[lin] == doctest::Approx(3.0));
    const auto rep = repeatability(grid, *idx, 3);
    REQUIRE(rep.has_value());
    CHECK(*rep == doctest::Approx(1.0));

    // rendered back into view 1: value 1.0 at the observing pixel, masked
    // out everywhere the view has no depth
    const RepeatabilityMap map = render_repeatability(grid, views[1], 3);
    int valid = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (views[1].depth.at(x, y) <= 0.0f) {
                CHECK(map.mask.at(x, y) == 0);
            } else if (map.mask.at(x, y)) {
                CHECK(map.values.at(x, y) == doctest::Approx(1.0));
                ++valid;
            }
        }
    CHECK(valid == 1);
}

TEST_CASE("soft sum: scores (1.0, 0.5, 0.0) give D/N = 0.5") {
    const Vec3 p{0.001, 0.002, 0.0};
    std::vector<CameraView> views;
    std::vector<Plane<float>> heatmaps;
    three_view_fixture(p, views, heatmaps, {1.0f, 0.5f, 0.0f});
    GridSpec spec;
    spec.extent = 0.02;
    spec.origin = p - Vec3{4.5 * spec.extent, 4.5 * spec.extent, 4.5 * spec.extent};
    spec.nx = spec.ny = spec.nz = 9;
    const VoxelGrid grid = accumulate(views, heatmaps, spec);
    const auto idx = voxel_index(p, spec);
    const std::size_t lin = grid.linear(*idx);
    CHECK(grid.N[lin] == 3);
    CHECK(grid.D[lin] == doctest::Approx(1.5));
    CHECK(*repeatability(grid, *idx, 3) == doctest::Approx(0.5));
}

TEST_CASE("repeatability is undefined below min_views") {
    GridSpec spec;
    spec.nx = spec.ny = spec.nz = 2;
    VoxelGrid grid(spec);
    grid.N[0] = 1;
    grid.D[0] = 1.0;
    CHECK_FALSE(repeatability(grid, {0, 0, 0}, 3).has_value());
    CHECK(repeatability(grid, {0, 0, 0}, 1).has_value());
    grid.N[1] = 5;
    grid.D[1] = 0.0;
    CHECK(*repeatability(grid, {1, 0, 0}, 3) == doctest::Approx(0.0));
}

TEST_CASE("accumulate matches the brute-force oracle on random toy scenes") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int n_views = 3 + static_cast<int>(rng.uniform_int(4));
        const int size = 8 + 8 * static_cast<int>(rng.uniform_int(4));
        std::vector<CameraView> views;
        std::vector<Plane<float>> heatmaps;
        for (int i = 0; i < n_views; ++i) {
            views.push_back(synthetic_view(rng, size));
            Plane<float> heat(size, size);
            for (auto& v : heat.data) v = static_cast<float>(rng.uniform());
            heatmaps.push_back(std::move(heat));
        }
        const GridSpec spec = random_grid(rng);
        const VoxelGrid grid = accumulate(views, heatmaps, spec);
        const OracleGrid oracle = oracle_accumulate(views, heatmaps, spec);
        for (std::size_t i = 0; i < spec.cell_count(); ++i) {
            REQUIRE(grid.N[i] == oracle.n[i]);
            REQUIRE(std::abs(grid.D[i] - oracle.d[i]) <= 1e-12);
        }
        // render-side check against the same oracle
        const RepeatabilityMap map = render_repeatability(grid, views[0], 2);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const float d = views[0].depth.at(x, y);
                if (d <= 0.0f) {
                    REQUIRE(map.mask.at(x, y) == 0);
                    continue;
                }
                const Vec3 p = backproject({double(x), double(y)}, d, views[0]);
                const auto idx = voxel_index(p, spec);
                if (!idx) {
                    REQUIRE(map.mask.at(x, y) == 0);
                    continue;
                }
                const std::size_t lin = grid.linear(*idx);
                if (oracle.n[lin] < 2) {
                    REQUIRE(map.mask.at(x, y) == 0);
                } else {
                    REQUIRE(map.mask.at(x, y) == 1);
                    REQUIRE(std::abs(map.values.at(x, y) -
                                     oracle.d[lin] / oracle.n[lin]) <= 1e-12);
                }
            }
    }
}

TEST_CASE("grid invariants: 0 <= D <= N, permutation independence, additivity") {
    Rng rng(77);
    std::vector<CameraView> views;
    std::vector<Plane<float>> heatmaps;
    for (int i = 0; i < 5; ++i) {
        views.push_back(synthetic_view(rng, 16));
        Plane<float> heat(16, 16);
        for (auto& v : heat.data) v = static_cast<float>(rng.uniform());
        heatmaps.push_back(std::move(heat));
    }
    GridSpec spec = random_grid(rng);
    const VoxelGrid grid = accumulate(views, heatmaps, spec);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        CHECK(grid.D[i] >= 0.0);
        CHECK(grid.D[i] <= grid.N[i] + 1e-12);
        if (grid.N[i] == 0) CHECK(grid.D[i] == 0.0);
    }

    // permuted view order: N identical, D within 1e-12
    std::vector<CameraView> views_rev(views.rbegin(), views.rend());
    std::vector<Plane<float>> heat_rev(heatmaps.rbegin(), heatmaps.rend());
    const VoxelGrid grid_rev = accumulate(views_rev, heat_rev, spec);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        CHECK(grid.N[i] == grid_rev.N[i]);
        CHECK(std::abs(grid.D[i] - grid_rev.D[i]) <= 1e-12);
    }

    // concatenation = cellwise sum of the parts
    const std::vector<CameraView> first(views.begin(), views.begin() + 2);
    const std::vector<Plane<float>> first_h(heatmaps.begin(), heatmaps.begin() + 2);
    const std::vector<CameraView> rest(views.begin() + 2, views.end());
    const std::vector<Plane<float>> rest_h(heatmaps.begin() + 2, heatmaps.end());
    const VoxelGrid ga = accumulate(first, first_h, spec);
    const VoxelGrid gb = accumulate(rest, rest_h, spec);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        CHECK(ga.N[i] + gb.N[i] == grid.N[i]);
        CHECK(std::abs(ga.D[i] + gb.D[i] - grid.D[i]) <= 1e-12);
    }
}

TEST_CASE("constant heatmaps pin the defined repeatability values") {
    Rng rng(88);
    std::vector<CameraView> views;
    std::vector<Plane<float>> zeros, ones;
    for (int i = 0; i < 4; ++i) {
        views.push_back(synthetic_view(rng, 16));
        zeros.emplace_back(16, 16, 0.0f);
        ones.emplace_back(16, 16, 1.0f);
    }
    const GridSpec spec = random_grid(rng);
    const VoxelGrid g0 = accumulate(views, zeros, spec);
    const VoxelGrid g1 = accumulate(views, ones, spec);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        if (g0.N[i] >= 1) CHECK(g0.D[i] == doctest::Approx(0.0));
        if (g1.N[i] >= 1)
            CHECK(g1.D[i] / g1.N[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("accumulate validates inputs") {
    Rng rng(89);
    std::vector<CameraView> views = {synthetic_view(rng, 16)};
    std::vector<Plane<float>> bad_size = {Plane<float>(8, 8, 0.0f)};
    GridSpec spec = random_grid(rng);
    CHECK_THROWS_AS(accumulate(views, bad_size, spec), std::invalid_argument);

    std::vector<Plane<float>> bad_value = {Plane<float>(16, 16, 1.5f)};
    CHECK_THROWS_AS(accumulate(views, bad_value, spec), std::invalid_argument);
    std::vector<Plane<float>> negative = {Plane<float>(16, 16, -0.1f)};
    CHECK_THROWS_AS(accumulate(views, negative, spec), std::invalid_argument);
}

TEST_CASE("visibility_stats counts occupied cells by observation depth") {
    GridSpec spec;
    spec.nx = spec.ny = spec.nz = 2;
    VoxelGrid empty(spec);
    const auto zeros = visibility_stats(empty, 3);
    REQUIRE(zeros.size() == 3);
    for (const double f : zeros) CHECK(f == 0.0);

    VoxelGrid single(spec);
    single.N[0] = 1;
    const auto one = visibility_stats(single, 2);
    CHECK(one[0] == doctest::Approx(1.0));
    CHECK(one[1] == doctest::Approx(0.0));

    VoxelGrid mixed(spec);
    mixed.N[0] = 1;
    mixed.N[1] = 3;
    mixed.N[2] = 5;
    const auto st = visibility_stats(mixed, 5);
    CHECK(st[0] == doctest::Approx(1.0));
    CHECK(st[2] == doctest::Approx(2.0 / 3.0));
    CHECK(st[4] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("grid dump lists occupied cells lexicographically") {
    GridSpec spec;
    spec.nx = 3;
    spec.ny = 2;
    spec.nz = 2;
    spec.extent = 0.01;
    spec.origin = {0.1, 0.2, 0.3};
    VoxelGrid grid(spec);
    grid.N[grid.linear({2, 1, 0})] = 4;
    grid.D[grid.linear({2, 1, 0})] = 2.5;
    grid.N[grid.linear({0, 0, 1})] = 1;
    grid.D[grid.linear({0, 0, 1})] = 0.25;

    std::istringstream is(dump_grid(grid));
    std::string header;
    std::getline(is, header);
    CHECK(header.substr(0, 5) == "3 2 2");
    std::string line1, line2;
    std::getline(is, line1);
    std::getline(is, line2);
    CHECK(line1.substr(0, 5) == "0 0 1");  // i-major lexicographic order
    CHECK(line2.substr(0, 5) == "2 1 0");
}
