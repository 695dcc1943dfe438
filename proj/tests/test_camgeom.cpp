#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sedm/camgeom.hpp"
#include "sedm/rng.hpp"

using namespace sedm;

namespace {

Intrinsics test_intrinsics() {
    Intrinsics k;
    k.fx = k.fy = 100.0;
    k.cx = k.cy = 50.0;
    k.width = k.height = 200;
    return k;
}

Pose random_pose(Rng& rng, double max_center_norm = 0.95) {
    Pose p;
    const Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    p.rotation = axis_angle(axis.normalized(), rng.uniform(0.0, 2.0 * M_PI));
    const Vec3 center{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                      rng.uniform(-1.0, 1.0)};
    const double n = center.norm();
    const Vec3 c = n > 1e-9 ? center * (rng.uniform(0.1, max_center_norm) / n)
                            : Vec3{0.1, 0, 0};
    p.translation = (p.rotation * c) * -1.0;
    return p;
}

}  // namespace

TEST_CASE("project maps the optical axis to the principal point") {
    Intrinsics k = test_intrinsics();
    Pose identity;
    auto r = project({0, 0, 2}, k, identity);
    REQUIRE(r.has_value());
    CHECK(r->pixel.x == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(r->pixel.y == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(r->depth == doctest::Approx(2.0));
}

TEST_CASE("project follows u = fx*X/Z + cx") {
    auto r = project({0.5, 0, 1}, test_intrinsics(), Pose{});
    REQUIRE(r.has_value());
    CHECK(r->pixel.x == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(r->pixel.y == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(r->depth == doctest::Approx(1.0));
}

TEST_CASE("project reports out-of-frustum results") {
    Intrinsics k = test_intrinsics();
    CHECK_FALSE(project({0, 0, -1}, k, Pose{}).has_value());  // behind camera
    CHECK_FALSE(project({0, 0, 0}, k, Pose{}).has_value());   // depth 0
    CHECK_FALSE(project({5, 0, 1}, k, Pose{}).has_value());   // off image
}

TEST_CASE("backproject inverts the trivial projections") {
    Intrinsics k = test_intrinsics();
    const Vec3 a = backproject({50, 50}, 2.0, k, Pose{});
    CHECK(a.x == doctest::Approx(0.0));
    CHECK(a.y == doctest::Approx(0.0));
    CHECK(a.z == doctest::Approx(2.0));
    const Vec3 b = backproject({100, 50}, 1.0, k, Pose{});
    CHECK(b.x == doctest::Approx(0.5));
    CHECK(b.z == doctest::Approx(1.0));
}

TEST_CASE("backproject rejects non-positive depth") {
    CHECK_THROWS_AS(backproject({10, 10}, 0.0, test_intrinsics(), Pose{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(backproject({10, 10}, -1.0, test_intrinsics(), Pose{}),
                    std::invalid_argument);
}

TEST_CASE("project/backproject round-trip over 1000 random poses") {
    Rng rng(12345);
    Intrinsics k = test_intrinsics();
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Pose pose = random_pose(rng);
        pose.validate(1e-9);
        const Vec2 pixel{rng.uniform(0.0, k.width - 1e-6),
                         rng.uniform(0.0, k.height - 1e-6)};
        const double depth = rng.uniform(0.1, 10.0);
        const Vec3 p = backproject(pixel, depth, k, pose);
        const auto r = project(p, k, pose);
        REQUIRE(r.has_value());
        worst = std::max({worst, std::abs(r->pixel.x - pixel.x),
                          std::abs(r->pixel.y - pixel.y), std::abs(r->depth - depth)});
        // geometric identity the pipeline depends on: the backprojected point
        // recovers the metric ray
        const Vec3 p2 = backproject(r->pixel, r->depth, k, pose);
        worst = std::max(worst, (p - p2).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("voxel_index half-open cells") {
    GridSpec g;
    g.origin = {0, 0, 0};
    g.extent = 0.005;
    g.nx = g.ny = g.nz = 10;
    auto a = voxel_index({0.0049, 0, 0}, g);
    REQUIRE(a.has_value());
    CHECK(*a == VoxelIndex{0, 0, 0});
    auto b = voxel_index({0.005, 0, 0}, g);  // boundary belongs to the next cell
    REQUIRE(b.has_value());
    CHECK(*b == VoxelIndex{1, 0, 0});
    CHECK_FALSE(voxel_index({-0.001, 0, 0}, g).has_value());
    CHECK_FALSE(voxel_index({0.05, 0, 0}, g).has_value());  // == nx * extent
}

TEST_CASE("voxel_index partitions the grid") {
    Rng rng(7);
    GridSpec g;
    g.origin = {-0.1, 0.2, 0.05};
    g.extent = 0.013;
    g.nx = 7;
    g.ny = 5;
    g.nz = 9;
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p{g.origin.x + rng.uniform(0.0, g.nx * g.extent - 1e-12),
                     g.origin.y + rng.uniform(0.0, g.ny * g.extent - 1e-12),
                     g.origin.z + rng.uniform(0.0, g.nz * g.extent - 1e-12)};
        const auto idx = voxel_index(p, g);
        REQUIRE(idx.has_value());
        CHECK(g.origin.x + idx->x * g.extent <= p.x);
        CHECK(p.x < g.origin.x + (idx->x + 1) * g.extent);
        CHECK(g.origin.y + idx->y * g.extent <= p.y);
        CHECK(p.y < g.origin.y + (idx->y + 1) * g.extent);
        CHECK(g.origin.z + idx->z * g.extent <= p.z);
        CHECK(p.z < g.origin.z + (idx->z + 1) * g.extent);
    }
}

TEST_CASE("warp_homography identity and scale") {
    const Vec2 p = warp_homography({3, 7}, Homography::identity());
    CHECK(p.x == doctest::Approx(3.0));
    CHECK(p.y == doctest::Approx(7.0));
    Homography s;
    s.h[0] = 2.0;
    s.h[4] = 2.0;
    const Vec2 q = warp_homography({3, 7}, s);
    CHECK(q.x == doctest::Approx(6.0));
    CHECK(q.y == doctest::Approx(14.0));
}

TEST_CASE("warp_homography inverse composition over 1000 random warps") {
    Rng rng(99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Homography h;
        for (int j = 0; j < 6; ++j) h.h[j] = rng.uniform(-2.0, 2.0);
        h.h[0] += 3.0;  // keep it well-conditioned
        h.h[4] += 3.0;
        h.h[6] = rng.uniform(-1e-3, 1e-3);
        h.h[7] = rng.uniform(-1e-3, 1e-3);
        h.h[8] = 1.0;
        const Homography hi = h.inverse();
        const Vec2 p{rng.uniform(0.0, 128.0), rng.uniform(0.0, 128.0)};
        const Vec2 q = warp_homography(warp_homography(p, h), hi);
        worst = std::max({worst, std::abs(q.x - p.x), std::abs(q.y - p.y)});
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("warp_homography rejects a degenerate w") {
    Homography h;
    h.h[6] = 0.0;
    h.h[7] = 0.0;
    h.h[8] = 0.0;  // w == 0 for every pixel
    CHECK_THROWS_AS(warp_homography({1, 1}, h), std::runtime_error);
}

TEST_CASE("pose line round-trips within 1e-9") {
    Rng rng(4242);
    for (int i = 0; i < 50; ++i) {
        Intrinsics k;
        k.fx = rng.uniform(50.0, 300.0);
        k.fy = rng.uniform(50.0, 300.0);
        k.cx = rng.uniform(10.0, 90.0);
        k.cy = rng.uniform(10.0, 90.0);
        k.width = k.height = 100;
        const Pose pose = random_pose(rng);
        const std::string line = pose_line(3, k, pose);

        Intrinsics k2;
        Pose pose2;
        int id = 0;
        parse_pose_line(line, id, k2, pose2);
        CHECK(id == 3);
        for (int j = 0; j < 9; ++j)
            CHECK(std::abs(pose2.rotation.m[j] - pose.rotation.m[j]) < 1e-9);
        CHECK(std::abs(pose2.translation.x - pose.translation.x) < 1e-9);
        CHECK(std::abs(pose2.translation.y - pose.translation.y) < 1e-9);
        CHECK(std::abs(pose2.translation.z - pose.translation.z) < 1e-9);
    }
}

TEST_CASE("parse_pose_line rejects malformed input") {
    Intrinsics k;
    Pose p;
    int id;
    CHECK_THROWS_AS(parse_pose_line("0 1 2 3", id, k, p), std::runtime_error);
    CHECK_THROWS_AS(parse_pose_line("", id, k, p), std::runtime_error);
}

TEST_CASE("validation catches bad intrinsics and poses") {
    Intrinsics k = test_intrinsics();
    k.fx = -1;
    CHECK_THROWS_AS(k.validate(), std::invalid_argument);
    k = test_intrinsics();
    k.cx = 500;
    CHECK_THROWS_AS(k.validate(), std::invalid_argument);

    Pose p;
    p.rotation.m[0] = 2.0;  // not orthonormal
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    Pose mirror;
    mirror.rotation.m[0] = -1.0;  // det = -1
    CHECK_THROWS_AS(mirror.validate(), std::invalid_argument);
}
