#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sedm/dataset.hpp"
#include "sedm/raster.hpp"
#include "sedm/rng.hpp"
#include "sedm/scene.hpp"

using namespace sedm;
namespace fs = std::filesystem;

namespace {

// distance from point to triangle in 3D; independent of the rasterizer
double point_triangle_distance(const Vec3& p, const SceneTriangle& t) {
    const Vec3 ab = t.v1 - t.v0, ac = t.v2 - t.v0, ap = p - t.v0;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return (p - t.v0).norm();
    const Vec3 bp = p - t.v1;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return (p - t.v1).norm();
    const Vec3 cp = p - t.v2;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return (p - t.v2).norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return (p - (t.v0 + ab * v)).norm();
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double v = d2 / (d2 - d6);
        return (p - (t.v0 + ac * v)).norm();
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double v = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (t.v1 + (t.v2 - t.v1) * v)).norm();
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (t.v0 + ab * v + ac * w)).norm();
}

Intrinsics small_intrinsics(int size = 64, double f = 90.0) {
    Intrinsics k;
    k.width = k.height = size;
    k.fx = k.fy = f;
    k.cx = k.cy = 0.5 * (size - 1);
    return k;
}

}  // namespace

TEST_CASE("generate_scene is deterministic and seed-sensitive") {
    const Scene a = generate_scene(0, SceneComplexity::Small);
    const Scene b = generate_scene(0, SceneComplexity::Small);
    const Scene c = generate_scene(1, SceneComplexity::Small);
    CHECK(serialize_scene(a) == serialize_scene(b));
    CHECK(serialize_scene(a) != serialize_scene(c));
}

TEST_CASE("small scenes stay inside the triangle budget") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Scene s = generate_scene(seed, SceneComplexity::Small);
        CHECK(s.triangles.size() >= 12);
        CHECK(s.triangles.size() <= 200);
    }
}

TEST_CASE("scene serialization round-trips exactly") {
    const Scene a = generate_scene(3, SceneComplexity::Medium);
    const Scene b = parse_scene(serialize_scene(a));
    CHECK(serialize_scene(a) == serialize_scene(b));
}

TEST_CASE("parse_scene rejects malformed text") {
    CHECK_THROWS_AS(parse_scene("not a scene"), std::runtime_error);
    CHECK_THROWS_AS(parse_scene("SEDM_SCENE 1\nambient 0.2\n"), std::runtime_error);
}

TEST_CASE("fronto-parallel square renders constant depth 1") {
    Scene scene;
    TextureParams t;
    t.kind = TextureKind::Checker;
    scene.textures.push_back(t);
    // world frame == camera frame (identity pose); plane z = 1
    scene.triangles.push_back(
        {{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {0, 0}, {1, 0}, {1, 1}, 0});
    scene.triangles.push_back(
        {{-1, -1, 1}, {1, 1, 1}, {-1, 1, 1}, {0, 0}, {1, 1}, {0, 1}, 0});
    scene.lights.push_back({{0, 0, -1}, 1.0});
    const auto view = render(scene, small_intrinsics(), Pose{}, 0);
    for (const float d : view.depth.data)
        CHECK(std::abs(d - 1.0f) < 1e-6f);
}

TEST_CASE("empty scene renders no depth") {
    Scene scene;
    TextureParams t;
    scene.textures.push_back(t);
    const auto view = render(scene, small_intrinsics(), Pose{}, 0);
    for (const float d : view.depth.data) CHECK(d <= 0.0f);
}

TEST_CASE("lighting changes the image but never the depth") {
    const Scene scene = generate_scene(7, SceneComplexity::Small);
    TrajectoryParams tp_light;
    tp_light.width = tp_light.height = 64;
    tp_light.min_coverage = 0.0;  // coverage is not under test here
    const Trajectory traj = generate_trajectory(scene, 4, 7, tp_light);
    const auto& [k, pose] = traj.views[0];
    const auto v0 = render(scene, k, pose, 0);
    const auto v1 = render(scene, k, pose, 1);
    CHECK(v0.depth.data == v1.depth.data);
    CHECK(v0.image.data != v1.image.data);
}

TEST_CASE("every rendered depth pixel backprojects onto scene geometry") {
    const Scene scene = generate_scene(1, SceneComplexity::Small);
    TrajectoryParams tp;
    tp.width = tp.height = 64;
    tp.min_coverage = 0.0;
    const Trajectory traj = generate_trajectory(scene, 3, 5, tp);
    for (const auto& [k, pose] : traj.views) {
        const auto view = render(scene, k, pose, 0);
        double worst = 0.0;
        for (int y = 0; y < view.depth.height; ++y)
            for (int x = 0; x < view.depth.width; ++x) {
                const float d = view.depth.at(x, y);
                if (d <= 0.0f) continue;
                const Vec3 p = backproject({double(x), double(y)}, d, view);
                double best = 1e30;
                for (const auto& tri : scene.triangles)
                    best = std::min(best, point_triangle_distance(p, tri));
                worst = std::max(worst, best);
            }
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("rendering is deterministic") {
    const Scene scene = generate_scene(2, SceneComplexity::Small);
    TrajectoryParams tp;
    tp.width = tp.height = 64;
    tp.min_coverage = 0.0;
    const Trajectory traj = generate_trajectory(scene, 2, 3, tp);
    const auto a = render(scene, traj.views[0].first, traj.views[0].second, 1);
    const auto b = render(scene, traj.views[0].first, traj.views[0].second, 1);
    CHECK(a.image.data == b.image.data);
    CHECK(a.depth.data == b.depth.data);
}

TEST_CASE("generate_trajectory preconditions and determinism") {
    const Scene scene = generate_scene(0, SceneComplexity::Small);
    CHECK_THROWS_AS(generate_trajectory(scene, 1, 0), std::invalid_argument);

    TrajectoryParams tp;
    tp.width = tp.height = 64;
    tp.grid_extent = 0.025;  // coverage voxels matched to the 64px footprint
    const Trajectory a = generate_trajectory(scene, 10, 11, tp);
    const Trajectory b = generate_trajectory(scene, 10, 11, tp);
    REQUIRE(a.views.size() == 10);
    CHECK(a.lighting == b.lighting);
    for (std::size_t i = 0; i < a.views.size(); ++i) {
        for (int j = 0; j < 9; ++j)
            CHECK(a.views[i].second.rotation.m[j] == b.views[i].second.rotation.m[j]);
        // cameras stay inside the unit sphere so pose files round-trip at 1e-9
        CHECK(a.views[i].second.center().norm() < 1.0);
    }
}

TEST_CASE("dataset save/load round-trip") {
    const Scene scene = generate_scene(4, SceneComplexity::Small);
    TrajectoryParams tp;
    tp.width = tp.height = 64;
    tp.min_coverage = 0.0;
    const Trajectory traj = generate_trajectory(scene, 4, 13, tp);
    std::vector<CameraView> views;
    for (std::size_t i = 0; i < traj.views.size(); ++i)
        views.push_back(
            render(scene, traj.views[i].first, traj.views[i].second, traj.lighting[i]));

    const std::string dir = (fs::temp_directory_path() / "sedm_ds_test").string();
    fs::remove_all(dir);
    save_dataset(dir, views, &traj.lighting, &scene);
    const auto loaded = load_dataset(dir);
    REQUIRE(loaded.size() == views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        // depth is stored bitwise
        CHECK(loaded[i].depth.data == views[i].depth.data);
        // 8-bit image quantization loses at most half a step
        float worst = 0.0f;
        for (std::size_t j = 0; j < views[i].image.size(); ++j)
            worst = std::max(worst,
                             std::abs(loaded[i].image.data[j] - views[i].image.data[j]));
        CHECK(worst <= 0.5f / 255.0f + 1e-6f);
        for (int j = 0; j < 9; ++j)
            CHECK(std::abs(loaded[i].pose.rotation.m[j] - views[i].pose.rotation.m[j]) <
                  1e-9);
        CHECK(std::abs(loaded[i].pose.translation.x - views[i].pose.translation.x) < 1e-9);
        CHECK(std::abs(loaded[i].pose.translation.y - views[i].pose.translation.y) < 1e-9);
        CHECK(std::abs(loaded[i].pose.translation.z - views[i].pose.translation.z) < 1e-9);
    }
    CHECK(load_lighting(dir) == traj.lighting);
    REQUIRE(dataset_has_scene(dir));
    CHECK(serialize_scene(load_dataset_scene(dir)) == serialize_scene(scene));
    fs::remove_all(dir);
}

TEST_CASE("malformed dataset files raise errors") {
    const std::string dir = (fs::temp_directory_path() / "sedm_bad_ds").string();
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK_THROWS(load_dataset(dir));  // no poses.txt

    {
        std::ofstream os(dir + "/depth_trunc.raw", std::ios::binary);
        os << "8 8\n";
        const float z = 0;
        os.write(reinterpret_cast<const char*>(&z), sizeof(z));  // 1 of 64 floats
    }
    CHECK_THROWS_AS(load_depth_raw(dir + "/depth_trunc.raw"), std::runtime_error);
    {
        std::ofstream os(dir + "/bad.pgm", std::ios::binary);
        os << "P6\n8 8\n255\n";
    }
    CHECK_THROWS_AS(load_pgm(dir + "/bad.pgm"), std::runtime_error);
    fs::remove_all(dir);
}
