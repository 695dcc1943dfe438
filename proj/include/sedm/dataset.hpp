#pragma once

#include <string>
#include <vector>

#include "sedm/camgeom.hpp"
#include "sedm/scene.hpp"

namespace sedm {

// Dataset directory layout:
//   poses.txt       one pose line per view (camgeom format)
//   img_%05d.pgm    binary PGM, maxval 255
//   depth_%05d.raw  header line "W H" then W*H little-endian float32, row-major
//   lighting.txt    per-view lighting configuration index (one per line)
//   scene.txt       serialized scene (enables re-rendering for evaluation)

void save_pgm(const std::string& path, const Plane<float>& img);
Plane<float> load_pgm(const std::string& path);

void save_depth_raw(const std::string& path, const Plane<float>& depth);
Plane<float> load_depth_raw(const std::string& path);

void save_dataset(const std::string& dir, const std::vector<CameraView>& views,
                  const std::vector<int>* lighting = nullptr,
                  const Scene* scene = nullptr);
std::vector<CameraView> load_dataset(const std::string& dir);
std::vector<int> load_lighting(const std::string& dir);  // empty if absent
bool dataset_has_scene(const std::string& dir);
Scene load_dataset_scene(const std::string& dir);

}  // namespace sedm
