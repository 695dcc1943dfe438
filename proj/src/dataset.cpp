#include "sedm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace sedm {

void save_pgm(const std::string& path, const Plane<float>& img) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_pgm: cannot open " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float v = std::clamp(img.at(x, y), 0.0f, 1.0f);
            row[x] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        os.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!os) throw std::runtime_error("save_pgm: write failed for " + path);
}

Plane<float> load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    is >> magic >> w >> h >> maxv;
    if (!is || magic != "P5" || w <= 0 || h <= 0 || maxv != 255)
        throw std::runtime_error("load_pgm: malformed header in " + path);
    is.get();  // single whitespace after maxval
    Plane<float> img(w, h);
    std::vector<unsigned char> row(w);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), w);
        if (!is) throw std::runtime_error("load_pgm: truncated data in " + path);
        for (int x = 0; x < w; ++x) img.at(x, y) = row[x] / 255.0f;
    }
    return img;
}

void save_depth_raw(const std::string& path, const Plane<float>& depth) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_depth_raw: cannot open " + path);
    os << depth.width << " " << depth.height << "\n";
    os.write(reinterpret_cast<const char*>(depth.data.data()),
             static_cast<std::streamsize>(depth.size() * sizeof(float)));
    if (!os) throw std::runtime_error("save_depth_raw: write failed for " + path);
}

Plane<float> load_depth_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_depth_raw: cannot open " + path);
    std::string header;
    std::getline(is, header);
    std::istringstream hs(header);
    int w = 0, h = 0;
    if (!(hs >> w >> h) || w <= 0 || h <= 0)
        throw std::runtime_error("load_depth_raw: malformed header in " + path);
    Plane<float> depth(w, h);
    is.read(reinterpret_cast<char*>(depth.data.data()),
            static_cast<std::streamsize>(depth.size() * sizeof(float)));
    if (is.gcount() != static_cast<std::streamsize>(depth.size() * sizeof(float)))
        throw std::runtime_error("load_depth_raw: truncated data in " + path);
    return depth;
}

namespace {

std::string view_path(const std::string& dir, const char* pattern, int i) {
    char name[64];
    std::snprintf(name, sizeof(name), pattern, i);
    return (fs::path(dir) / name).string();
}

}  // namespace

void save_dataset(const std::string& dir, const std::vector<CameraView>& views,
                  const std::vector<int>* lighting, const Scene* scene) {
    fs::create_directories(dir);
    std::ofstream poses((fs::path(dir) / "poses.txt").string(), std::ios::trunc);
    if (!poses) throw std::runtime_error("save_dataset: cannot open poses.txt");
    for (std::size_t i = 0; i < views.size(); ++i) {
        views[i].validate();
        poses << pose_line(static_cast<int>(i), views[i].intrinsics, views[i].pose)
              << "\n";
        save_pgm(view_path(dir, "img_%05d.pgm", static_cast<int>(i)), views[i].image);
        save_depth_raw(view_path(dir, "depth_%05d.raw", static_cast<int>(i)),
                       views[i].depth);
    }
    if (lighting) {
        std::ofstream lf((fs::path(dir) / "lighting.txt").string(), std::ios::trunc);
        for (int l : *lighting) lf << l << "\n";
    }
    if (scene) {
        std::ofstream sf((fs::path(dir) / "scene.txt").string(), std::ios::trunc);
        sf << serialize_scene(*scene);
    }
}

std::vector<CameraView> load_dataset(const std::string& dir) {
    std::ifstream poses((fs::path(dir) / "poses.txt").string());
    if (!poses)
        throw std::runtime_error("load_dataset: cannot open poses.txt in " + dir);
    std::vector<CameraView> views;
    std::string line;
    while (std::getline(poses, line)) {
        if (line.empty()) continue;
        CameraView v;
        int id = 0;
        parse_pose_line(line, id, v.intrinsics, v.pose);
        v.image = load_pgm(view_path(dir, "img_%05d.pgm", id));
        v.depth = load_depth_raw(view_path(dir, "depth_%05d.raw", id));
        if (!v.image.same_size(v.depth))
            throw std::runtime_error("load_dataset: image/depth size mismatch for view " +
                                     std::to_string(id));
        v.intrinsics.width = v.image.width;
        v.intrinsics.height = v.image.height;
        v.validate();
        views.push_back(std::move(v));
    }
    if (views.empty()) throw std::runtime_error("load_dataset: no views in " + dir);
    return views;
}

std::vector<int> load_lighting(const std::string& dir) {
    std::ifstream lf((fs::path(dir) / "lighting.txt").string());
    std::vector<int> out;
    int v = 0;
    while (lf >> v) out.push_back(v);
    return out;
}

bool dataset_has_scene(const std::string& dir) {
    return fs::exists(fs::path(dir) / "scene.txt");
}

Scene load_dataset_scene(const std::string& dir) {
    std::ifstream sf((fs::path(dir) / "scene.txt").string());
    if (!sf) throw std::runtime_error("load_dataset_scene: no scene.txt in " + dir);
    std::stringstream ss;
    ss << sf.rdbuf();
    return parse_scene(ss.str());
}

}  // namespace sedm
