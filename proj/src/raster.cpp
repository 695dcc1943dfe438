#include "sedm/raster.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sedm {

namespace {

constexpr double kZNear = 1e-4;

struct ClipVert {
    Vec3 p;   // camera space
    Vec2 uv;
};

// Sutherland-Hodgman against the z >= kZNear plane.
int clip_near(const ClipVert in[3], ClipVert out[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const ClipVert& s = in[i];
        const ClipVert& e = in[(i + 1) % 3];
        const bool si = s.p.z >= kZNear;
        const bool ei = e.p.z >= kZNear;
        if (si) out[n++] = s;
        if (si != ei) {
            const double t = (kZNear - s.p.z) / (e.p.z - s.p.z);
            ClipVert v;
            v.p = s.p + (e.p - s.p) * t;
            v.uv = {s.uv.x + (e.uv.x - s.uv.x) * t, s.uv.y + (e.uv.y - s.uv.y) * t};
            out[n++] = v;
        }
    }
    return n;
}

inline double edge_fn(const Vec2& a, const Vec2& b, double qx, double qy) {
    return (b.x - a.x) * (qy - a.y) - (b.y - a.y) * (qx - a.x);
}

struct Shader {
    const Scene* scene;
    std::vector<double> tri_shade;  // per-triangle Lambertian factor
};

void rasterize(const Scene& scene, const Intrinsics& K, const Pose& pose,
               const Shader* shader, Plane<float>* image, Plane<float>& depth) {
    const int w = K.width, h = K.height;
    depth = Plane<float>(w, h, 0.0f);
    if (image) *image = Plane<float>(w, h, 0.0f);

    for (std::size_t ti = 0; ti < scene.triangles.size(); ++ti) {
        const SceneTriangle& tri = scene.triangles[ti];
        ClipVert cv[3] = {{pose.to_camera(tri.v0), tri.uv0},
                          {pose.to_camera(tri.v1), tri.uv1},
                          {pose.to_camera(tri.v2), tri.uv2}};
        ClipVert poly[4];
        const int npoly = clip_near(cv, poly);
        if (npoly < 3) continue;

        for (int f = 1; f + 1 < npoly; ++f) {
            const ClipVert* v[3] = {&poly[0], &poly[f], &poly[f + 1]};
            Vec2 s[3];
            double iz[3];
            Vec2 uvw[3];  // uv pre-multiplied by 1/z
            for (int i = 0; i < 3; ++i) {
                iz[i] = 1.0 / v[i]->p.z;
                s[i] = {K.fx * v[i]->p.x * iz[i] + K.cx,
                        K.fy * v[i]->p.y * iz[i] + K.cy};
                uvw[i] = {v[i]->uv.x * iz[i], v[i]->uv.y * iz[i]};
            }
            double area = edge_fn(s[0], s[1], s[2].x, s[2].y);
            if (std::abs(area) < 1e-12) continue;
            int i0 = 0, i1 = 1, i2 = 2;
            if (area < 0) {
                std::swap(i1, i2);
                area = -area;
            }
            const Vec2 a = s[i0], b = s[i1], c = s[i2];
            const double inv_area = 1.0 / area;

            const int x_lo = std::max(0, (int)std::ceil(std::min({a.x, b.x, c.x})));
            const int x_hi = std::min(w - 1, (int)std::floor(std::max({a.x, b.x, c.x})));
            const int y_lo = std::max(0, (int)std::ceil(std::min({a.y, b.y, c.y})));
            const int y_hi = std::min(h - 1, (int)std::floor(std::max({a.y, b.y, c.y})));

            for (int y = y_lo; y <= y_hi; ++y) {
                for (int x = x_lo; x <= x_hi; ++x) {
                    const double w0 = edge_fn(b, c, x, y);
                    const double w1 = edge_fn(c, a, x, y);
                    const double w2 = edge_fn(a, b, x, y);
                    if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                    const double l0 = w0 * inv_area, l1 = w1 * inv_area,
                                 l2 = w2 * inv_area;
                    const double wz = l0 * iz[i0] + l1 * iz[i1] + l2 * iz[i2];
                    if (wz <= 0.0) continue;
                    const double z = 1.0 / wz;
                    float& dz = depth.at(x, y);
                    if (dz > 0.0f && z >= dz) continue;
                    dz = static_cast<float>(z);
                    if (image) {
                        const double uu =
                            (l0 * uvw[i0].x + l1 * uvw[i1].x + l2 * uvw[i2].x) / wz;
                        const double vv =
                            (l0 * uvw[i0].y + l1 * uvw[i1].y + l2 * uvw[i2].y) / wz;
                        const double albedo =
                            eval_texture(scene.textures[tri.texture], uu, vv);
                        image->at(x, y) = static_cast<float>(
                            std::clamp(shader->tri_shade[ti] * albedo, 0.0, 1.0));
                    }
                }
            }
        }
    }
}

}  // namespace

CameraView render(const Scene& scene, const Intrinsics& K, const Pose& pose,
                  int lighting_index) {
    K.validate();
    pose.validate(1e-6);

    Shader shader;
    shader.scene = &scene;
    double ambient = scene.ambient;
    const auto lights = lighting_config(scene, lighting_index, ambient);
    shader.tri_shade.resize(scene.triangles.size());
    for (std::size_t i = 0; i < scene.triangles.size(); ++i) {
        const Vec3 n = scene.triangles[i].normal();
        double s = ambient;
        for (const auto& l : lights) s += l.intensity * std::max(0.0, n.dot(l.direction));
        shader.tri_shade[i] = std::clamp(s, 0.0, 1.0);
    }

    CameraView view;
    view.intrinsics = K;
    view.pose = pose;
    rasterize(scene, K, pose, &shader, &view.image, view.depth);
    return view;
}

Plane<float> render_depth(const Scene& scene, const Intrinsics& K, const Pose& pose) {
    Plane<float> depth;
    rasterize(scene, K, pose, nullptr, nullptr, depth);
    return depth;
}

}  // namespace sedm
