#include "sedm/scene.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "sedm/rng.hpp"

namespace sedm {

double SceneTriangle::area() const {
    return 0.5 * (v1 - v0).cross(v2 - v0).norm();
}

Vec3 SceneTriangle::normal() const {
    return (v1 - v0).cross(v2 - v0).normalized();
}

void Scene::bounds(Vec3& lo, Vec3& hi) const {
    lo = {1e30, 1e30, 1e30};
    hi = {-1e30, -1e30, -1e30};
    auto grow = [&](const Vec3& p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    };
    for (const auto& t : triangles) {
        grow(t.v0);
        grow(t.v1);
        grow(t.v2);
    }
}

void Scene::validate() const {
    if (triangles.empty()) throw std::invalid_argument("Scene: no triangles");
    for (const auto& t : triangles)
        if (t.area() <= 1e-12)
            throw std::invalid_argument("Scene: degenerate triangle");
    for (const auto& t : triangles)
        if (t.texture < 0 || t.texture >= static_cast<int>(textures.size()))
            throw std::invalid_argument("Scene: triangle texture index out of range");
}

double eval_texture(const TextureParams& t, double u, double v) {
    // rotate pattern coordinates
    const double c = std::cos(t.angle), s = std::sin(t.angle);
    const double ru = c * (u - t.u0) - s * (v - t.v0);
    const double rv = s * (u - t.u0) + c * (v - t.v0);
    switch (t.kind) {
        case TextureKind::Checker: {
            const long cu = static_cast<long>(std::floor(ru * t.scale));
            const long cv = static_cast<long>(std::floor(rv * t.scale));
            return ((cu + cv) & 1) ? t.a1 : t.a0;
        }
        case TextureKind::Polygon: {
            // regular k-gon of circumradius 1/scale centered at (u0,v0)
            const double r = 1.0 / t.scale;
            bool inside = true;
            for (int i = 0; i < t.sides; ++i) {
                const double a = 2.0 * M_PI * (i + 0.5) / t.sides;
                // half-plane through the edge midpoint, inward normal
                const double nx = std::cos(a), ny = std::sin(a);
                const double d = r * std::cos(M_PI / t.sides);
                if (nx * ru + ny * rv > d) {
                    inside = false;
                    break;
                }
            }
            return inside ? t.a1 : t.a0;
        }
        case TextureKind::Gradient:
            return t.a0 + (t.a1 - t.a0) *
                              0.5 * (1.0 + std::sin(ru * t.scale * 2.0 * M_PI));
    }
    return t.a0;
}

namespace {

void push_quad(Scene& scene, const Vec3& p00, const Vec3& p10, const Vec3& p11,
               const Vec3& p01, int texture) {
    scene.triangles.push_back({p00, p10, p11, {0, 0}, {1, 0}, {1, 1}, texture});
    scene.triangles.push_back({p00, p11, p01, {0, 0}, {1, 1}, {0, 1}, texture});
}

// axis-aligned box with outward normals
void push_box(Scene& scene, const Vec3& lo, const Vec3& hi, int texture) {
    const Vec3 a{lo.x, lo.y, lo.z}, b{hi.x, lo.y, lo.z}, c{hi.x, hi.y, lo.z},
        d{lo.x, hi.y, lo.z};
    const Vec3 e{lo.x, lo.y, hi.z}, f{hi.x, lo.y, hi.z}, g{hi.x, hi.y, hi.z},
        h{lo.x, hi.y, hi.z};
    push_quad(scene, e, f, g, h, texture);  // top (+z)
    push_quad(scene, b, a, d, c, texture);  // bottom (-z)
    push_quad(scene, a, b, f, e, texture);  // -y
    push_quad(scene, c, d, h, g, texture);  // +y
    push_quad(scene, d, a, e, h, texture);  // -x
    push_quad(scene, b, c, g, f, texture);  // +x
}

int add_texture(Scene& scene, Rng& rng, bool allow_gradient) {
    TextureParams t;
    const double pick = rng.uniform();
    if (pick < 0.45) {
        t.kind = TextureKind::Checker;
        t.scale = rng.uniform(3.0, 7.0);
    } else if (pick < 0.8 || !allow_gradient) {
        t.kind = TextureKind::Polygon;
        t.scale = rng.uniform(1.6, 3.2);
        t.sides = 3 + static_cast<int>(rng.uniform_int(4));
        t.u0 = rng.uniform(0.3, 0.7);
        t.v0 = rng.uniform(0.3, 0.7);
    } else {
        t.kind = TextureKind::Gradient;
        t.scale = rng.uniform(0.8, 1.8);
    }
    t.angle = rng.uniform(0.0, 2.0 * M_PI);
    t.a0 = rng.uniform(0.1, 0.4);
    t.a1 = rng.uniform(0.6, 0.95);
    scene.textures.push_back(t);
    return static_cast<int>(scene.textures.size()) - 1;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, SceneComplexity complexity) {
    Rng rng = Rng::derive(seed, "scene");
    Scene scene;

    const bool small = complexity == SceneComplexity::Small;
    const int n_boxes = small ? 1 + static_cast<int>(rng.uniform_int(3))
                              : 3 + static_cast<int>(rng.uniform_int(5));
    const int n_panels = small ? 1 + static_cast<int>(rng.uniform_int(3))
                               : 2 + static_cast<int>(rng.uniform_int(4));

    // ground plane, 0.7 m across, checkered
    {
        TextureParams ground;
        ground.kind = TextureKind::Checker;
        ground.scale = rng.uniform(5.0, 8.0);
        ground.angle = rng.uniform(0.0, 2.0 * M_PI);
        ground.a0 = rng.uniform(0.15, 0.3);
        ground.a1 = rng.uniform(0.6, 0.85);
        scene.textures.push_back(ground);
        const double half = 0.35;
        push_quad(scene, {-half, -half, 0.0}, {half, -half, 0.0},
                  {half, half, 0.0}, {-half, half, 0.0}, 0);
    }

    for (int i = 0; i < n_boxes; ++i) {
        const double sx = rng.uniform(0.06, 0.16);
        const double sy = rng.uniform(0.06, 0.16);
        const double sz = rng.uniform(0.05, 0.18);
        const double px = rng.uniform(-0.22, 0.22);
        const double py = rng.uniform(-0.22, 0.22);
        const int tex = add_texture(scene, rng, /*allow_gradient=*/false);
        push_box(scene, {px - sx / 2, py - sy / 2, 0.0},
                 {px + sx / 2, py + sy / 2, sz}, tex);
    }

    for (int i = 0; i < n_panels; ++i) {
        // tilted rectangular panel floating above the ground
        const double w = rng.uniform(0.1, 0.2);
        const double h = rng.uniform(0.1, 0.2);
        const double px = rng.uniform(-0.2, 0.2);
        const double py = rng.uniform(-0.2, 0.2);
        const double pz = rng.uniform(0.08, 0.26);
        const double yaw = rng.uniform(0.0, 2.0 * M_PI);
        const double tilt = rng.uniform(0.0, 0.8);
        const Mat3 r = axis_angle({0, 0, 1}, yaw) * axis_angle({1, 0, 0}, tilt);
        const Vec3 du = r * Vec3{w, 0, 0};
        const Vec3 dv = r * Vec3{0, h, 0};
        const Vec3 o{px, py, pz};
        const int tex = add_texture(scene, rng, /*allow_gradient=*/true);
        push_quad(scene, o, o + du, o + du + dv, o + dv, tex);
    }

    // 2-4 directional lights from the upper hemisphere
    const int n_lights = 2 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_lights; ++i) {
        const double az = rng.uniform(0.0, 2.0 * M_PI);
        const double el = rng.uniform(0.5, 1.3);
        const Vec3 dir{std::cos(az) * std::cos(el), std::sin(az) * std::cos(el),
                       std::sin(el)};
        scene.lights.push_back({dir.normalized(), rng.uniform(0.45, 0.9)});
    }
    scene.ambient = rng.uniform(0.12, 0.25);
    scene.lighting_configs = 4;

    scene.validate();
    return scene;
}

std::vector<DirectionalLight> lighting_config(const Scene& scene, int index,
                                              double& ambient_out) {
    const int j = ((index % scene.lighting_configs) + scene.lighting_configs) %
                  scene.lighting_configs;
    // fixed per-configuration azimuth swing and intensity scaling
    static const double swing[] = {0.0, 1.1, 2.4, 3.8};
    static const double gain[] = {1.0, 0.72, 1.25, 0.55};
    static const double ambient_gain[] = {1.0, 1.25, 0.8, 1.45};
    const Mat3 rot = axis_angle({0, 0, 1}, swing[j % 4]);
    std::vector<DirectionalLight> out;
    out.reserve(scene.lights.size());
    for (std::size_t i = 0; i < scene.lights.size(); ++i) {
        const auto& l = scene.lights[i];
        // alternate lights also flip relative strength between configs
        const double flip = ((i + j) % 2 == 0) ? 1.0 : 0.6;
        out.push_back({(rot * l.direction).normalized(),
                       std::min(2.0, l.intensity * gain[j % 4] * flip)});
    }
    ambient_out = std::min(1.0, scene.ambient * ambient_gain[j % 4]);
    return out;
}

std::string serialize_scene(const Scene& scene) {
    std::ostringstream os;
    char buf[512];
    os << "SEDM_SCENE 1\n";
    std::snprintf(buf, sizeof(buf), "ambient %.17g\nconfigs %d\n", scene.ambient,
                  scene.lighting_configs);
    os << buf;
    os << "lights " << scene.lights.size() << "\n";
    for (const auto& l : scene.lights) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", l.direction.x,
                      l.direction.y, l.direction.z, l.intensity);
        os << buf;
    }
    os << "textures " << scene.textures.size() << "\n";
    for (const auto& t : scene.textures) {
        std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %d %.17g %.17g\n",
                      static_cast<int>(t.kind), t.scale, t.angle, t.a0, t.a1,
                      t.sides, t.u0, t.v0);
        os << buf;
    }
    os << "triangles " << scene.triangles.size() << "\n";
    for (const auto& t : scene.triangles) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g "
                      "%.17g %.17g %.17g %.17g %.17g %.17g %d\n",
                      t.v0.x, t.v0.y, t.v0.z, t.v1.x, t.v1.y, t.v1.z, t.v2.x,
                      t.v2.y, t.v2.z, t.uv0.x, t.uv0.y, t.uv1.x, t.uv1.y,
                      t.uv2.x, t.uv2.y, t.texture);
        os << buf;
    }
    return os.str();
}

Scene parse_scene(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "SEDM_SCENE" || version != 1)
        throw std::runtime_error("parse_scene: bad header");
    Scene scene;
    std::size_t n = 0;
    if (!(is >> tag >> scene.ambient) || tag != "ambient")
        throw std::runtime_error("parse_scene: missing ambient");
    if (!(is >> tag >> scene.lighting_configs) || tag != "configs")
        throw std::runtime_error("parse_scene: missing configs");
    if (!(is >> tag >> n) || tag != "lights")
        throw std::runtime_error("parse_scene: missing lights");
    scene.lights.resize(n);
    for (auto& l : scene.lights)
        if (!(is >> l.direction.x >> l.direction.y >> l.direction.z >> l.intensity))
            throw std::runtime_error("parse_scene: bad light");
    if (!(is >> tag >> n) || tag != "textures")
        throw std::runtime_error("parse_scene: missing textures");
    scene.textures.resize(n);
    for (auto& t : scene.textures) {
        int kind = 0;
        if (!(is >> kind >> t.scale >> t.angle >> t.a0 >> t.a1 >> t.sides >> t.u0 >>
              t.v0))
            throw std::runtime_error("parse_scene: bad texture");
        t.kind = static_cast<TextureKind>(kind);
    }
    if (!(is >> tag >> n) || tag != "triangles")
        throw std::runtime_error("parse_scene: missing triangles");
    scene.triangles.resize(n);
    for (auto& t : scene.triangles) {
        if (!(is >> t.v0.x >> t.v0.y >> t.v0.z >> t.v1.x >> t.v1.y >> t.v1.z >>
              t.v2.x >> t.v2.y >> t.v2.z >> t.uv0.x >> t.uv0.y >> t.uv1.x >>
              t.uv1.y >> t.uv2.x >> t.uv2.y >> t.texture))
            throw std::runtime_error("parse_scene: bad triangle");
    }
    scene.validate();
    return scene;
}

}  // namespace sedm
