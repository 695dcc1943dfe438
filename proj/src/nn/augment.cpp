#include "sedm/nn/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sedm/rng.hpp"

namespace sedm::nn {

namespace {

Homography translation(double tx, double ty) {
    Homography t;
    t.h[2] = tx;
    t.h[5] = ty;
    return t;
}

float bilinear(const Plane<float>& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0, fy = y - y0;
    const double v00 = img.at(x0, y0), v10 = img.at(x1, y0);
    const double v01 = img.at(x0, y1), v11 = img.at(x1, y1);
    return static_cast<float>((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                              (v01 * (1 - fx) + v11 * fx) * fy);
}

void gaussian_blur(Plane<float>& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(2.5 * sigma));
    if (radius < 1) return;
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    Plane<float> tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * img.at(std::clamp(x + i, 0, img.width - 1), y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, img.height - 1));
            img.at(x, y) = static_cast<float>(acc);
        }
}

}  // namespace

Homography augment_homography(int width, int height, const AugmentConfig& cfg,
                              std::uint64_t seed) {
    if (!cfg.warp) return Homography::identity();
    Rng rng = Rng::derive(seed, "augment-warp");
    const double theta = rng.uniform(-cfg.rot_max_deg, cfg.rot_max_deg) * M_PI / 180.0;
    const double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    const double tx = rng.uniform(-cfg.shift_max_px, cfg.shift_max_px);
    const double ty = rng.uniform(-cfg.shift_max_px, cfg.shift_max_px);
    const double px = rng.uniform(-cfg.perspective_max, cfg.perspective_max);
    const double py = rng.uniform(-cfg.perspective_max, cfg.perspective_max);

    Homography affine;
    affine.h[0] = scale * std::cos(theta);
    affine.h[1] = -scale * std::sin(theta);
    affine.h[3] = scale * std::sin(theta);
    affine.h[4] = scale * std::cos(theta);
    Homography persp;
    persp.h[6] = px;
    persp.h[7] = py;

    const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
    return translation(cx + tx, cy + ty) * persp * affine * translation(-cx, -cy);
}

TrainSample augment(const TrainSample& s, const AugmentConfig& cfg,
                    std::uint64_t seed, int border) {
    TrainSample out = s;

    if (cfg.warp) {
        const Homography H = augment_homography(s.image.width, s.image.height, cfg, seed);
        const Homography Hinv = H.inverse();
        const int w = s.image.width, h = s.image.height;
        Plane<float> img(w, h, 0.0f);
        Plane<std::uint8_t> valid(w, h, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Vec2 src = warp_homography({double(x), double(y)}, Hinv);
                if (src.x < 0.0 || src.x > w - 1 || src.y < 0.0 || src.y > h - 1)
                    continue;
                img.at(x, y) = bilinear(s.image, src.x, src.y);
                const int nx = static_cast<int>(std::lround(src.x));
                const int ny = static_cast<int>(std::lround(src.y));
                valid.at(x, y) = s.valid.at(std::clamp(nx, 0, w - 1),
                                            std::clamp(ny, 0, h - 1));
            }
        Plane<std::uint8_t> labels(w, h, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!s.labels.at(x, y)) continue;
                const Vec2 dst = warp_homography({double(x), double(y)}, H);
                const int qx = static_cast<int>(std::lround(dst.x));
                const int qy = static_cast<int>(std::lround(dst.y));
                if (qx < border || qx >= w - border || qy < border || qy >= h - border)
                    continue;
                labels.at(qx, qy) = 1;
            }
        out.image = std::move(img);
        out.valid = std::move(valid);
        out.labels = std::move(labels);
    }

    Rng rng = Rng::derive(seed, "augment-photo");
    if (cfg.blur) {
        const double sigma = rng.uniform(0.0, cfg.blur_sigma_max);
        if (sigma >= 0.3) gaussian_blur(out.image, sigma);
    }
    if (cfg.contrast) {
        const double k = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
        for (auto& v : out.image.data)
            v = static_cast<float>(0.5 + (v - 0.5) * k);
    }
    if (cfg.brightness) {
        const double b = rng.uniform(-cfg.brightness_max, cfg.brightness_max);
        for (auto& v : out.image.data) v = static_cast<float>(v + b);
    }
    if (cfg.noise) {
        const double sigma = rng.uniform(0.0, cfg.noise_sigma_max);
        if (sigma > 0.0)
            for (auto& v : out.image.data)
                v = static_cast<float>(v + rng.normal(0.0, sigma));
    }
    if (cfg.blur || cfg.contrast || cfg.brightness || cfg.noise)
        for (auto& v : out.image.data) v = std::clamp(v, 0.0f, 1.0f);

    return out;
}

}  // namespace sedm::nn
