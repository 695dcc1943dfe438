#pragma once

#include <cstdint>

#include "sedm/camgeom.hpp"
#include "sedm/plane.hpp"

namespace sedm::nn {

/// One training sample: the rendered image, the pseudo-ground-truth keypoint
/// mask (y in the loss), and the per-pixel validity mask telling which pixels
/// carry repeatability data and so participate in the loss.
struct TrainSample {
    Plane<float> image;
    Plane<std::uint8_t> labels;
    Plane<std::uint8_t> valid;
};

struct AugmentConfig {
    bool blur = true;
    double blur_sigma_max = 1.2;
    bool noise = true;
    double noise_sigma_max = 0.03;
    bool brightness = true;
    double brightness_max = 0.15;
    bool contrast = true;
    double contrast_lo = 0.75, contrast_hi = 1.25;
    bool warp = true;
    double rot_max_deg = 12.0;
    double scale_lo = 0.9, scale_hi = 1.1;
    double shift_max_px = 5.0;
    double perspective_max = 6e-4;  // projective row magnitude

    /// Everything disabled; augment() then returns the sample unchanged.
    static AugmentConfig identity() {
        AugmentConfig c;
        c.blur = c.noise = c.brightness = c.contrast = c.warp = false;
        return c;
    }
};

/// Seeded augmentation. Photometric ops touch only the image; the geometric
/// warp moves image, labels and valid mask under the same homography.
/// Warped keypoints falling outside the frame or inside the border margin
/// are dropped.
TrainSample augment(const TrainSample& s, const AugmentConfig& cfg,
                    std::uint64_t seed, int border = 4);

/// The homography an augmentation seed would apply (identity when warping is
/// disabled). Exposed so tests can verify image/mask consistency.
Homography augment_homography(int width, int height, const AugmentConfig& cfg,
                              std::uint64_t seed);

}  // namespace sedm::nn
