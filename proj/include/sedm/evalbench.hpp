#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sedm/camgeom.hpp"
#include "sedm/maximizer.hpp"
#include "sedm/nn/net.hpp"
#include "sedm/rng.hpp"

namespace sedm {

struct KeypointSet {
    std::vector<Keypoint> points;
    double threshold = 0.025;
    double r_nms = 3.0;
};

/// Test-time extraction: forward -> threshold -> greedy NMS -> cellwise
/// suppression -> border removal. Same greedy machinery as the maximizer,
/// with an unlimited keypoint budget.
KeypointSet extract(const nn::DetectorParams<float>& params,
                    const Plane<float>& image, double threshold = 0.025,
                    double r_nms = 3.0, int cell = 8, int border = 4);
/// Extraction from a precomputed heatmap (unit-testable core of extract).
KeypointSet extract_from_heatmap(const Plane<float>& heatmap,
                                 double threshold = 0.025, double r_nms = 3.0,
                                 int cell = 8, int border = 4);

/// Uniform-random keypoints (baseline), outside the border margin.
KeypointSet random_keypoints(int count, int width, int height, int border,
                             Rng& rng);

/// Multi-view repeatability: a keypoint of A counts as repeated iff its
/// GT-depth backprojection reprojects into B within eps_px of some keypoint
/// of B; visibility in B additionally requires |depth_B - z| <= vis_tol_m
/// (occlusion check). Returns the symmetric mean of both directions, in
/// [0,1].
double repeatability_score(const KeypointSet& kps_a, const KeypointSet& kps_b,
                           const CameraView& view_a, const CameraView& view_b,
                           double eps_px, double vis_tol_m = 0.01);

/// Mean-subtracted, L2-normalized raw patch. Constant patches map to the
/// zero vector and are skipped during matching. The keypoint must be at
/// least patch/2 pixels from the border.
std::vector<float> patch_descriptor(const Plane<float>& image, int x, int y,
                                    int patch = 13);

struct MmaPair {
    Plane<float> image_a, image_b;
    Homography h_ab;  // ground truth, pixels of A -> pixels of B
};

struct MatchResult {
    std::vector<std::pair<int, int>> matches;  // indices into A and B sets
    std::vector<double> accuracy;              // per threshold 1..max
    int zero_match_pairs = 0;
};

/// Mutual-nearest-neighbor descriptor matching over the pair list; a match
/// is correct at threshold t iff |warp(p_a, H) - p_b| <= t. Accuracies are
/// per-pair means; a pair with zero matches contributes 0.
MatchResult mma(const nn::DetectorParams<float>& params,
                const std::vector<MmaPair>& pairs, int max_threshold = 10,
                double threshold = 0.025, double r_nms = 3.0);
/// Same protocol with externally supplied keypoints (used by baselines).
MatchResult mma_with_keypoints(const std::vector<MmaPair>& pairs,
                               const std::vector<KeypointSet>& kps_a,
                               const std::vector<KeypointSet>& kps_b,
                               int max_threshold = 10);

/// GT-depth 3D localization error: for every repeated keypoint pair (same
/// pairing rule as repeatability_score) the distance between the two
/// backprojected points, averaged over all view pairs. Returns mean meters
/// (0 when nothing matches).
double localization_error_3d(const std::vector<KeypointSet>& keypoints,
                             const std::vector<CameraView>& views, double eps_px,
                             double vis_tol_m = 0.01);

struct EvalReport {
    std::vector<double> mma_illum;       // thresholds 1..10
    std::vector<double> mma_homography;  // thresholds 1..10
    double repeatability_3px = 0.0;
    double loc3d_m = 0.0;
};

/// Writes mma.csv, repeatability.csv and loc3d.csv plus per-image heatmap
/// PGM dumps under out_dir. File contents are deterministic.
void write_report(const EvalReport& report, const std::string& out_dir,
                  const std::vector<Plane<float>>& heatmaps);

}  // namespace sedm
