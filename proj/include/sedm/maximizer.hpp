#pragma once

#include <cstdint>
#include <vector>

#include "sedm/voxelgrid.hpp"

namespace sedm {

/// Constraints of the maximization step. The top-L cap realizes the paper's
/// keypoint budget; r_nms is the pairwise Euclidean exclusion radius; at most
/// one keypoint is kept per cell x cell block and none inside the border.
struct MaximizerConfig {
    int top_l = 107;
    double r_nms = 6.0;
    int cell = 8;
    int border = 4;
    bool edge_filter_on = true;
    double score_floor = 0.0;

    void validate() const;
};

struct Keypoint {
    int x = 0, y = 0;
    double score = 0.0;
};

/// Harris structure-tensor test on the repeatability surface (sigma=1.5
/// Gaussian window, k=0.06). Marked true (= excluded) are edge-dominated
/// pixels (response < -1e-12) and all masked-invalid pixels; responses with
/// |R| < 1e-12 count as non-edge.
Plane<std::uint8_t> edge_mask(const RepeatabilityMap& rep, double sigma = 1.5,
                              double harris_k = 0.06);

/// Greedy descending-score selection under the config constraints. A
/// candidate must be valid (per rep.mask), score >= score_floor, not
/// excluded, outside the border, strictly farther than r_nms from every
/// accepted point, and in a cell with no accepted point. Ties in score break
/// by row-major pixel order. Stops after top_l accepted.
std::vector<Keypoint> nms_select(const RepeatabilityMap& rep,
                                 const Plane<std::uint8_t>& excluded,
                                 const MaximizerConfig& cfg);

/// Full maximization step for one view: edge filtering (when enabled)
/// followed by constrained greedy selection, rasterized to a binary mask.
Plane<std::uint8_t> build_pseudo_gt(const RepeatabilityMap& rep,
                                    const MaximizerConfig& cfg);
std::vector<Keypoint> build_pseudo_gt_keypoints(const RepeatabilityMap& rep,
                                                const MaximizerConfig& cfg);

/// Keypoint budget annealing: schedule[min(floor(iteration/period), len-1)].
int anneal_l(int em_iteration, const std::vector<int>& schedule, int period);

}  // namespace sedm
