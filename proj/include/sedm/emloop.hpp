#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sedm/camgeom.hpp"
#include "sedm/config.hpp"
#include "sedm/maximizer.hpp"
#include "sedm/nn/adam.hpp"
#include "sedm/nn/net.hpp"
#include "sedm/nn/train.hpp"
#include "sedm/voxelgrid.hpp"

namespace sedm {

// The outer loop: per scene, (1) run the detector on every view, (2)
// accumulate the heatmaps into a fresh voxel grid, (3) project soft
// repeatability back into each view, (4) build per-view pseudo ground truth
// under the annealed budget, then (5) train the detector on all (image,
// mask) pairs, warm-started from the current weights, and (6) repeat.

struct EmConfig {
    std::vector<std::string> scene_dirs;
    double grid_extent = 0.005;
    int min_views = 3;
    MaximizerConfig maximizer;            // top_l is overridden per iteration
    std::vector<int> l_schedule = {107, 91, 64};
    int l_period = 3;
    nn::TrainConfig train;
    int n_iterations = 3;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool warm_start = true;
    int threads = 1;
    int eval_pairs_per_scene = 12;
    double eval_eps_px = 3.0;
    double eval_threshold = 0.025;
    double eval_r_nms = 3.0;

    void validate() const;
};

EmConfig em_config_from_kv(const KvConfig& kv);
KvConfig kv_from_em_config(const EmConfig& cfg);  // resolved-config dump

struct IterationMetrics {
    int iteration = 0;
    int l_budget = 0;
    double mean_pgt_repeatability = 0.0;
    double mean_pgt_count = 0.0;
    double final_train_loss = 0.0;
    double eval_repeatability_3px = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const IterationMetrics& m);
std::vector<IterationMetrics> parse_metrics_csv(const std::string& path);

struct EmState {
    int iteration = 0;
    nn::DetectorParams<float> params;
    nn::AdamState adam;
    std::vector<IterationMetrics> metrics;
};

struct SceneData {
    std::vector<CameraView> views;
    GridSpec grid;
};

std::vector<SceneData> load_scenes(const EmConfig& cfg);

EmState em_init(const EmConfig& cfg);

/// Expectation step for one scene: accumulate the heatmaps and render the
/// per-view repeatability maps. Exposed separately so the stages can be
/// driven and tested with synthetic heatmaps.
std::vector<RepeatabilityMap> em_expectation(const SceneData& scene,
                                             const std::vector<Plane<float>>& heatmaps,
                                             int min_views);

std::vector<Plane<float>> infer_heatmaps(const nn::DetectorParams<float>& params,
                                         const std::vector<CameraView>& views,
                                         int threads);

/// One full EM iteration over all scenes. Appends a metrics row and
/// increments the iteration counter. Failures carry a stage tag.
void em_iteration(EmState& state, const EmConfig& cfg,
                  const std::vector<SceneData>& scenes);

/// init + n_iterations of em_iteration; writes iter_%03d.ckpt and
/// metrics.csv under out_dir after every iteration (atomically). With
/// resume=true, continues from the latest checkpoint in out_dir.
EmState em_run(const EmConfig& cfg, bool resume = false);

}  // namespace sedm
