#include "sedm/emloop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sedm/dataset.hpp"
#include "sedm/evalbench.hpp"
#include "sedm/log.hpp"
#include "sedm/nn/checkpoint.hpp"
#include "sedm/parallel.hpp"
#include "sedm/rng.hpp"

namespace fs = std::filesystem;

namespace sedm {

void EmConfig::validate() const {
    if (n_iterations < 1)
        throw std::invalid_argument("EmConfig: n_iterations must be >= 1");
    if (scene_dirs.empty())
        throw std::invalid_argument("EmConfig: no scene directories");
    for (const auto& d : scene_dirs)
        if (!fs::exists(fs::path(d) / "poses.txt"))
            throw std::invalid_argument("EmConfig: missing dataset at " + d);
    if (out_dir.empty()) throw std::invalid_argument("EmConfig: out_dir not set");
    if (l_schedule.empty()) throw std::invalid_argument("EmConfig: empty L schedule");
    if (l_period < 1) throw std::invalid_argument("EmConfig: l_period must be >= 1");
    if (min_views < 1) throw std::invalid_argument("EmConfig: min_views must be >= 1");
    if (!(grid_extent > 0.0))
        throw std::invalid_argument("EmConfig: grid_extent must be > 0");
}

EmConfig em_config_from_kv(const KvConfig& kv) {
    EmConfig cfg;
    cfg.scene_dirs = kv.get_str_list("data.scenes");
    cfg.grid_extent = kv.get_double("grid.extent", cfg.grid_extent);
    cfg.min_views = kv.get_int("grid.min_views", cfg.min_views);
    cfg.maximizer.r_nms = kv.get_double("maximizer.r_nms", cfg.maximizer.r_nms);
    cfg.maximizer.cell = kv.get_int("maximizer.cell", cfg.maximizer.cell);
    cfg.maximizer.border = kv.get_int("maximizer.border", cfg.maximizer.border);
    cfg.maximizer.edge_filter_on =
        kv.get_bool("maximizer.edge_filter", cfg.maximizer.edge_filter_on);
    cfg.maximizer.score_floor =
        kv.get_double("maximizer.score_floor", cfg.maximizer.score_floor);
    cfg.l_schedule = kv.get_int_list("maximizer.l_schedule", cfg.l_schedule);
    cfg.l_period = kv.get_int("maximizer.l_period", cfg.l_period);
    cfg.train.epochs = kv.get_int("train.epochs", cfg.train.epochs);
    cfg.train.batch_size = kv.get_int("train.batch", cfg.train.batch_size);
    cfg.train.adam.lr = kv.get_double("train.lr", cfg.train.adam.lr);
    cfg.train.log_epochs = kv.get_bool("train.log_epochs", cfg.train.log_epochs);
    if (!kv.get_bool("train.augment", true))
        cfg.train.aug = nn::AugmentConfig::identity();
    cfg.n_iterations = kv.get_int("em.iterations", cfg.n_iterations);
    cfg.seed = static_cast<std::uint64_t>(kv.get_i64("em.seed", 0));
    cfg.out_dir = kv.get_str("em.out", cfg.out_dir);
    cfg.warm_start = kv.get_bool("em.warm_start", cfg.warm_start);
    cfg.threads = kv.get_int("em.threads", cfg.threads);
    cfg.eval_pairs_per_scene =
        kv.get_int("eval.pairs_per_scene", cfg.eval_pairs_per_scene);
    cfg.eval_eps_px = kv.get_double("eval.eps_px", cfg.eval_eps_px);
    cfg.eval_threshold = kv.get_double("eval.threshold", cfg.eval_threshold);
    cfg.eval_r_nms = kv.get_double("eval.r_nms", cfg.eval_r_nms);
    cfg.train.threads = cfg.threads;
    cfg.train.seed = cfg.seed;  // per-iteration derivation happens in em_iteration
    return cfg;
}

KvConfig kv_from_em_config(const EmConfig& cfg) {
    KvConfig kv;
    std::string scenes;
    for (std::size_t i = 0; i < cfg.scene_dirs.size(); ++i) {
        if (i) scenes += ",";
        scenes += cfg.scene_dirs[i];
    }
    char buf[64];
    kv.set("data.scenes", scenes);
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.grid_extent);
    kv.set("grid.extent", buf);
    kv.set("grid.min_views", std::to_string(cfg.min_views));
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.maximizer.r_nms);
    kv.set("maximizer.r_nms", buf);
    kv.set("maximizer.cell", std::to_string(cfg.maximizer.cell));
    kv.set("maximizer.border", std::to_string(cfg.maximizer.border));
    kv.set("maximizer.edge_filter", cfg.maximizer.edge_filter_on ? "true" : "false");
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.maximizer.score_floor);
    kv.set("maximizer.score_floor", buf);
    std::string sched;
    for (std::size_t i = 0; i < cfg.l_schedule.size(); ++i) {
        if (i) sched += ",";
        sched += std::to_string(cfg.l_schedule[i]);
    }
    kv.set("maximizer.l_schedule", sched);
    kv.set("maximizer.l_period", std::to_string(cfg.l_period));
    kv.set("train.epochs", std::to_string(cfg.train.epochs));
    kv.set("train.batch", std::to_string(cfg.train.batch_size));
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.train.adam.lr);
    kv.set("train.lr", buf);
    kv.set("train.augment", cfg.train.aug.warp || cfg.train.aug.blur ? "true" : "false");
    kv.set("em.iterations", std::to_string(cfg.n_iterations));
    kv.set("em.seed", std::to_string(cfg.seed));
    kv.set("em.out", cfg.out_dir);
    kv.set("em.warm_start", cfg.warm_start ? "true" : "false");
    kv.set("em.threads", std::to_string(cfg.threads));
    kv.set("eval.pairs_per_scene", std::to_string(cfg.eval_pairs_per_scene));
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.eval_eps_px);
    kv.set("eval.eps_px", buf);
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.eval_threshold);
    kv.set("eval.threshold", buf);
    std::snprintf(buf, sizeof(buf), "%.9g", cfg.eval_r_nms);
    kv.set("eval.r_nms", buf);
    return kv;
}

std::string metrics_csv_header() {
    return "iteration,L,mean_pgt_repeatability,mean_pgt_count,final_train_loss,"
           "eval_repeatability_3px";
}

std::string metrics_csv_row(const IterationMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g,%.10g,%.10g", m.iteration,
                  m.l_budget, m.mean_pgt_repeatability, m.mean_pgt_count,
                  m.final_train_loss, m.eval_repeatability_3px);
    return buf;
}

std::vector<IterationMetrics> parse_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("metrics: cannot open " + path);
    std::vector<IterationMetrics> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        IterationMetrics m;
        std::istringstream ls(line);
        char comma;
        if (!(ls >> m.iteration >> comma >> m.l_budget >> comma >>
              m.mean_pgt_repeatability >> comma >> m.mean_pgt_count >> comma >>
              m.final_train_loss >> comma >> m.eval_repeatability_3px))
            throw std::runtime_error("metrics: malformed row: " + line);
        rows.push_back(m);
    }
    return rows;
}

std::vector<SceneData> load_scenes(const EmConfig& cfg) {
    std::vector<SceneData> scenes;
    for (const auto& dir : cfg.scene_dirs) {
        SceneData sd;
        sd.views = load_dataset(dir);
        Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
        if (dataset_has_scene(dir)) {
            load_dataset_scene(dir).bounds(lo, hi);
        } else {
            // bound the observed surface from the depth maps
            for (const auto& v : sd.views)
                for (int y = 0; y < v.depth.height; y += 2)
                    for (int x = 0; x < v.depth.width; x += 2) {
                        const float d = v.depth.at(x, y);
                        if (d <= 0.0f) continue;
                        const Vec3 p = backproject({double(x), double(y)}, d, v);
                        lo.x = std::min(lo.x, p.x);
                        lo.y = std::min(lo.y, p.y);
                        lo.z = std::min(lo.z, p.z);
                        hi.x = std::max(hi.x, p.x);
                        hi.y = std::max(hi.y, p.y);
                        hi.z = std::max(hi.z, p.z);
                    }
        }
        if (!(lo.x <= hi.x))
            throw std::runtime_error("load_scenes: no surface geometry in " + dir);
        sd.grid = grid_for_bounds(lo, hi, cfg.grid_extent, 0.05);
        scenes.push_back(std::move(sd));
    }
    return scenes;
}

EmState em_init(const EmConfig& cfg) {
    cfg.validate();
    EmState state;
    state.params = nn::DetectorParams<float>::he_init(mix64(cfg.seed ^ hash_tag("em-init")));
    state.adam = nn::AdamState::zeros(nn::learnable_size(state.params));
    state.iteration = 0;
    return state;
}

std::vector<Plane<float>> infer_heatmaps(const nn::DetectorParams<float>& params,
                                         const std::vector<CameraView>& views,
                                         int threads) {
    std::vector<Plane<float>> heatmaps(views.size());
    parallel_for(views.size(), threads, [&](std::size_t i) {
        heatmaps[i] = nn::forward(params, views[i].image);
    });
    return heatmaps;
}

std::vector<RepeatabilityMap> em_expectation(const SceneData& scene,
                                             const std::vector<Plane<float>>& heatmaps,
                                             int min_views) {
    const VoxelGrid grid = accumulate(scene.views, heatmaps, scene.grid);
    std::vector<RepeatabilityMap> maps(scene.views.size());
    for (std::size_t i = 0; i < scene.views.size(); ++i)
        maps[i] = render_repeatability(grid, scene.views[i], min_views);
    return maps;
}

namespace {

double eval_multiview_repeatability(const nn::DetectorParams<float>& params,
                                    const std::vector<SceneData>& scenes,
                                    const EmConfig& cfg, int iteration) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const auto& views = scenes[si].views;
        if (views.size() < 2) continue;
        Rng rng = Rng::derive(cfg.seed, "eval-pairs", iteration, si);
        std::vector<KeypointSet> cache(views.size());
        std::vector<bool> cached(views.size(), false);
        auto keypoints = [&](std::size_t v) -> const KeypointSet& {
            if (!cached[v]) {
                cache[v] = extract(params, views[v].image, cfg.eval_threshold,
                                   cfg.eval_r_nms, cfg.maximizer.cell,
                                   cfg.maximizer.border);
                cached[v] = true;
            }
            return cache[v];
        };
        for (int k = 0; k < cfg.eval_pairs_per_scene; ++k) {
            const std::size_t a = rng.uniform_int(views.size());
            std::size_t b = rng.uniform_int(views.size() - 1);
            if (b >= a) ++b;
            sum += repeatability_score(keypoints(a), keypoints(b), views[a], views[b],
                                       cfg.eval_eps_px, 2.0 * cfg.grid_extent);
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / count;
}

[[noreturn]] void stage_fail(const char* stage, const std::exception& e) {
    throw std::runtime_error(std::string("em_iteration[stage=") + stage +
                             "]: " + e.what());
}

}  // namespace

void em_iteration(EmState& state, const EmConfig& cfg,
                  const std::vector<SceneData>& scenes) {
    const int l_budget = anneal_l(state.iteration, cfg.l_schedule, cfg.l_period);
    MaximizerConfig mx = cfg.maximizer;
    mx.top_l = l_budget;

    std::vector<nn::TrainSample> samples;
    double pgt_score_sum = 0.0;
    std::size_t pgt_count = 0, view_count = 0;

    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const auto& scene = scenes[si];
        std::vector<Plane<float>> heatmaps;
        try {
            heatmaps = infer_heatmaps(state.params, scene.views, cfg.threads);
        } catch (const std::exception& e) {
            stage_fail("inference", e);
        }
        std::vector<RepeatabilityMap> reps;
        try {
            reps = em_expectation(scene, heatmaps, cfg.min_views);
        } catch (const std::exception& e) {
            stage_fail("expectation", e);
        }
        try {
            for (std::size_t vi = 0; vi < scene.views.size(); ++vi) {
                const auto kps = build_pseudo_gt_keypoints(reps[vi], mx);
                nn::TrainSample sample;
                sample.image = scene.views[vi].image;
                sample.labels =
                    Plane<std::uint8_t>(sample.image.width, sample.image.height, 0);
                for (const auto& kp : kps) {
                    sample.labels.at(kp.x, kp.y) = 1;
                    pgt_score_sum += kp.score;
                }
                pgt_count += kps.size();
                ++view_count;
                sample.valid = reps[vi].mask;
                samples.push_back(std::move(sample));
            }
        } catch (const std::exception& e) {
            stage_fail("maximization", e);
        }
    }

    IterationMetrics m;
    m.iteration = state.iteration;
    m.l_budget = l_budget;
    m.mean_pgt_repeatability =
        pgt_count == 0 ? 0.0 : pgt_score_sum / static_cast<double>(pgt_count);
    m.mean_pgt_count =
        view_count == 0 ? 0.0 : static_cast<double>(pgt_count) / view_count;

    if (!cfg.warm_start) {
        state.params = nn::DetectorParams<float>::he_init(
            mix64(cfg.seed ^ hash_tag("em-init")) + state.iteration);
        state.adam = nn::AdamState::zeros(nn::learnable_size(state.params));
    }

    try {
        nn::TrainConfig tc = cfg.train;
        tc.border = cfg.maximizer.border;
        tc.seed = mix64(cfg.seed ^ hash_tag("em-train")) + state.iteration;
        tc.threads = cfg.threads;
        const auto result = nn::train(samples, state.params, state.adam, tc);
        m.final_train_loss = result.epoch_loss.back();
    } catch (const std::exception& e) {
        stage_fail("training", e);
    }

    try {
        m.eval_repeatability_3px =
            eval_multiview_repeatability(state.params, scenes, cfg, state.iteration);
    } catch (const std::exception& e) {
        stage_fail("evaluation", e);
    }

    state.metrics.push_back(m);
    state.iteration += 1;
    log_info({{"event", "em_iteration_done"},
              {"iteration", std::to_string(m.iteration)},
              {"L", std::to_string(m.l_budget)},
              {"mean_pgt_rep", std::to_string(m.mean_pgt_repeatability)},
              {"mean_pgt_count", std::to_string(m.mean_pgt_count)},
              {"train_loss", std::to_string(m.final_train_loss)},
              {"eval_rep_3px", std::to_string(m.eval_repeatability_3px)}});
}

namespace {

std::string ckpt_path(const std::string& out_dir, int iteration) {
    char name[32];
    std::snprintf(name, sizeof(name), "iter_%03d.ckpt", iteration);
    return (fs::path(out_dir) / name).string();
}

void write_metrics(const std::string& out_dir, const std::vector<IterationMetrics>& rows) {
    const std::string path = (fs::path(out_dir) / "metrics.csv").string();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        os << metrics_csv_header() << "\n";
        for (const auto& m : rows) os << metrics_csv_row(m) << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("metrics: rename failed for " + path);
}

}  // namespace

EmState em_run(const EmConfig& cfg, bool resume) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const std::vector<SceneData> scenes = load_scenes(cfg);

    EmState state;
    if (resume) {
        int last = -1;
        for (int i = 0; i < cfg.n_iterations; ++i)
            if (fs::exists(ckpt_path(cfg.out_dir, i))) last = i;
        if (last >= 0) {
            state.params = nn::DetectorParams<float>::zeros();
            nn::load_checkpoint(ckpt_path(cfg.out_dir, last), state.params, state.adam);
            state.metrics = parse_metrics_csv(
                (fs::path(cfg.out_dir) / "metrics.csv").string());
            if (static_cast<int>(state.metrics.size()) < last + 1)
                throw std::runtime_error("em_run: metrics.csv behind checkpoints");
            state.metrics.resize(last + 1);
            state.iteration = last + 1;
            log_info({{"event", "em_resume"},
                      {"from_iteration", std::to_string(last + 1)}});
        } else {
            state = em_init(cfg);
        }
    } else {
        state = em_init(cfg);
    }

    while (state.iteration < cfg.n_iterations) {
        em_iteration(state, cfg, scenes);
        nn::save_checkpoint(ckpt_path(cfg.out_dir, state.iteration - 1), state.params,
                            state.adam);
        write_metrics(cfg.out_dir, state.metrics);
    }
    return state;
}

}  // namespace sedm
