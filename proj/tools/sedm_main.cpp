// sedm: dataset synthesis, EM training, evaluation and artifact inspection.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sedm/dataset.hpp"
#include "sedm/emloop.hpp"
#include "sedm/evalbench.hpp"
#include "sedm/kernels/kernels.hpp"
#include "sedm/log.hpp"
#include "sedm/nn/checkpoint.hpp"
#include "sedm/parallel.hpp"
#include "sedm/raster.hpp"
#include "sedm/rng.hpp"

namespace fs = std::filesystem;
using namespace sedm;

namespace {

void print_resolved(const KvConfig& kv) {
    std::fprintf(stderr, "INFO resolved configuration:\n%s", kv.serialize().c_str());
}

std::string scene_dir_name(const std::string& out, int i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d", i);
    return (fs::path(out) / name).string();
}

int cmd_gen(std::uint64_t seed, const std::string& out, int n_scenes, int n_views,
            int size, const std::string& complexity, double coverage_extent,
            int threads) {
    KvConfig kv;
    kv.set("gen.seed", std::to_string(seed));
    kv.set("gen.out", out);
    kv.set("gen.scenes", std::to_string(n_scenes));
    kv.set("gen.views", std::to_string(n_views));
    kv.set("gen.size", std::to_string(size));
    kv.set("gen.complexity", complexity);
    kv.set("gen.coverage_extent", std::to_string(coverage_extent));
    print_resolved(kv);

    const SceneComplexity cx = complexity == "medium" ? SceneComplexity::Medium
                                                      : SceneComplexity::Small;
    for (int i = 0; i < n_scenes; ++i) {
        const std::uint64_t scene_seed = mix64(mix64(seed ^ hash_tag("gen-scene")) + i);
        const Scene scene = generate_scene(scene_seed, cx);
        TrajectoryParams tp;
        tp.width = tp.height = size;
        tp.grid_extent = coverage_extent;
        const std::uint64_t traj_seed = mix64(mix64(seed ^ hash_tag("gen-traj")) + i);
        const Trajectory traj = generate_trajectory(scene, n_views, traj_seed, tp);

        std::vector<CameraView> views(traj.views.size());
        parallel_for(traj.views.size(), threads, [&](std::size_t v) {
            views[v] = render(scene, traj.views[v].first, traj.views[v].second,
                              traj.lighting[v]);
        });
        save_dataset(scene_dir_name(out, i), views, &traj.lighting, &scene);
        log_info({{"event", "scene_written"},
                  {"dir", scene_dir_name(out, i)},
                  {"views", std::to_string(views.size())},
                  {"triangles", std::to_string(scene.triangles.size())}});
    }
    return 0;
}

EmConfig build_em_config(const std::string& config_path, long long seed_override,
                         const std::string& out_override, int iters_override,
                         int threads) {
    KvConfig kv;
    if (!config_path.empty()) kv = KvConfig::parse_file(config_path);
    if (seed_override >= 0) kv.set("em.seed", std::to_string(seed_override));
    if (!out_override.empty()) kv.set("em.out", out_override);
    if (iters_override > 0) kv.set("em.iterations", std::to_string(iters_override));
    if (threads > 0) kv.set("em.threads", std::to_string(threads));
    EmConfig cfg = em_config_from_kv(kv);
    print_resolved(kv_from_em_config(cfg));
    return cfg;
}

int cmd_train(const std::string& config_path, long long seed, const std::string& out,
              int iters, bool resume, int threads) {
    const EmConfig cfg = build_em_config(config_path, seed, out, iters, threads);
    log_info({{"event", "train_start"},
              {"kernel_backend",
               kernels::backend_name(kernels::active_backend())}});
    const EmState state = em_run(cfg, resume);
    log_info({{"event", "train_done"},
              {"iterations", std::to_string(state.iteration)},
              {"out", cfg.out_dir}});
    return 0;
}

// same-pose pairs under two lighting configurations (H = identity)
std::vector<MmaPair> illumination_pairs(const Scene& scene,
                                        const std::vector<CameraView>& views,
                                        int count, Rng& rng) {
    std::vector<MmaPair> pairs;
    for (int k = 0; k < count; ++k) {
        const auto& v = views[rng.uniform_int(views.size())];
        const int la = static_cast<int>(rng.uniform_int(scene.lighting_configs));
        int lb = static_cast<int>(rng.uniform_int(scene.lighting_configs - 1));
        if (lb >= la) ++lb;
        MmaPair p;
        p.image_a = render(scene, v.intrinsics, v.pose, la).image;
        p.image_b = render(scene, v.intrinsics, v.pose, lb).image;
        p.h_ab = Homography::identity();
        pairs.push_back(std::move(p));
    }
    return pairs;
}

// pure-rotation pairs; the ground-truth homography is K * R_delta * K^-1
std::vector<MmaPair> rotation_pairs(const Scene& scene,
                                    const std::vector<CameraView>& views,
                                    const std::vector<int>& lighting, int count,
                                    double angle_deg, Rng& rng) {
    std::vector<MmaPair> pairs;
    for (int k = 0; k < count; ++k) {
        const std::size_t vi = rng.uniform_int(views.size());
        const CameraView& v = views[vi];
        const double ang = (rng.uniform() < 0.5 ? -1.0 : 1.0) * angle_deg * M_PI / 180.0;
        const Mat3 r_delta = axis_angle({0, 1, 0}, ang);  // pan about camera y
        Pose pose_b;
        pose_b.rotation = r_delta * v.pose.rotation;
        pose_b.translation = r_delta * v.pose.translation;
        const int light = lighting.empty() ? 0 : lighting[vi];

        MmaPair p;
        p.image_a = v.image;
        p.image_b = render(scene, v.intrinsics, pose_b, light).image;
        const auto& K = v.intrinsics;
        Homography km, ki;
        km.h[0] = K.fx; km.h[2] = K.cx; km.h[4] = K.fy; km.h[5] = K.cy;
        km.h[1] = km.h[3] = km.h[6] = km.h[7] = 0; km.h[8] = 1;
        ki = km.inverse();
        Homography rd;
        for (int i = 0; i < 9; ++i) rd.h[i] = r_delta.m[i];
        p.h_ab = km * rd * ki;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& scene_dirs,
             const std::string& out, long long seed_in, int pairs_per_scene,
             int threads) {
    const std::uint64_t seed = seed_in < 0 ? 0 : static_cast<std::uint64_t>(seed_in);
    KvConfig kv;
    kv.set("eval.checkpoint", checkpoint);
    kv.set("eval.out", out);
    kv.set("eval.seed", std::to_string(seed));
    kv.set("eval.pairs_per_scene", std::to_string(pairs_per_scene));
    print_resolved(kv);

    nn::DetectorParams<float> params = nn::DetectorParams<float>::zeros();
    nn::AdamState adam;
    nn::load_checkpoint(checkpoint, params, adam);

    EvalReport report;
    std::vector<MmaPair> illum, homog;
    double rep_sum = 0.0;
    int rep_count = 0;
    double loc_sum = 0.0;
    int loc_count = 0;
    std::vector<Plane<float>> heat_dumps;

    for (std::size_t si = 0; si < scene_dirs.size(); ++si) {
        const auto& dir = scene_dirs[si];
        const auto views = load_dataset(dir);
        Rng rng = Rng::derive(seed, "eval", si);

        // multi-view repeatability + 3D localization on the stored views
        std::vector<KeypointSet> kps(views.size());
        parallel_for(views.size(), threads, [&](std::size_t i) {
            kps[i] = extract(params, views[i].image);
        });
        for (int k = 0; k < pairs_per_scene; ++k) {
            const std::size_t a = rng.uniform_int(views.size());
            std::size_t b = rng.uniform_int(views.size() - 1);
            if (b >= a) ++b;
            rep_sum += repeatability_score(kps[a], kps[b], views[a], views[b], 3.0);
            ++rep_count;
        }
        loc_sum += localization_error_3d(kps, views, 3.0);
        ++loc_count;

        if (dataset_has_scene(dir)) {
            const Scene scene = load_dataset_scene(dir);
            const auto lighting = load_lighting(dir);
            auto il = illumination_pairs(scene, views, pairs_per_scene, rng);
            illum.insert(illum.end(), std::make_move_iterator(il.begin()),
                         std::make_move_iterator(il.end()));
            auto hp = rotation_pairs(scene, views, lighting, pairs_per_scene, 10.0, rng);
            homog.insert(homog.end(), std::make_move_iterator(hp.begin()),
                         std::make_move_iterator(hp.end()));
        }
        if (si == 0 && !views.empty())
            heat_dumps.push_back(nn::forward(params, views[0].image));
    }

    report.repeatability_3px = rep_count ? rep_sum / rep_count : 0.0;
    report.loc3d_m = loc_count ? loc_sum / loc_count : 0.0;
    if (!illum.empty()) report.mma_illum = mma(params, illum).accuracy;
    if (!homog.empty()) report.mma_homography = mma(params, homog).accuracy;
    write_report(report, out, heat_dumps);

    log_info({{"event", "eval_done"},
              {"repeatability_3px", std::to_string(report.repeatability_3px)},
              {"mma_illum_1px",
               report.mma_illum.empty() ? "n/a" : std::to_string(report.mma_illum[0])},
              {"loc3d_m", std::to_string(report.loc3d_m)},
              {"out", out}});
    return 0;
}

int cmd_inspect(const std::string& checkpoint, const std::string& scene_dir,
                const std::string& out, double grid_extent, int min_views, int l_budget,
                int threads) {
    KvConfig kv;
    kv.set("inspect.checkpoint", checkpoint);
    kv.set("inspect.scene", scene_dir);
    kv.set("inspect.out", out);
    kv.set("inspect.grid_extent", std::to_string(grid_extent));
    kv.set("inspect.min_views", std::to_string(min_views));
    kv.set("inspect.L", std::to_string(l_budget));
    print_resolved(kv);

    nn::DetectorParams<float> params = nn::DetectorParams<float>::zeros();
    nn::AdamState adam;
    nn::load_checkpoint(checkpoint, params, adam);

    EmConfig cfg;
    cfg.scene_dirs = {scene_dir};
    cfg.grid_extent = grid_extent;
    cfg.min_views = min_views;
    cfg.out_dir = out;
    const auto scenes = load_scenes(cfg);
    const auto& scene = scenes[0];

    fs::create_directories(out);
    const auto heatmaps = infer_heatmaps(params, scene.views, threads);
    const VoxelGrid grid = accumulate(scene.views, heatmaps, scene.grid);
    {
        std::ofstream os((fs::path(out) / "voxelgrid.txt").string(), std::ios::trunc);
        os << dump_grid(grid);
    }
    {
        std::ofstream os((fs::path(out) / "visibility.txt").string(), std::ios::trunc);
        const auto stats = visibility_stats(grid, 16);
        os << "k,fraction_occupied_with_N_ge_k\n";
        for (std::size_t k = 0; k < stats.size(); ++k)
            os << (k + 1) << "," << stats[k] << "\n";
    }
    MaximizerConfig mx;
    mx.top_l = l_budget;
    for (std::size_t vi = 0; vi < scene.views.size(); ++vi) {
        char name[64];
        std::snprintf(name, sizeof(name), "heatmap_%05d.pgm", static_cast<int>(vi));
        save_pgm((fs::path(out) / name).string(), heatmaps[vi]);

        const auto rep = render_repeatability(grid, scene.views[vi], min_views);
        const auto mask = build_pseudo_gt(rep, mx);
        Plane<float> mask_img(mask.width, mask.height, 0.0f);
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask_img.data[i] = mask.data[i] ? 1.0f : 0.0f;
        std::snprintf(name, sizeof(name), "pseudo_gt_%05d.pgm", static_cast<int>(vi));
        save_pgm((fs::path(out) / name).string(), mask_img);
    }
    log_info({{"event", "inspect_done"}, {"out", out}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEDM: soft-expectation / deep-maximization keypoint detector training"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "synthesize scene datasets");
    std::uint64_t gen_seed = 0;
    std::string gen_out = "data";
    int gen_scenes = 4, gen_views = 30, gen_size = 128;
    std::string gen_complexity = "small";
    double gen_cov_extent = 0.005;
    int gen_threads = default_threads();
    gen->add_option("--seed", gen_seed, "root seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--scenes", gen_scenes, "number of scenes");
    gen->add_option("--views", gen_views, "views per scene");
    gen->add_option("--size", gen_size, "image width=height (divisible by 8)");
    gen->add_option("--complexity", gen_complexity, "small|medium")
        ->check(CLI::IsMember({"small", "medium"}));
    gen->add_option("--coverage-extent", gen_cov_extent,
                    "voxel size for the coverage check (m)");
    gen->add_option("--threads", gen_threads, "worker cap");

    // train
    auto* train = app.add_subcommand("train", "run the EM training loop");
    std::string train_config;
    long long train_seed = -1;
    std::string train_out;
    int train_iters = 0;
    bool train_resume = false;
    int train_threads = 0;
    train->add_option("--config", train_config, "config file")->required();
    train->add_option("--seed", train_seed, "override em.seed");
    train->add_option("--out", train_out, "override em.out");
    train->add_option("--iters", train_iters, "override em.iterations");
    train->add_flag("--resume", train_resume, "resume from latest checkpoint");
    train->add_option("--threads", train_threads, "worker cap");

    // eval
    auto* eval = app.add_subcommand("eval", "run benchmarks on a checkpoint");
    std::string eval_ckpt, eval_out = "eval_out";
    std::vector<std::string> eval_scenes;
    long long eval_seed = 0;
    int eval_pairs = 8;
    int eval_threads = default_threads();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--scenes", eval_scenes, "scene dataset directories")->required();
    eval->add_option("--out", eval_out, "report directory");
    eval->add_option("--seed", eval_seed, "pair-sampling seed");
    eval->add_option("--pairs", eval_pairs, "pairs per scene");
    eval->add_option("--threads", eval_threads, "worker cap");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "dump heatmaps/pseudo-GT/voxel stats");
    std::string ins_ckpt, ins_scene, ins_out = "inspect_out";
    double ins_extent = 0.005;
    int ins_min_views = 3, ins_l = 107;
    int ins_threads = default_threads();
    inspect->add_option("--checkpoint", ins_ckpt, "checkpoint file")->required();
    inspect->add_option("--scene", ins_scene, "scene dataset directory")->required();
    inspect->add_option("--out", ins_out, "output directory");
    inspect->add_option("--grid-extent", ins_extent, "voxel size (m)");
    inspect->add_option("--min-views", ins_min_views, "masking threshold");
    inspect->add_option("--L", ins_l, "keypoint budget");
    inspect->add_option("--threads", ins_threads, "worker cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::fputs(app.help().c_str(), stderr);
        if (e.get_exit_code() == 0) return 0;  // --help
        std::fprintf(stderr, "ERROR usage error=\"%s\"\n", e.what());
        return 1;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_seed, gen_out, gen_scenes, gen_views, gen_size,
                           gen_complexity, gen_cov_extent, gen_threads);
        if (train->parsed())
            return cmd_train(train_config, train_seed, train_out, train_iters,
                             train_resume, train_threads);
        if (eval->parsed())
            return cmd_eval(eval_ckpt, eval_scenes, eval_out, eval_seed, eval_pairs,
                            eval_threads);
        if (inspect->parsed())
            return cmd_inspect(ins_ckpt, ins_scene, ins_out, ins_extent, ins_min_views,
                               ins_l, ins_threads);
    } catch (const std::exception& e) {
        log_error({{"event", "fatal"}, {"error", e.what()}});
        return 2;
    }
    return 0;
}
