#include "sedm/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sedm/dataset.hpp"
#include "sedm/log.hpp"

namespace fs = std::filesystem;

namespace sedm {

KeypointSet extract_from_heatmap(const Plane<float>& heatmap, double threshold,
                                 double r_nms, int cell, int border) {
    RepeatabilityMap rep;
    rep.values = Plane<double>(heatmap.width, heatmap.height);
    rep.mask = Plane<std::uint8_t>(heatmap.width, heatmap.height, 1);
    for (std::size_t i = 0; i < heatmap.size(); ++i)
        rep.values.data[i] = static_cast<double>(heatmap.data[i]);

    MaximizerConfig cfg;
    cfg.top_l = std::numeric_limits<int>::max();
    cfg.r_nms = r_nms;
    cfg.cell = cell;
    cfg.border = border;
    cfg.edge_filter_on = false;
    cfg.score_floor = threshold;
    const Plane<std::uint8_t> none(heatmap.width, heatmap.height, 0);
    KeypointSet out;
    out.points = nms_select(rep, none, cfg);
    out.threshold = threshold;
    out.r_nms = r_nms;
    return out;
}

KeypointSet extract(const nn::DetectorParams<float>& params,
                    const Plane<float>& image, double threshold, double r_nms,
                    int cell, int border) {
    return extract_from_heatmap(nn::forward(params, image), threshold, r_nms, cell,
                                border);
}

KeypointSet random_keypoints(int count, int width, int height, int border,
                             Rng& rng) {
    KeypointSet out;
    out.threshold = 0.0;
    out.r_nms = 0.0;
    for (int i = 0; i < count; ++i) {
        const int x = border + static_cast<int>(rng.uniform_int(width - 2 * border));
        const int y = border + static_cast<int>(rng.uniform_int(height - 2 * border));
        out.points.push_back({x, y, 1.0});
    }
    return out;
}

namespace {

// one direction: fraction of A's keypoints, visible in B, repeated in B
bool directed_repeatability(const KeypointSet& kps_a, const KeypointSet& kps_b,
                            const CameraView& view_a, const CameraView& view_b,
                            double eps_px, double vis_tol_m, double& score) {
    int visible = 0, repeated = 0;
    for (const auto& kp : kps_a.points) {
        const float d = view_a.depth.at(kp.x, kp.y);
        if (d <= 0.0f) continue;
        const Vec3 p = backproject({double(kp.x), double(kp.y)}, d, view_a);
        const auto proj = project(p, view_b);
        if (!proj) continue;
        const int bx = static_cast<int>(std::lround(proj->pixel.x));
        const int by = static_cast<int>(std::lround(proj->pixel.y));
        if (!view_b.depth.in_bounds(bx, by)) continue;
        const float db = view_b.depth.at(bx, by);
        if (db <= 0.0f || std::abs(static_cast<double>(db) - proj->depth) > vis_tol_m)
            continue;  // occluded in B
        ++visible;
        for (const auto& kb : kps_b.points) {
            const double dx = kb.x - proj->pixel.x, dy = kb.y - proj->pixel.y;
            if (dx * dx + dy * dy <= eps_px * eps_px) {
                ++repeated;
                break;
            }
        }
    }
    if (visible == 0) return false;
    score = static_cast<double>(repeated) / static_cast<double>(visible);
    return true;
}

}  // namespace

double repeatability_score(const KeypointSet& kps_a, const KeypointSet& kps_b,
                           const CameraView& view_a, const CameraView& view_b,
                           double eps_px, double vis_tol_m) {
    double s_ab = 0.0, s_ba = 0.0;
    const bool ok_ab = directed_repeatability(kps_a, kps_b, view_a, view_b, eps_px,
                                              vis_tol_m, s_ab);
    const bool ok_ba = directed_repeatability(kps_b, kps_a, view_b, view_a, eps_px,
                                              vis_tol_m, s_ba);
    if (ok_ab && ok_ba) return 0.5 * (s_ab + s_ba);
    if (ok_ab) return s_ab;
    if (ok_ba) return s_ba;
    return 0.0;
}

std::vector<float> patch_descriptor(const Plane<float>& image, int x, int y,
                                    int patch) {
    const int r = patch / 2;
    if (x < r || y < r || x >= image.width - r || y >= image.height - r)
        throw std::invalid_argument("patch_descriptor: keypoint too close to border");
    std::vector<float> d(static_cast<std::size_t>(patch) * patch);
    double mean = 0.0;
    int i = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            d[i] = image.at(x + dx, y + dy);
            mean += d[i];
            ++i;
        }
    mean /= static_cast<double>(d.size());
    double norm2 = 0.0;
    for (auto& v : d) {
        v = static_cast<float>(v - mean);
        norm2 += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) {
        std::fill(d.begin(), d.end(), 0.0f);  // constant patch: unmatched
        return d;
    }
    for (auto& v : d) v = static_cast<float>(v / norm);
    return d;
}

namespace {

struct DescribedSet {
    std::vector<Keypoint> points;           // patch-supported keypoints only
    std::vector<std::vector<float>> descs;  // nonzero descriptors
};

DescribedSet describe(const Plane<float>& image, const KeypointSet& kps, int patch) {
    DescribedSet out;
    const int r = patch / 2;
    for (const auto& kp : kps.points) {
        if (kp.x < r || kp.y < r || kp.x >= image.width - r || kp.y >= image.height - r)
            continue;
        auto d = patch_descriptor(image, kp.x, kp.y, patch);
        bool zero = true;
        for (float v : d)
            if (v != 0.0f) {
                zero = false;
                break;
            }
        if (zero) continue;
        out.points.push_back(kp);
        out.descs.push_back(std::move(d));
    }
    return out;
}

double desc_dist2(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

// mutual nearest neighbors; one-to-one by construction
std::vector<std::pair<int, int>> mutual_nn(const DescribedSet& a,
                                           const DescribedSet& b) {
    std::vector<std::pair<int, int>> matches;
    if (a.points.empty() || b.points.empty()) return matches;
    std::vector<int> best_ab(a.points.size(), -1), best_ba(b.points.size(), -1);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        double best = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < b.points.size(); ++j) {
            const double d = desc_dist2(a.descs[i], b.descs[j]);
            if (d < best) {
                best = d;
                best_ab[i] = static_cast<int>(j);
            }
        }
    }
    for (std::size_t j = 0; j < b.points.size(); ++j) {
        double best = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            const double d = desc_dist2(a.descs[i], b.descs[j]);
            if (d < best) {
                best = d;
                best_ba[j] = static_cast<int>(i);
            }
        }
    }
    for (std::size_t i = 0; i < a.points.size(); ++i)
        if (best_ab[i] >= 0 && best_ba[best_ab[i]] == static_cast<int>(i))
            matches.emplace_back(static_cast<int>(i), best_ab[i]);
    return matches;
}

}  // namespace

MatchResult mma_with_keypoints(const std::vector<MmaPair>& pairs,
                               const std::vector<KeypointSet>& kps_a,
                               const std::vector<KeypointSet>& kps_b,
                               int max_threshold) {
    MatchResult result;
    result.accuracy.assign(max_threshold, 0.0);
    if (pairs.empty()) return result;
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto& pair = pairs[pi];
        const DescribedSet da = describe(pair.image_a, kps_a[pi], 13);
        const DescribedSet db = describe(pair.image_b, kps_b[pi], 13);
        const auto matches = mutual_nn(da, db);
        if (matches.empty()) {
            ++result.zero_match_pairs;
            log_warn({{"event", "mma_zero_matches"}, {"pair", std::to_string(pi)}});
            continue;  // contributes 0 at every threshold
        }
        for (int t = 1; t <= max_threshold; ++t) {
            int correct = 0;
            for (const auto& [ia, ib] : matches) {
                const Vec2 pa{double(da.points[ia].x), double(da.points[ia].y)};
                const Vec2 pb{double(db.points[ib].x), double(db.points[ib].y)};
                const Vec2 wa = warp_homography(pa, pair.h_ab);
                const double dx = wa.x - pb.x, dy = wa.y - pb.y;
                if (std::sqrt(dx * dx + dy * dy) <= t) ++correct;
            }
            result.accuracy[t - 1] +=
                static_cast<double>(correct) / static_cast<double>(matches.size());
        }
        if (pi == 0)
            for (const auto& m : matches) result.matches.push_back(m);
    }
    for (auto& a : result.accuracy) a /= static_cast<double>(pairs.size());
    return result;
}

MatchResult mma(const nn::DetectorParams<float>& params,
                const std::vector<MmaPair>& pairs, int max_threshold,
                double threshold, double r_nms) {
    std::vector<KeypointSet> kps_a, kps_b;
    kps_a.reserve(pairs.size());
    kps_b.reserve(pairs.size());
    for (const auto& pair : pairs) {
        kps_a.push_back(extract(params, pair.image_a, threshold, r_nms));
        kps_b.push_back(extract(params, pair.image_b, threshold, r_nms));
    }
    return mma_with_keypoints(pairs, kps_a, kps_b, max_threshold);
}

double localization_error_3d(const std::vector<KeypointSet>& keypoints,
                             const std::vector<CameraView>& views, double eps_px,
                             double vis_tol_m) {
    if (views.size() < 2)
        throw std::invalid_argument("localization_error_3d: need >= 2 views");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < views.size(); ++a) {
        for (std::size_t b = 0; b < views.size(); ++b) {
            if (a == b) continue;
            for (const auto& kp : keypoints[a].points) {
                const float d = views[a].depth.at(kp.x, kp.y);
                if (d <= 0.0f) continue;
                const Vec3 p = backproject({double(kp.x), double(kp.y)}, d, views[a]);
                const auto proj = project(p, views[b]);
                if (!proj) continue;
                const int bx = static_cast<int>(std::lround(proj->pixel.x));
                const int by = static_cast<int>(std::lround(proj->pixel.y));
                if (!views[b].depth.in_bounds(bx, by)) continue;
                const float db = views[b].depth.at(bx, by);
                if (db <= 0.0f ||
                    std::abs(static_cast<double>(db) - proj->depth) > vis_tol_m)
                    continue;
                // nearest repeated keypoint within eps
                const Keypoint* best = nullptr;
                double best_d2 = eps_px * eps_px;
                for (const auto& kb : keypoints[b].points) {
                    const double dx = kb.x - proj->pixel.x, dy = kb.y - proj->pixel.y;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 <= best_d2) {
                        best_d2 = d2;
                        best = &kb;
                    }
                }
                if (!best) continue;
                const float dbk = views[b].depth.at(best->x, best->y);
                if (dbk <= 0.0f) continue;
                const Vec3 q =
                    backproject({double(best->x), double(best->y)}, dbk, views[b]);
                sum += (p - q).norm();
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void write_report(const EvalReport& report, const std::string& out_dir,
                  const std::vector<Plane<float>>& heatmaps) {
    fs::create_directories(out_dir);
    char buf[64];
    {
        std::ofstream os((fs::path(out_dir) / "mma.csv").string(), std::ios::trunc);
        os << "# accuracy = per-pair mean over mutual-NN matches, averaged over pairs\n";
        os << "threshold_px,mma_illumination,mma_homography\n";
        const std::size_t n =
            std::max(report.mma_illum.size(), report.mma_homography.size());
        for (std::size_t t = 0; t < n; ++t) {
            os << (t + 1) << ",";
            if (t < report.mma_illum.size()) {
                std::snprintf(buf, sizeof(buf), "%.9g", report.mma_illum[t]);
                os << buf;
            }
            os << ",";
            if (t < report.mma_homography.size()) {
                std::snprintf(buf, sizeof(buf), "%.9g", report.mma_homography[t]);
                os << buf;
            }
            os << "\n";
        }
    }
    {
        std::ofstream os((fs::path(out_dir) / "repeatability.csv").string(),
                         std::ios::trunc);
        os << "eps_px,repeatability\n";
        std::snprintf(buf, sizeof(buf), "3,%.9g\n", report.repeatability_3px);
        os << buf;
    }
    {
        std::ofstream os((fs::path(out_dir) / "loc3d.csv").string(), std::ios::trunc);
        os << "eps_px,mean_error_m\n";
        std::snprintf(buf, sizeof(buf), "3,%.9g\n", report.loc3d_m);
        os << buf;
    }
    for (std::size_t i = 0; i < heatmaps.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "heatmap_%05d.pgm", static_cast<int>(i));
        save_pgm((fs::path(out_dir) / name).string(), heatmaps[i]);
    }
}

}  // namespace sedm
