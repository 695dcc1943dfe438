#include "sedm/maximizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sedm {

void MaximizerConfig::validate() const {
    if (top_l < 1) throw std::invalid_argument("MaximizerConfig: top_l must be >= 1");
    if (r_nms < 1.0) throw std::invalid_argument("MaximizerConfig: r_nms must be >= 1");
    if (cell < 1) throw std::invalid_argument("MaximizerConfig: cell must be >= 1");
    if (border < 0) throw std::invalid_argument("MaximizerConfig: border must be >= 0");
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

Plane<double> smooth(const Plane<double>& in, const std::vector<double>& k) {
    const int radius = (static_cast<int>(k.size()) - 1) / 2;
    Plane<double> tmp(in.width, in.height), out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * in.at(std::clamp(x + i, 0, in.width - 1), y);
            tmp.at(x, y) = acc;
        }
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, in.height - 1));
            out.at(x, y) = acc;
        }
    return out;
}

}  // namespace

Plane<std::uint8_t> edge_mask(const RepeatabilityMap& rep, double sigma,
                              double harris_k) {
    const int w = rep.values.width, h = rep.values.height;
    if (rep.mask.width != w || rep.mask.height != h)
        throw std::invalid_argument("edge_mask: value/mask dimension mismatch");

    // masked pixels read as 0 in the derivative stencils
    Plane<double> v(w, h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rep.mask.at(x, y)) v.at(x, y) = rep.values.at(x, y);

    Plane<double> ixx(w, h), iyy(w, h), ixy(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (v.at(std::min(x + 1, w - 1), y) -
                                     v.at(std::max(x - 1, 0), y));
            const double gy = 0.5 * (v.at(x, std::min(y + 1, h - 1)) -
                                     v.at(x, std::max(y - 1, 0)));
            ixx.at(x, y) = gx * gx;
            iyy.at(x, y) = gy * gy;
            ixy.at(x, y) = gx * gy;
        }
    const auto k = gaussian_kernel(sigma);
    ixx = smooth(ixx, k);
    iyy = smooth(iyy, k);
    ixy = smooth(ixy, k);

    Plane<std::uint8_t> out(w, h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!rep.mask.at(x, y)) {
                out.at(x, y) = 1;
                continue;
            }
            const double a = ixx.at(x, y), b = iyy.at(x, y), c = ixy.at(x, y);
            const double trace = a + b;
            const double response = a * b - c * c - harris_k * trace * trace;
            if (response < -1e-12) out.at(x, y) = 1;
        }
    return out;
}

std::vector<Keypoint> nms_select(const RepeatabilityMap& rep,
                                 const Plane<std::uint8_t>& excluded,
                                 const MaximizerConfig& cfg) {
    cfg.validate();
    if (rep.values.width != excluded.width || rep.values.height != excluded.height)
        throw std::invalid_argument("nms_select: excluded-map dimension mismatch");

    const int w = rep.values.width, h = rep.values.height;
    std::vector<Keypoint> candidates;
    candidates.reserve(1024);
    for (int y = cfg.border; y < h - cfg.border; ++y)
        for (int x = cfg.border; x < w - cfg.border; ++x) {
            if (!rep.mask.at(x, y) || excluded.at(x, y)) continue;
            const double s = rep.values.at(x, y);
            if (s < cfg.score_floor) continue;
            candidates.push_back({x, y, s});
        }
    // descending score; ties resolve in row-major pixel order
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Keypoint& a, const Keypoint& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.y != b.y) return a.y < b.y;
                         return a.x < b.x;
                     });

    const double r2 = cfg.r_nms * cfg.r_nms;
    const int cells_x = (w + cfg.cell - 1) / cfg.cell;
    std::vector<std::uint8_t> cell_used(
        static_cast<std::size_t>(cells_x) * ((h + cfg.cell - 1) / cfg.cell), 0);

    std::vector<Keypoint> accepted;
    for (const auto& cand : candidates) {
        if (static_cast<int>(accepted.size()) >= cfg.top_l) break;
        const std::size_t cell_id =
            static_cast<std::size_t>(cand.y / cfg.cell) * cells_x + cand.x / cfg.cell;
        if (cell_used[cell_id]) continue;
        bool ok = true;
        for (const auto& a : accepted) {
            const double dx = a.x - cand.x, dy = a.y - cand.y;
            if (dx * dx + dy * dy <= r2) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        accepted.push_back(cand);
        cell_used[cell_id] = 1;
    }
    return accepted;
}

std::vector<Keypoint> build_pseudo_gt_keypoints(const RepeatabilityMap& rep,
                                                const MaximizerConfig& cfg) {
    Plane<std::uint8_t> excluded;
    if (cfg.edge_filter_on) {
        excluded = edge_mask(rep);
    } else {
        excluded = Plane<std::uint8_t>(rep.values.width, rep.values.height, 0);
    }
    return nms_select(rep, excluded, cfg);
}

Plane<std::uint8_t> build_pseudo_gt(const RepeatabilityMap& rep,
                                    const MaximizerConfig& cfg) {
    Plane<std::uint8_t> mask(rep.values.width, rep.values.height, 0);
    for (const auto& kp : build_pseudo_gt_keypoints(rep, cfg)) mask.at(kp.x, kp.y) = 1;
    return mask;
}

int anneal_l(int em_iteration, const std::vector<int>& schedule, int period) {
    if (schedule.empty()) throw std::invalid_argument("anneal_l: empty schedule");
    if (period < 1) throw std::invalid_argument("anneal_l: period must be >= 1");
    if (em_iteration < 0) throw std::invalid_argument("anneal_l: negative iteration");
    const std::size_t idx =
        std::min(static_cast<std::size_t>(em_iteration / period), schedule.size() - 1);
    return schedule[idx];
}

}  // namespace sedm
