#include "sedm/nn/net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sedm/kernels/kernels.hpp"
#include "sedm/parallel.hpp"
#include "sedm/rng.hpp"

namespace sedm::nn {

namespace {

constexpr int kC1 = kEncoderChannels[0];
constexpr int kC2 = kEncoderChannels[1];
constexpr int kC3 = kEncoderChannels[2];

kernels::Conv3x3Shape conv1_shape(int h, int w) { return {1, h, w, kC1, 2}; }
kernels::Conv3x3Shape conv2_shape(int h, int w) { return {kC1, h / 2, w / 2, kC2, 2}; }
kernels::Conv3x3Shape conv3_shape(int h, int w) { return {kC2, h / 4, w / 4, kC3, 2}; }
kernels::Conv1x1Shape head_shape(int h, int w) { return {kC3, h / 8, w / 8, kHeadChannels}; }

template <typename T>
struct LayerTrace {
    Tensor<T> z;     // conv output, pre-normalization
    Tensor<T> xhat;  // normalized activations
    Tensor<T> a;     // post gamma/beta + ReLU
};

template <typename T>
struct SampleTrace {
    Tensor<T> in;
    LayerTrace<T> l1, l2, l3;
    Tensor<T> logits, probs;
    Plane<T> heat;
};

struct BnStats {
    std::vector<double> mean, var;
};

template <typename T>
void check_input(const Plane<T>& image) {
    if (image.width <= 0 || image.height <= 0 || image.width % kCell != 0 ||
        image.height % kCell != 0)
        throw std::invalid_argument("detector: image dims must be divisible by 8");
}

template <typename T>
Tensor<T> image_tensor(const Plane<T>& image) {
    Tensor<T> t(1, image.height, image.width);
    std::memcpy(t.data.data(), image.data.data(), image.size() * sizeof(T));
    return t;
}

// Per-channel mean and (biased) variance over a set of tensors; accumulation
// runs in double, in sample order, so results do not depend on threading.
template <typename T>
BnStats batch_stats(const std::vector<const Tensor<T>*>& zs, int channels) {
    BnStats st;
    st.mean.assign(channels, 0.0);
    st.var.assign(channels, 0.0);
    std::size_t m = 0;
    for (const auto* z : zs) m += z->plane();
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (const auto* z : zs) {
            const T* p = z->ch(c);
            const std::size_t n = z->plane();
            for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(p[i]);
        }
        const double mean = sum / static_cast<double>(m);
        double ss = 0.0;
        for (const auto* z : zs) {
            const T* p = z->ch(c);
            const std::size_t n = z->plane();
            for (std::size_t i = 0; i < n; ++i) {
                const double d = static_cast<double>(p[i]) - mean;
                ss += d * d;
            }
        }
        st.mean[c] = mean;
        st.var[c] = ss / static_cast<double>(m);
    }
    return st;
}

template <typename T>
BnStats running_stats(const std::vector<T>& mean, const std::vector<T>& var) {
    BnStats st;
    st.mean.assign(mean.begin(), mean.end());
    st.var.assign(var.begin(), var.end());
    return st;
}

template <typename T>
void bn_relu_apply(const Tensor<T>& z, const std::vector<T>& gamma,
                   const std::vector<T>& beta, const BnStats& st, Tensor<T>& xhat,
                   Tensor<T>& a) {
    xhat = Tensor<T>(z.c, z.h, z.w);
    a = Tensor<T>(z.c, z.h, z.w);
    const std::size_t n = z.plane();
    for (int c = 0; c < z.c; ++c) {
        const double inv_std = 1.0 / std::sqrt(st.var[c] + kBnEps);
        const T g = gamma[c], b = beta[c];
        const double mu = st.mean[c];
        const T* zp = z.ch(c);
        T* xp = xhat.ch(c);
        T* ap = a.ch(c);
        for (std::size_t i = 0; i < n; ++i) {
            const T xh = static_cast<T>((static_cast<double>(zp[i]) - mu) * inv_std);
            xp[i] = xh;
            const T r = g * xh + b;
            ap[i] = r > T(0) ? r : T(0);
        }
    }
}

template <typename T>
void cell_softmax(const Tensor<T>& logits, Tensor<T>& probs) {
    probs = Tensor<T>(logits.c, logits.h, logits.w);
    const std::size_t plane = logits.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        T m = logits.data[p];
        for (int t = 1; t < kHeadChannels; ++t)
            m = std::max(m, logits.data[t * plane + p]);
        double sum = 0.0;
        for (int t = 0; t < kHeadChannels; ++t) {
            const T e = std::exp(logits.data[t * plane + p] - m);
            probs.data[t * plane + p] = e;
            sum += static_cast<double>(e);
        }
        const double inv = 1.0 / sum;
        for (int t = 0; t < kHeadChannels; ++t)
            probs.data[t * plane + p] =
                static_cast<T>(static_cast<double>(probs.data[t * plane + p]) * inv);
    }
}

// 64 per-cell channels -> the cell's 8x8 pixels; channel t maps to cell
// pixel (t%8, t/8). The dustbin channel is dropped.
template <typename T>
Plane<T> depth_to_space(const Tensor<T>& probs) {
    Plane<T> heat(probs.w * kCell, probs.h * kCell);
    for (int gy = 0; gy < probs.h; ++gy)
        for (int gx = 0; gx < probs.w; ++gx)
            for (int t = 0; t < kCell * kCell; ++t)
                heat.at(gx * kCell + t % kCell, gy * kCell + t / kCell) =
                    probs.at(t, gy, gx);
    return heat;
}

template <typename T>
void space_to_depth_grad(const Plane<T>& dheat, Tensor<T>& dprobs, int gh, int gw) {
    dprobs = Tensor<T>(kHeadChannels, gh, gw);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx)
            for (int t = 0; t < kCell * kCell; ++t)
                dprobs.at(t, gy, gx) =
                    dheat.at(gx * kCell + t % kCell, gy * kCell + t / kCell);
}

template <typename T>
void softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs,
                      Tensor<T>& dlogits) {
    dlogits = Tensor<T>(probs.c, probs.h, probs.w);
    const std::size_t plane = probs.plane();
    for (std::size_t p = 0; p < plane; ++p) {
        double s = 0.0;
        for (int t = 0; t < kHeadChannels; ++t)
            s += static_cast<double>(dprobs.data[t * plane + p]) *
                 static_cast<double>(probs.data[t * plane + p]);
        for (int t = 0; t < kHeadChannels; ++t) {
            const double pt = probs.data[t * plane + p];
            const double dt = dprobs.data[t * plane + p];
            dlogits.data[t * plane + p] = static_cast<T>(pt * (dt - s));
        }
    }
}

// Forward through the whole network for one sample with fixed BN statistics.
template <typename T>
void forward_sample(const DetectorParams<T>& p, const Plane<T>& image,
                    const BnStats& st1, const BnStats& st2, const BnStats& st3,
                    SampleTrace<T>& tr) {
    const int h = image.height, w = image.width;
    tr.in = image_tensor(image);

    const auto s1 = conv1_shape(h, w);
    tr.l1.z = Tensor<T>(kC1, s1.out_h(), s1.out_w());
    kernels::conv3x3_forward(tr.in.data.data(), p.conv1_w.data(), p.conv1_b.data(),
                             tr.l1.z.data.data(), s1);
    bn_relu_apply(tr.l1.z, p.bn1_gamma, p.bn1_beta, st1, tr.l1.xhat, tr.l1.a);

    const auto s2 = conv2_shape(h, w);
    tr.l2.z = Tensor<T>(kC2, s2.out_h(), s2.out_w());
    kernels::conv3x3_forward(tr.l1.a.data.data(), p.conv2_w.data(), p.conv2_b.data(),
                             tr.l2.z.data.data(), s2);
    bn_relu_apply(tr.l2.z, p.bn2_gamma, p.bn2_beta, st2, tr.l2.xhat, tr.l2.a);

    const auto s3 = conv3_shape(h, w);
    tr.l3.z = Tensor<T>(kC3, s3.out_h(), s3.out_w());
    kernels::conv3x3_forward(tr.l2.a.data.data(), p.conv3_w.data(), p.conv3_b.data(),
                             tr.l3.z.data.data(), s3);
    bn_relu_apply(tr.l3.z, p.bn3_gamma, p.bn3_beta, st3, tr.l3.xhat, tr.l3.a);

    const auto sh = head_shape(h, w);
    tr.logits = Tensor<T>(kHeadChannels, sh.h, sh.w);
    kernels::conv1x1_forward(tr.l3.a.data.data(), p.head_w.data(), p.head_b.data(),
                             tr.logits.data.data(), sh);
    cell_softmax(tr.logits, tr.probs);
    tr.heat = depth_to_space(tr.probs);
}

struct GradSlices {
    template <typename T>
    static void slice(std::vector<T>& flat, DetectorParams<T>& p,
                      std::vector<std::pair<T*, std::size_t>>& out) {
        out.clear();
        std::size_t off = 0;
        for (auto& r : learnable_refs(p)) {
            out.emplace_back(flat.data() + off, r.vec->size());
            off += r.vec->size();
        }
    }
};

}  // namespace

template <typename T>
DetectorParams<T> DetectorParams<T>::zeros() {
    DetectorParams<T> p;
    p.conv1_w.assign(static_cast<std::size_t>(kC1) * 1 * 9, T(0));
    p.conv1_b.assign(kC1, T(0));
    p.bn1_gamma.assign(kC1, T(1));
    p.bn1_beta.assign(kC1, T(0));
    p.bn1_mean.assign(kC1, T(0));
    p.bn1_var.assign(kC1, T(1));
    p.conv2_w.assign(static_cast<std::size_t>(kC2) * kC1 * 9, T(0));
    p.conv2_b.assign(kC2, T(0));
    p.bn2_gamma.assign(kC2, T(1));
    p.bn2_beta.assign(kC2, T(0));
    p.bn2_mean.assign(kC2, T(0));
    p.bn2_var.assign(kC2, T(1));
    p.conv3_w.assign(static_cast<std::size_t>(kC3) * kC2 * 9, T(0));
    p.conv3_b.assign(kC3, T(0));
    p.bn3_gamma.assign(kC3, T(1));
    p.bn3_beta.assign(kC3, T(0));
    p.bn3_mean.assign(kC3, T(0));
    p.bn3_var.assign(kC3, T(1));
    p.head_w.assign(static_cast<std::size_t>(kHeadChannels) * kC3, T(0));
    p.head_b.assign(kHeadChannels, T(0));
    return p;
}

template <typename T>
DetectorParams<T> DetectorParams<T>::he_init(std::uint64_t seed) {
    DetectorParams<T> p = zeros();
    Rng rng = Rng::derive(seed, "detector-init");
    auto fill = [&](std::vector<T>& v, double stddev) {
        for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
    };
    fill(p.conv1_w, std::sqrt(2.0 / (1 * 9)));
    fill(p.conv2_w, std::sqrt(2.0 / (kC1 * 9)));
    fill(p.conv3_w, std::sqrt(2.0 / (kC2 * 9)));
    fill(p.head_w, 0.05);
    return p;
}

template <typename T>
template <typename U>
DetectorParams<U> DetectorParams<T>::cast() const {
    DetectorParams<U> out = DetectorParams<U>::zeros();
    auto& self = const_cast<DetectorParams<T>&>(*this);
    auto src_l = learnable_refs(self);
    auto dst_l = learnable_refs(out);
    for (std::size_t i = 0; i < src_l.size(); ++i)
        for (std::size_t j = 0; j < src_l[i].vec->size(); ++j)
            (*dst_l[i].vec)[j] = static_cast<U>((*src_l[i].vec)[j]);
    auto src_b = buffer_refs(self);
    auto dst_b = buffer_refs(out);
    for (std::size_t i = 0; i < src_b.size(); ++i)
        for (std::size_t j = 0; j < src_b[i].vec->size(); ++j)
            (*dst_b[i].vec)[j] = static_cast<U>((*src_b[i].vec)[j]);
    return out;
}

template <typename T>
bool DetectorParams<T>::all_finite() const {
    auto& self = const_cast<DetectorParams<T>&>(*this);
    for (auto& r : learnable_refs(self))
        for (T v : *r.vec)
            if (!std::isfinite(static_cast<double>(v))) return false;
    for (auto& r : buffer_refs(self))
        for (T v : *r.vec)
            if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
std::vector<ParamRef<T>> learnable_refs(DetectorParams<T>& p) {
    return {
        {"conv1.w", &p.conv1_w},     {"conv1.b", &p.conv1_b},
        {"bn1.gamma", &p.bn1_gamma}, {"bn1.beta", &p.bn1_beta},
        {"conv2.w", &p.conv2_w},     {"conv2.b", &p.conv2_b},
        {"bn2.gamma", &p.bn2_gamma}, {"bn2.beta", &p.bn2_beta},
        {"conv3.w", &p.conv3_w},     {"conv3.b", &p.conv3_b},
        {"bn3.gamma", &p.bn3_gamma}, {"bn3.beta", &p.bn3_beta},
        {"head.w", &p.head_w},       {"head.b", &p.head_b},
    };
}

template <typename T>
std::vector<ParamRef<T>> buffer_refs(DetectorParams<T>& p) {
    return {
        {"bn1.mean", &p.bn1_mean}, {"bn1.var", &p.bn1_var},
        {"bn2.mean", &p.bn2_mean}, {"bn2.var", &p.bn2_var},
        {"bn3.mean", &p.bn3_mean}, {"bn3.var", &p.bn3_var},
    };
}

template <typename T>
std::size_t learnable_size(const DetectorParams<T>& p) {
    std::size_t n = 0;
    for (auto& r : learnable_refs(const_cast<DetectorParams<T>&>(p))) n += r.vec->size();
    return n;
}

template <typename T>
std::vector<T> flatten_learnables(const DetectorParams<T>& p) {
    std::vector<T> flat;
    for (auto& r : learnable_refs(const_cast<DetectorParams<T>&>(p)))
        flat.insert(flat.end(), r.vec->begin(), r.vec->end());
    return flat;
}

template <typename T>
void load_learnables(DetectorParams<T>& p, const std::vector<T>& flat) {
    std::size_t off = 0;
    for (auto& r : learnable_refs(p)) {
        if (off + r.vec->size() > flat.size())
            throw std::invalid_argument("load_learnables: flat vector too small");
        std::copy(flat.begin() + off, flat.begin() + off + r.vec->size(),
                  r.vec->begin());
        off += r.vec->size();
    }
    if (off != flat.size())
        throw std::invalid_argument("load_learnables: flat vector size mismatch");
}

template <typename T>
Tensor<T> forward_probs(const DetectorParams<T>& p, const Plane<T>& image) {
    check_input(image);
    SampleTrace<T> tr;
    forward_sample(p, image, running_stats(p.bn1_mean, p.bn1_var),
                   running_stats(p.bn2_mean, p.bn2_var),
                   running_stats(p.bn3_mean, p.bn3_var), tr);
    return std::move(tr.probs);
}

template <typename T>
Plane<T> forward(const DetectorParams<T>& p, const Plane<T>& image) {
    check_input(image);
    SampleTrace<T> tr;
    forward_sample(p, image, running_stats(p.bn1_mean, p.bn1_var),
                   running_stats(p.bn2_mean, p.bn2_var),
                   running_stats(p.bn3_mean, p.bn3_var), tr);
    return std::move(tr.heat);
}

template <typename T>
double heatmap_loss(const Plane<T>& heatmap, const Plane<std::uint8_t>& labels,
                    const Plane<std::uint8_t>& valid, int border) {
    if (heatmap.width != labels.width || heatmap.height != labels.height ||
        heatmap.width != valid.width || heatmap.height != valid.height)
        throw std::invalid_argument("heatmap_loss: dimension mismatch");
    double loss = 0.0;
    for (int y = border; y < heatmap.height - border; ++y) {
        for (int x = border; x < heatmap.width - border; ++x) {
            if (!valid.at(x, y)) continue;
            double v = static_cast<double>(heatmap.at(x, y));
            v = std::min(1.0 - kLossClamp, std::max(kLossClamp, v));
            if (labels.at(x, y))
                loss -= std::log(v);
            else
                loss -= std::log(1.0 - v);
        }
    }
    return loss;
}

template <typename T>
double train_forward_backward(DetectorParams<T>& p,
                              const std::vector<TrainSampleView<T>>& batch,
                              int border, bool update_running,
                              std::vector<T>* grads, int threads) {
    if (batch.empty())
        throw std::invalid_argument("train_forward_backward: empty batch");
    for (const auto& s : batch) {
        check_input(*s.image);
        if (s.labels->width != s.image->width || s.labels->height != s.image->height)
            throw std::invalid_argument("train: label dimension mismatch");
        if (s.valid->width != s.image->width || s.valid->height != s.image->height)
            throw std::invalid_argument("train: valid-mask dimension mismatch");
    }
    const std::size_t nb = batch.size();
    std::vector<SampleTrace<T>> tr(nb);

    // ---- forward, staged so BN statistics see the whole batch ----
    parallel_for(nb, threads, [&](std::size_t i) {
        tr[i].in = image_tensor(*batch[i].image);
        const auto s1 = conv1_shape(batch[i].image->height, batch[i].image->width);
        tr[i].l1.z = Tensor<T>(kC1, s1.out_h(), s1.out_w());
        kernels::conv3x3_forward(tr[i].in.data.data(), p.conv1_w.data(),
                                 p.conv1_b.data(), tr[i].l1.z.data.data(), s1);
    });
    std::vector<const Tensor<T>*> zs(nb);
    for (std::size_t i = 0; i < nb; ++i) zs[i] = &tr[i].l1.z;
    const BnStats st1 = batch_stats(zs, kC1);
    parallel_for(nb, threads, [&](std::size_t i) {
        bn_relu_apply(tr[i].l1.z, p.bn1_gamma, p.bn1_beta, st1, tr[i].l1.xhat,
                      tr[i].l1.a);
        const auto s2 = conv2_shape(batch[i].image->height, batch[i].image->width);
        tr[i].l2.z = Tensor<T>(kC2, s2.out_h(), s2.out_w());
        kernels::conv3x3_forward(tr[i].l1.a.data.data(), p.conv2_w.data(),
                                 p.conv2_b.data(), tr[i].l2.z.data.data(), s2);
    });
    for (std::size_t i = 0; i < nb; ++i) zs[i] = &tr[i].l2.z;
    const BnStats st2 = batch_stats(zs, kC2);
    parallel_for(nb, threads, [&](std::size_t i) {
        bn_relu_apply(tr[i].l2.z, p.bn2_gamma, p.bn2_beta, st2, tr[i].l2.xhat,
                      tr[i].l2.a);
        const auto s3 = conv3_shape(batch[i].image->height, batch[i].image->width);
        tr[i].l3.z = Tensor<T>(kC3, s3.out_h(), s3.out_w());
        kernels::conv3x3_forward(tr[i].l2.a.data.data(), p.conv3_w.data(),
                                 p.conv3_b.data(), tr[i].l3.z.data.data(), s3);
    });
    for (std::size_t i = 0; i < nb; ++i) zs[i] = &tr[i].l3.z;
    const BnStats st3 = batch_stats(zs, kC3);
    parallel_for(nb, threads, [&](std::size_t i) {
        bn_relu_apply(tr[i].l3.z, p.bn3_gamma, p.bn3_beta, st3, tr[i].l3.xhat,
                      tr[i].l3.a);
        const auto sh = head_shape(batch[i].image->height, batch[i].image->width);
        tr[i].logits = Tensor<T>(kHeadChannels, sh.h, sh.w);
        kernels::conv1x1_forward(tr[i].l3.a.data.data(), p.head_w.data(),
                                 p.head_b.data(), tr[i].logits.data.data(), sh);
        cell_softmax(tr[i].logits, tr[i].probs);
        tr[i].heat = depth_to_space(tr[i].probs);
    });

    double loss_sum = 0.0;
    for (std::size_t i = 0; i < nb; ++i)
        loss_sum += heatmap_loss(tr[i].heat, *batch[i].labels, *batch[i].valid, border);
    const double mean_loss = loss_sum / static_cast<double>(nb);

    if (update_running) {
        auto blend = [](std::vector<T>& run, const std::vector<double>& batch_v) {
            for (std::size_t c = 0; c < run.size(); ++c)
                run[c] = static_cast<T>(kBnMomentum * static_cast<double>(run[c]) +
                                        (1.0 - kBnMomentum) * batch_v[c]);
        };
        blend(p.bn1_mean, st1.mean);
        blend(p.bn1_var, st1.var);
        blend(p.bn2_mean, st2.mean);
        blend(p.bn2_var, st2.var);
        blend(p.bn3_mean, st3.mean);
        blend(p.bn3_var, st3.var);
    }

    if (!grads) return mean_loss;

    // ---- backward ----
    grads->assign(learnable_size(p), T(0));
    std::vector<std::pair<T*, std::size_t>> gs;
    GradSlices::slice(*grads, p, gs);
    // learnable order: conv1.w conv1.b bn1.g bn1.b conv2.w conv2.b bn2.g bn2.b
    //                  conv3.w conv3.b bn3.g bn3.b head.w head.b
    T* g_conv1_w = gs[0].first;
    T* g_conv1_b = gs[1].first;
    T* g_bn1_g = gs[2].first;
    T* g_bn1_b = gs[3].first;
    T* g_conv2_w = gs[4].first;
    T* g_conv2_b = gs[5].first;
    T* g_bn2_g = gs[6].first;
    T* g_bn2_b = gs[7].first;
    T* g_conv3_w = gs[8].first;
    T* g_conv3_b = gs[9].first;
    T* g_bn3_g = gs[10].first;
    T* g_bn3_b = gs[11].first;
    T* g_head_w = gs[12].first;
    T* g_head_b = gs[13].first;

    const double inv_b = 1.0 / static_cast<double>(nb);

    // head stage, per sample
    std::vector<Tensor<T>> dr3(nb);
    std::vector<std::vector<T>> dw_h(nb), db_h(nb);
    parallel_for(nb, threads, [&](std::size_t i) {
        const Plane<T>& heat = tr[i].heat;
        Plane<T> dheat(heat.width, heat.height, T(0));
        for (int y = border; y < heat.height - border; ++y) {
            for (int x = border; x < heat.width - border; ++x) {
                if (!batch[i].valid->at(x, y)) continue;
                const double v = static_cast<double>(heat.at(x, y));
                if (v <= kLossClamp || v >= 1.0 - kLossClamp) continue;  // clamped
                const double g = batch[i].labels->at(x, y)
                                     ? -1.0 / v
                                     : 1.0 / (1.0 - v);
                dheat.at(x, y) = static_cast<T>(g * inv_b);
            }
        }
        Tensor<T> dprobs, dlogits;
        space_to_depth_grad(dheat, dprobs, tr[i].probs.h, tr[i].probs.w);
        softmax_backward(tr[i].probs, dprobs, dlogits);

        const auto sh = head_shape(batch[i].image->height, batch[i].image->width);
        dw_h[i].assign(p.head_w.size(), T(0));
        db_h[i].assign(p.head_b.size(), T(0));
        kernels::conv1x1_backward_weights(tr[i].l3.a.data.data(), dlogits.data.data(),
                                          dw_h[i].data(), db_h[i].data(), sh);
        Tensor<T> da3(kC3, sh.h, sh.w);
        kernels::conv1x1_backward_input(dlogits.data.data(), p.head_w.data(),
                                        da3.data.data(), sh);
        dr3[i] = Tensor<T>(kC3, sh.h, sh.w);
        kernels::relu_backward(tr[i].l3.a.data.data(), da3.data.data(),
                               dr3[i].data.data(), da3.size());
    });
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < dw_h[i].size(); ++j) g_head_w[j] += dw_h[i][j];
        for (std::size_t j = 0; j < db_h[i].size(); ++j) g_head_b[j] += db_h[i][j];
    }

    // batch-norm backward: dz = (gamma/std) * (dr - mean(dr) - xhat*mean(dr*xhat))
    auto bn_backward = [&](int channels, const std::vector<T>& gamma,
                           const BnStats& st, auto xhat_of, auto dr_of, T* g_gamma,
                           T* g_beta, std::vector<Tensor<T>>& dz_out) {
        std::size_t m = 0;
        for (std::size_t i = 0; i < nb; ++i) m += xhat_of(i).plane();
        std::vector<double> sum_dr(channels, 0.0), sum_drx(channels, 0.0);
        for (std::size_t i = 0; i < nb; ++i) {
            const Tensor<T>& xh = xhat_of(i);
            const Tensor<T>& dr = dr_of(i);
            const std::size_t n = xh.plane();
            for (int c = 0; c < channels; ++c) {
                const T* xp = xh.ch(c);
                const T* dp = dr.ch(c);
                double a = 0.0, b = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    a += static_cast<double>(dp[k]);
                    b += static_cast<double>(dp[k]) * static_cast<double>(xp[k]);
                }
                sum_dr[c] += a;
                sum_drx[c] += b;
            }
        }
        for (int c = 0; c < channels; ++c) {
            g_beta[c] += static_cast<T>(sum_dr[c]);
            g_gamma[c] += static_cast<T>(sum_drx[c]);
        }
        dz_out.resize(nb);
        parallel_for(nb, threads, [&](std::size_t i) {
            const Tensor<T>& xh = xhat_of(i);
            const Tensor<T>& dr = dr_of(i);
            dz_out[i] = Tensor<T>(xh.c, xh.h, xh.w);
            const std::size_t n = xh.plane();
            for (int c = 0; c < channels; ++c) {
                const double inv_std = 1.0 / std::sqrt(st.var[c] + kBnEps);
                const double gc = static_cast<double>(gamma[c]) * inv_std;
                const double mean_dr = sum_dr[c] / static_cast<double>(m);
                const double mean_drx = sum_drx[c] / static_cast<double>(m);
                const T* xp = xh.ch(c);
                const T* dp = dr.ch(c);
                T* zp = dz_out[i].ch(c);
                for (std::size_t k = 0; k < n; ++k)
                    zp[k] = static_cast<T>(
                        gc * (static_cast<double>(dp[k]) - mean_dr -
                              static_cast<double>(xp[k]) * mean_drx));
            }
        });
    };

    std::vector<Tensor<T>> dz3;
    bn_backward(
        kC3, p.bn3_gamma, st3, [&](std::size_t i) -> const Tensor<T>& { return tr[i].l3.xhat; },
        [&](std::size_t i) -> const Tensor<T>& { return dr3[i]; }, g_bn3_g, g_bn3_b, dz3);

    // conv3 stage
    std::vector<Tensor<T>> dr2(nb);
    std::vector<std::vector<T>> dw3(nb), db3(nb);
    parallel_for(nb, threads, [&](std::size_t i) {
        const auto s3 = conv3_shape(batch[i].image->height, batch[i].image->width);
        dw3[i].assign(p.conv3_w.size(), T(0));
        db3[i].assign(p.conv3_b.size(), T(0));
        kernels::conv3x3_backward_weights(tr[i].l2.a.data.data(), dz3[i].data.data(),
                                          dw3[i].data(), db3[i].data(), s3);
        Tensor<T> da2(kC2, s3.in_h, s3.in_w);
        kernels::conv3x3_backward_input(dz3[i].data.data(), p.conv3_w.data(),
                                        da2.data.data(), s3);
        dr2[i] = Tensor<T>(kC2, s3.in_h, s3.in_w);
        kernels::relu_backward(tr[i].l2.a.data.data(), da2.data.data(),
                               dr2[i].data.data(), da2.size());
    });
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < dw3[i].size(); ++j) g_conv3_w[j] += dw3[i][j];
        for (std::size_t j = 0; j < db3[i].size(); ++j) g_conv3_b[j] += db3[i][j];
    }

    std::vector<Tensor<T>> dz2;
    bn_backward(
        kC2, p.bn2_gamma, st2, [&](std::size_t i) -> const Tensor<T>& { return tr[i].l2.xhat; },
        [&](std::size_t i) -> const Tensor<T>& { return dr2[i]; }, g_bn2_g, g_bn2_b, dz2);

    std::vector<Tensor<T>> dr1(nb);
    std::vector<std::vector<T>> dw2(nb), db2(nb);
    parallel_for(nb, threads, [&](std::size_t i) {
        const auto s2 = conv2_shape(batch[i].image->height, batch[i].image->width);
        dw2[i].assign(p.conv2_w.size(), T(0));
        db2[i].assign(p.conv2_b.size(), T(0));
        kernels::conv3x3_backward_weights(tr[i].l1.a.data.data(), dz2[i].data.data(),
                                          dw2[i].data(), db2[i].data(), s2);
        Tensor<T> da1(kC1, s2.in_h, s2.in_w);
        kernels::conv3x3_backward_input(dz2[i].data.data(), p.conv2_w.data(),
                                        da1.data.data(), s2);
        dr1[i] = Tensor<T>(kC1, s2.in_h, s2.in_w);
        kernels::relu_backward(tr[i].l1.a.data.data(), da1.data.data(),
                               dr1[i].data.data(), da1.size());
    });
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < dw2[i].size(); ++j) g_conv2_w[j] += dw2[i][j];
        for (std::size_t j = 0; j < db2[i].size(); ++j) g_conv2_b[j] += db2[i][j];
    }

    std::vector<Tensor<T>> dz1;
    bn_backward(
        kC1, p.bn1_gamma, st1, [&](std::size_t i) -> const Tensor<T>& { return tr[i].l1.xhat; },
        [&](std::size_t i) -> const Tensor<T>& { return dr1[i]; }, g_bn1_g, g_bn1_b, dz1);

    std::vector<std::vector<T>> dw1(nb), db1(nb);
    parallel_for(nb, threads, [&](std::size_t i) {
        const auto s1 = conv1_shape(batch[i].image->height, batch[i].image->width);
        dw1[i].assign(p.conv1_w.size(), T(0));
        db1[i].assign(p.conv1_b.size(), T(0));
        kernels::conv3x3_backward_weights(tr[i].in.data.data(), dz1[i].data.data(),
                                          dw1[i].data(), db1[i].data(), s1);
        // no input gradient needed below the first conv
    });
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = 0; j < dw1[i].size(); ++j) g_conv1_w[j] += dw1[i][j];
        for (std::size_t j = 0; j < db1[i].size(); ++j) g_conv1_b[j] += db1[i][j];
    }

    return mean_loss;
}

// explicit instantiations
template struct DetectorParams<float>;
template struct DetectorParams<double>;
template DetectorParams<double> DetectorParams<float>::cast<double>() const;
template DetectorParams<float> DetectorParams<double>::cast<float>() const;
template DetectorParams<float> DetectorParams<float>::cast<float>() const;
template std::vector<ParamRef<float>> learnable_refs(DetectorParams<float>&);
template std::vector<ParamRef<double>> learnable_refs(DetectorParams<double>&);
template std::vector<ParamRef<float>> buffer_refs(DetectorParams<float>&);
template std::vector<ParamRef<double>> buffer_refs(DetectorParams<double>&);
template std::size_t learnable_size(const DetectorParams<float>&);
template std::size_t learnable_size(const DetectorParams<double>&);
template std::vector<float> flatten_learnables(const DetectorParams<float>&);
template std::vector<double> flatten_learnables(const DetectorParams<double>&);
template void load_learnables(DetectorParams<float>&, const std::vector<float>&);
template void load_learnables(DetectorParams<double>&, const std::vector<double>&);
template Plane<float> forward(const DetectorParams<float>&, const Plane<float>&);
template Plane<double> forward(const DetectorParams<double>&, const Plane<double>&);
template Tensor<float> forward_probs(const DetectorParams<float>&, const Plane<float>&);
template Tensor<double> forward_probs(const DetectorParams<double>&, const Plane<double>&);
template double heatmap_loss(const Plane<float>&, const Plane<std::uint8_t>&,
                             const Plane<std::uint8_t>&, int);
template double heatmap_loss(const Plane<double>&, const Plane<std::uint8_t>&,
                             const Plane<std::uint8_t>&, int);
template double train_forward_backward(DetectorParams<float>&,
                                       const std::vector<TrainSampleView<float>>&,
                                       int, bool, std::vector<float>*, int);
template double train_forward_backward(DetectorParams<double>&,
                                       const std::vector<TrainSampleView<double>>&,
                                       int, bool, std::vector<double>*, int);

}  // namespace sedm::nn
