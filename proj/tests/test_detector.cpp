#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sedm/kernels/kernels.hpp"
#include "sedm/nn/adam.hpp"
#include "sedm/nn/augment.hpp"
#include "sedm/nn/net.hpp"
#include "sedm/rng.hpp"

using namespace sedm;
using namespace sedm::nn;

namespace {

Plane<float> random_image(int w, int h, Rng& rng) {
    Plane<float> img(w, h);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

template <typename T>
Plane<T> cast_plane(const Plane<float>& p) {
    Plane<T> out(p.width, p.height);
    for (std::size_t i = 0; i < p.size(); ++i) out.data[i] = static_cast<T>(p.data[i]);
    return out;
}

// independently coded scalar-loop loss oracle
double loss_oracle(const Plane<double>& x, const Plane<std::uint8_t>& y,
                   const Plane<std::uint8_t>& valid, int border) {
    double total = 0.0;
    for (int row = 0; row < x.height; ++row)
        for (int col = 0; col < x.width; ++col) {
            if (row < border || row >= x.height - border) continue;
            if (col < border || col >= x.width - border) continue;
            if (!valid.at(col, row)) continue;
            double v = x.at(col, row);
            if (v < 1e-7) v = 1e-7;
            if (v > 1.0 - 1e-7) v = 1.0 - 1e-7;
            total += -(y.at(col, row) * std::log(v) +
                       (1 - y.at(col, row)) * std::log(1.0 - v));
        }
    return total;
}

}  // namespace

TEST_CASE("zero-weight detector outputs the uniform heatmap 1/65") {
    const auto params = DetectorParams<float>::zeros();
    Plane<float> img(16, 16, 0.37f);
    const auto heat = forward(params, img);
    for (const float v : heat.data)
        CHECK(std::abs(v - 1.0f / 65.0f) < 1e-6f);
}

TEST_CASE("forward rejects dimensions not divisible by 8") {
    const auto params = DetectorParams<float>::zeros();
    Plane<float> img(20, 16, 0.5f);
    CHECK_THROWS_AS(forward(params, img), std::invalid_argument);
}

TEST_CASE("per-cell softmax simplex holds on random inputs") {
    Rng rng(100);
    for (int trial = 0; trial < 5; ++trial) {
        const auto params = DetectorParams<float>::he_init(trial);
        const auto img = random_image(32, 24, rng);
        const auto probs = forward_probs(params, img);
        REQUIRE(probs.c == 65);
        for (int gy = 0; gy < probs.h; ++gy)
            for (int gx = 0; gx < probs.w; ++gx) {
                double sum = 0.0;
                for (int t = 0; t < 65; ++t) sum += probs.at(t, gy, gx);
                CHECK(std::abs(sum - 1.0) < 1e-6);
            }
        // heatmap values are the non-dustbin entries, so each cell sums to <= 1
        const auto heat = forward(params, img);
        for (int cy = 0; cy < heat.height / 8; ++cy)
            for (int cx = 0; cx < heat.width / 8; ++cx) {
                double sum = 0.0;
                for (int dy = 0; dy < 8; ++dy)
                    for (int dx = 0; dx < 8; ++dx)
                        sum += heat.at(cx * 8 + dx, cy * 8 + dy);
                CHECK(sum <= 1.0 + 1e-6);
                CHECK(sum >= 0.0);
            }
    }
}

TEST_CASE("fresh detector starts near uniform") {
    Rng rng(5);
    const auto params = DetectorParams<float>::he_init(900);
    const auto img = random_image(64, 64, rng);
    const auto heat = forward(params, img);
    float lo = 1.0f, hi = 0.0f;
    for (const float v : heat.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi / lo < 50.0f);
}

TEST_CASE("single-pixel loss equals -log 0.5") {
    Plane<float> x(16, 16, 0.0f);
    Plane<std::uint8_t> y(16, 16, 0);
    Plane<std::uint8_t> valid(16, 16, 0);
    x.at(8, 8) = 0.5f;
    y.at(8, 8) = 1;
    valid.at(8, 8) = 1;
    const double loss = heatmap_loss(x, y, valid, 4);
    CHECK(std::abs(loss - 0.69314718055994531) < 1e-9);
}

TEST_CASE("loss matches the scalar-loop oracle on random 16x16 inputs") {
    Rng rng(200);
    for (int trial = 0; trial < 20; ++trial) {
        Plane<double> x(16, 16);
        Plane<std::uint8_t> y(16, 16), valid(16, 16);
        for (auto& v : x.data) v = rng.uniform();
        for (auto& v : y.data) v = rng.uniform() < 0.1 ? 1 : 0;
        for (auto& v : valid.data) v = rng.uniform() < 0.8 ? 1 : 0;
        const double got = heatmap_loss(x, y, valid, 4);
        const double want = loss_oracle(x, y, valid, 4);
        CHECK(std::abs(got - want) < 1e-10);
    }
}

TEST_CASE("loss of a perfect prediction is near zero") {
    Plane<float> x(16, 16, 1e-7f);
    Plane<std::uint8_t> y(16, 16, 0);
    Plane<std::uint8_t> valid(16, 16, 1);
    x.at(8, 8) = 1.0f - 1e-7f;
    y.at(8, 8) = 1;
    const double loss = heatmap_loss(x, y, valid, 4);
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-4);
}

TEST_CASE("loss dimension mismatch throws") {
    Plane<float> x(16, 16);
    Plane<std::uint8_t> y(16, 8), valid(16, 16);
    CHECK_THROWS_AS(heatmap_loss(x, y, valid, 4), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences (double path)") {
    Rng rng(300);
    DetectorParams<double> params = DetectorParams<float>::he_init(77).cast<double>();
    const auto img = cast_plane<double>(random_image(16, 16, rng));
    Plane<std::uint8_t> labels(16, 16, 0), valid(16, 16, 1);
    for (int i = 0; i < 6; ++i)
        labels.at(4 + static_cast<int>(rng.uniform_int(8)),
                  4 + static_cast<int>(rng.uniform_int(8))) = 1;
    const std::vector<TrainSampleView<double>> batch = {{&img, &labels, &valid}};

    std::vector<double> grads;
    train_forward_backward(params, batch, 4, false, &grads);

    const double h = 1e-4;
    std::size_t offset = 0;
    int checked = 0;
    for (auto& ref : learnable_refs(params)) {
        const std::size_t n = ref.vec->size();
        for (int k = 0; k < 12; ++k) {
            const std::size_t j = rng.uniform_int(n);
            const double saved = (*ref.vec)[j];
            (*ref.vec)[j] = saved + h;
            const double lp = train_forward_backward(params, batch, 4, false,
                                                     static_cast<std::vector<double>*>(nullptr));
            (*ref.vec)[j] = saved - h;
            const double lm = train_forward_backward(params, batch, 4, false,
                                                     static_cast<std::vector<double>*>(nullptr));
            (*ref.vec)[j] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = grads[offset + j];
            const double err = std::abs(fd - an);
            const bool ok = err < 1e-3 * std::max(std::abs(fd), std::abs(an)) ||
                            err < 1e-6;
            if (!ok)
                MESSAGE("param ", ref.name, "[", j, "]: analytic ", an, " fd ", fd);
            CHECK(ok);
            ++checked;
        }
        offset += n;
    }
    CHECK(checked >= 12 * 14);
}

TEST_CASE("float backward agrees with the double reference backward") {
    Rng rng(301);
    DetectorParams<float> pf = DetectorParams<float>::he_init(78);
    DetectorParams<double> pd = pf.cast<double>();
    const auto img_f = random_image(16, 16, rng);
    const auto img_d = cast_plane<double>(img_f);
    Plane<std::uint8_t> labels(16, 16, 0), valid(16, 16, 1);
    labels.at(7, 9) = 1;
    labels.at(11, 5) = 1;

    std::vector<float> gf;
    std::vector<double> gd;
    const std::vector<TrainSampleView<float>> bf = {{&img_f, &labels, &valid}};
    const std::vector<TrainSampleView<double>> bd = {{&img_d, &labels, &valid}};
    const double lf = train_forward_backward(pf, bf, 4, false, &gf);
    const double ld = train_forward_backward(pd, bd, 4, false, &gd);
    CHECK(std::abs(lf - ld) < 1e-3 * std::max(1.0, std::abs(ld)));
    REQUIRE(gf.size() == gd.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i)
        worst = std::max(worst, std::abs(double(gf[i]) - gd[i]) /
                                    std::max(1.0, std::abs(gd[i])));
    CHECK(worst < 1e-3);
}

TEST_CASE("empty valid mask gives zero loss and zero gradients") {
    DetectorParams<float> params = DetectorParams<float>::he_init(79);
    Plane<float> img(16, 16, 0.5f);
    Plane<std::uint8_t> labels(16, 16, 0), valid(16, 16, 0);
    std::vector<float> grads;
    const std::vector<TrainSampleView<float>> batch = {{&img, &labels, &valid}};
    const double loss = train_forward_backward(params, batch, 4, false, &grads);
    CHECK(loss == 0.0);
    for (const float g : grads) CHECK(g == 0.0f);
}

TEST_CASE("head bias gradient sums to zero (softmax per-cell property)") {
    Rng rng(302);
    DetectorParams<float> params = DetectorParams<float>::he_init(80);
    const auto img = random_image(16, 16, rng);
    Plane<std::uint8_t> labels(16, 16, 0), valid(16, 16, 1);
    labels.at(8, 8) = 1;
    std::vector<float> grads;
    const std::vector<TrainSampleView<float>> batch = {{&img, &labels, &valid}};
    train_forward_backward(params, batch, 4, false, &grads);
    // head.b is the last 65 entries of the flat gradient
    double sum = 0.0, mag = 0.0;
    for (std::size_t i = grads.size() - 65; i < grads.size(); ++i) {
        sum += grads[i];
        mag += std::abs(grads[i]);
    }
    CHECK(std::abs(sum) < 1e-4 * std::max(1.0, mag));
}

TEST_CASE("forward is identical under scalar and avx2 backends") {
    if (!kernels::avx2_available()) return;
    Rng rng(303);
    const auto params = DetectorParams<float>::he_init(81);
    const auto img = random_image(32, 32, rng);
    kernels::set_backend(kernels::Backend::Scalar);
    const auto a = forward(params, img);
    kernels::set_backend(kernels::Backend::Avx2);
    const auto b = forward(params, img);
    kernels::set_backend(kernels::Backend::Auto);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.data[i] == b.data[i]);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    DetectorParams<float> params = DetectorParams<float>::he_init(82);
    const auto before = flatten_learnables(params);
    AdamState st = AdamState::zeros(before.size());
    const std::vector<float> zeros(before.size(), 0.0f);
    adam_step(params, zeros, st);
    CHECK(st.step == 1);
    const auto after = flatten_learnables(params);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("adam: first step moves each parameter by about lr") {
    DetectorParams<float> params = DetectorParams<float>::he_init(83);
    const auto before = flatten_learnables(params);
    AdamState st = AdamState::zeros(before.size());
    const std::vector<float> grads(before.size(), 0.7f);
    AdamConfig cfg;
    cfg.lr = 1e-4;
    adam_step(params, grads, st, cfg);
    const auto after = flatten_learnables(params);
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double delta = double(before[i]) - double(after[i]);
        CHECK(delta == doctest::Approx(1e-4).epsilon(1e-3));
    }
}

TEST_CASE("adam: rejects non-finite gradients") {
    DetectorParams<float> params = DetectorParams<float>::he_init(84);
    AdamState st = AdamState::zeros(learnable_size(params));
    std::vector<float> grads(learnable_size(params), 0.0f);
    grads[17] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(params, grads, st), std::runtime_error);
}

TEST_CASE("ten adam steps on one sample strictly decrease the loss") {
    Rng rng(304);
    DetectorParams<float> params = DetectorParams<float>::he_init(85);
    const auto img = random_image(16, 16, rng);
    Plane<std::uint8_t> labels(16, 16, 0), valid(16, 16, 1);
    labels.at(8, 8) = 1;
    AdamState st = AdamState::zeros(learnable_size(params));
    AdamConfig cfg;
    cfg.lr = 1e-3;
    const std::vector<TrainSampleView<float>> batch = {{&img, &labels, &valid}};
    double prev = 1e18;
    for (int i = 0; i < 10; ++i) {
        std::vector<float> grads;
        const double loss = train_forward_backward(params, batch, 4, true, &grads);
        CHECK(loss < prev);
        prev = loss;
        adam_step(params, grads, st, cfg);
    }
}

TEST_CASE("identity augmentation config is a no-op") {
    Rng rng(400);
    TrainSample s;
    s.image = random_image(32, 32, rng);
    s.labels = Plane<std::uint8_t>(32, 32, 0);
    s.labels.at(10, 12) = 1;
    s.valid = Plane<std::uint8_t>(32, 32, 1);
    const auto out = augment(s, AugmentConfig::identity(), 123);
    CHECK(out.image.data == s.image.data);
    CHECK(out.labels.data == s.labels.data);
    CHECK(out.valid.data == s.valid.data);
}

TEST_CASE("photometric-only augmentation leaves the masks alone") {
    Rng rng(401);
    TrainSample s;
    s.image = random_image(32, 32, rng);
    s.labels = Plane<std::uint8_t>(32, 32, 0);
    s.labels.at(20, 8) = 1;
    s.valid = Plane<std::uint8_t>(32, 32, 1);
    AugmentConfig cfg = AugmentConfig::identity();
    cfg.brightness = true;
    cfg.brightness_max = 0.2;
    const auto out = augment(s, cfg, 7);
    CHECK(out.labels.data == s.labels.data);
    CHECK(out.valid.data == s.valid.data);
    CHECK(out.image.data != s.image.data);
}

TEST_CASE("warped keypoints follow the augmentation homography") {
    TrainSample s;
    s.image = Plane<float>(64, 64, 0.1f);
    s.labels = Plane<std::uint8_t>(64, 64, 0);
    s.valid = Plane<std::uint8_t>(64, 64, 1);
    const int px = 24, py = 40;
    s.labels.at(px, py) = 1;
    s.image.at(px, py) = 1.0f;  // marker

    AugmentConfig cfg = AugmentConfig::identity();
    cfg.warp = true;
    const std::uint64_t seed = 99;
    const Homography H = augment_homography(64, 64, cfg, seed);
    const Vec2 expected = warp_homography({double(px), double(py)}, H);
    const int qx = static_cast<int>(std::lround(expected.x));
    const int qy = static_cast<int>(std::lround(expected.y));

    const auto out = augment(s, cfg, seed);
    if (qx >= 4 && qx < 60 && qy >= 4 && qy < 60) {
        CHECK(out.labels.at(qx, qy) == 1);
        // the image marker must move with the same transform
        float best = -1.0f;
        int bx = -1, by = -1;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (out.image.at(x, y) > best) {
                    best = out.image.at(x, y);
                    bx = x;
                    by = y;
                }
        CHECK(std::abs(bx - qx) <= 1);
        CHECK(std::abs(by - qy) <= 1);
    } else {
        // keypoint dropped if it left the usable area
        int count = 0;
        for (const auto v : out.labels.data) count += v;
        CHECK(count == 0);
    }
}

TEST_CASE("augmentation is deterministic in the seed") {
    Rng rng(402);
    TrainSample s;
    s.image = random_image(32, 32, rng);
    s.labels = Plane<std::uint8_t>(32, 32, 0);
    s.valid = Plane<std::uint8_t>(32, 32, 1);
    AugmentConfig cfg;  // everything on
    const auto a = augment(s, cfg, 555);
    const auto b = augment(s, cfg, 555);
    CHECK(a.image.data == b.image.data);
    CHECK(a.labels.data == b.labels.data);
    const auto c = augment(s, cfg, 556);
    CHECK(a.image.data != c.image.data);
}
