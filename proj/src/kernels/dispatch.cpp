#include <atomic>
#include <stdexcept>

#include "sedm/kernels/kernels.hpp"

namespace sedm::kernels {

namespace {

#if defined(__x86_64__) || defined(_M_X64)
bool detect_avx2() { return __builtin_cpu_supports("avx2"); }
#else
bool detect_avx2() { return false; }
#endif

std::atomic<Backend> g_backend{Backend::Auto};

Backend resolved() {
    const Backend b = g_backend.load(std::memory_order_relaxed);
    if (b != Backend::Auto) return b;
    static const Backend auto_pick = avx2_available() ? Backend::Avx2 : Backend::Scalar;
    return auto_pick;
}

}  // namespace

bool avx2_available() {
    static const bool have = detect_avx2();
    return have;
}

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_available())
        throw std::runtime_error("kernels: AVX2 backend requested but not available");
    g_backend.store(b, std::memory_order_relaxed);
}

Backend active_backend() { return resolved(); }

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Auto: return "auto";
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
    }
    return "?";
}

#if defined(__x86_64__) || defined(_M_X64)
#define SEDM_DISPATCH(fn, ...)                  \
    if (resolved() == Backend::Avx2) {          \
        avx2::fn(__VA_ARGS__);                  \
    } else {                                    \
        scalar::fn(__VA_ARGS__);                \
    }
#else
#define SEDM_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s) {
    SEDM_DISPATCH(conv3x3_forward, in, w, b, out, s)
}
void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s) {
    SEDM_DISPATCH(conv3x3_backward_input, dout, w, din, s)
}
void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s) {
    SEDM_DISPATCH(conv3x3_backward_weights, in, dout, dw, db, s)
}
void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s) {
    SEDM_DISPATCH(conv1x1_forward, in, w, b, out, s)
}
void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s) {
    SEDM_DISPATCH(conv1x1_backward_input, dout, w, din, s)
}
void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s) {
    SEDM_DISPATCH(conv1x1_backward_weights, in, dout, dw, db, s)
}
void relu_forward(const float* x, float* y, std::size_t n) {
    SEDM_DISPATCH(relu_forward, x, y, n)
}
void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n) {
    SEDM_DISPATCH(relu_backward, x_pre, dy, dx, n)
}

#undef SEDM_DISPATCH

}  // namespace sedm::kernels
