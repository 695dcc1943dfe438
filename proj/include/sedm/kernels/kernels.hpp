#pragma once

#include <cstddef>

// Data-parallel inner loops of the detector: 3x3/1x1 convolution forward and
// backward passes plus ReLU. Two float backends exist — a scalar reference
// and an AVX2 variant — selected once at runtime from CPU capabilities (or
// forced via set_backend). Both backends produce identical values:
//
//   * per-output-element accumulation runs in the same (ic,ky,kx) /
//     (oc,ky,kx) order in both backends, so forward and backward-input
//     kernels match bit for bit;
//   * cross-pixel reductions (weight/bias gradients) accumulate into eight
//     banks keyed by ox mod 8 and are combined by the same fixed tree, so
//     the vectorized reduction reproduces the scalar one exactly;
//   * kernel translation units are compiled with -ffp-contract=off so no
//     backend silently fuses multiply-adds.
//
// The equivalence test suite asserts exact value equality between backends.
// Double-precision overloads (scalar only) back the gradient-check path.

namespace sedm::kernels {

/// 3x3 convolution geometry, zero padding of 1 on both axes.
/// out_h = (in_h - 1) / stride + 1 and likewise for width.
struct Conv3x3Shape {
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0;
    int stride = 1;  // 1 or 2

    int out_h() const { return (in_h - 1) / stride + 1; }
    int out_w() const { return (in_w - 1) / stride + 1; }
};

struct Conv1x1Shape {
    int in_c = 0, h = 0, w = 0;
    int out_c = 0;
};

// Weight layout is canonical [oc][ic][ky][kx]; bias is [oc].
// in: [ic][y][x], out: [oc][y][x], all dense row-major.

void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s);
void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s);
void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s);

void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s);
void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s);
void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s);

void relu_forward(const float* x, float* y, std::size_t n);
// dx = (x_pre > 0) ? dy : 0
void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n);

// Scalar-only double-precision path (gradient checks, reference math).
void conv3x3_forward(const double* in, const double* w, const double* b,
                     double* out, const Conv3x3Shape& s);
void conv3x3_backward_input(const double* dout, const double* w, double* din,
                            const Conv3x3Shape& s);
void conv3x3_backward_weights(const double* in, const double* dout, double* dw,
                              double* db, const Conv3x3Shape& s);
void conv1x1_forward(const double* in, const double* w, const double* b,
                     double* out, const Conv1x1Shape& s);
void conv1x1_backward_input(const double* dout, const double* w, double* din,
                            const Conv1x1Shape& s);
void conv1x1_backward_weights(const double* in, const double* dout, double* dw,
                              double* db, const Conv1x1Shape& s);
void relu_forward(const double* x, double* y, std::size_t n);
void relu_backward(const double* x_pre, const double* dy, double* dx,
                   std::size_t n);

enum class Backend { Auto, Scalar, Avx2 };

/// Forces a backend for subsequent float kernel calls. Avx2 on a CPU
/// without AVX2 throws std::runtime_error.
void set_backend(Backend b);
Backend active_backend();
bool avx2_available();
const char* backend_name(Backend b);

/// Fixed combine order for the 8 reduction banks; shared by all backends.
template <typename T>
inline T bank_reduce(const T lanes[8]) {
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

namespace scalar {
void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s);
void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s);
void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s);
void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s);
void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s);
void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s);
void relu_forward(const float* x, float* y, std::size_t n);
void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s);
void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s);
void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s);
void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s);
void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s);
void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s);
void relu_forward(const float* x, float* y, std::size_t n);
void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n);
}  // namespace avx2
#endif

}  // namespace sedm::kernels
