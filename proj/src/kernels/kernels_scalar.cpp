// Reference kernels. These define the numeric contract: every other backend
// must reproduce these values exactly (same per-element accumulation order,
// same banked reductions, no contraction).

#include <algorithm>
#include <cstddef>

#include "sedm/kernels/kernels.hpp"

namespace sedm::kernels {
namespace {

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

template <typename T>
void conv3x3_forward_impl(const T* in, const T* w, const T* b, T* out,
                          const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* wc = w + static_cast<std::size_t>(oc) * s.in_c * 9;
        T* dst = out + oc * out_plane;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T acc = b[oc];
                for (int ic = 0; ic < s.in_c; ++ic) {
                    const T* src = in + ic * in_plane;
                    const T* wk = wc + ic * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * s.stride + ky - 1;
                        if (iy < 0 || iy >= s.in_h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * s.stride + kx - 1;
                            if (ix < 0 || ix >= s.in_w) continue;
                            acc += wk[ky * 3 + kx] *
                                   src[static_cast<std::size_t>(iy) * s.in_w + ix];
                        }
                    }
                }
                dst[static_cast<std::size_t>(oy) * ow + ox] = acc;
            }
        }
    }
}

template <typename T>
void conv3x3_backward_input_impl(const T* dout, const T* w, T* din,
                                 const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int ic = 0; ic < s.in_c; ++ic) {
        T* dst = din + ic * in_plane;
        for (int iy = 0; iy < s.in_h; ++iy) {
            for (int ix = 0; ix < s.in_w; ++ix) {
                T acc = T(0);
                for (int oc = 0; oc < s.out_c; ++oc) {
                    const T* wk = w + (static_cast<std::size_t>(oc) * s.in_c + ic) * 9;
                    const T* g = dout + oc * out_plane;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int ty = iy + 1 - ky;
                        if (ty < 0 || ty % s.stride != 0) continue;
                        const int oy = ty / s.stride;
                        if (oy >= oh) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int tx = ix + 1 - kx;
                            if (tx < 0 || tx % s.stride != 0) continue;
                            const int ox = tx / s.stride;
                            if (ox >= ow) continue;
                            acc += wk[ky * 3 + kx] *
                                   g[static_cast<std::size_t>(oy) * ow + ox];
                        }
                    }
                }
                dst[static_cast<std::size_t>(iy) * s.in_w + ix] = acc;
            }
        }
    }
}

template <typename T>
void conv3x3_backward_weights_impl(const T* in, const T* dout, T* dw, T* db,
                                   const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* g = dout + oc * out_plane;
        for (int ic = 0; ic < s.in_c; ++ic) {
            const T* src = in + ic * in_plane;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy_lo = std::max(0, ceil_div(1 - ky, s.stride));
                const int oy_hi = std::min(oh - 1, floor_div(s.in_h - ky, s.stride));
                for (int kx = 0; kx < 3; ++kx) {
                    const int ox_lo = std::max(0, ceil_div(1 - kx, s.stride));
                    const int ox_hi = std::min(ow - 1, floor_div(s.in_w - kx, s.stride));
                    T lanes[8] = {};
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * s.stride + ky - 1;
                        const T* grow = g + static_cast<std::size_t>(oy) * ow;
                        const T* irow = src + static_cast<std::size_t>(iy) * s.in_w;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                            lanes[ox & 7] += grow[ox] * irow[ox * s.stride + kx - 1];
                        }
                    }
                    dw[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx] =
                        bank_reduce(lanes);
                }
            }
        }
        T lanes[8] = {};
        for (int oy = 0; oy < oh; ++oy) {
            const T* grow = g + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) lanes[ox & 7] += grow[ox];
        }
        db[oc] = bank_reduce(lanes);
    }
}

template <typename T>
void conv1x1_forward_impl(const T* in, const T* w, const T* b, T* out,
                          const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* wc = w + static_cast<std::size_t>(oc) * s.in_c;
        T* dst = out + oc * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            T acc = b[oc];
            for (int ic = 0; ic < s.in_c; ++ic) acc += wc[ic] * in[ic * plane + p];
            dst[p] = acc;
        }
    }
}

template <typename T>
void conv1x1_backward_input_impl(const T* dout, const T* w, T* din,
                                 const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int ic = 0; ic < s.in_c; ++ic) {
        T* dst = din + ic * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            T acc = T(0);
            for (int oc = 0; oc < s.out_c; ++oc)
                acc += w[static_cast<std::size_t>(oc) * s.in_c + ic] *
                       dout[oc * plane + p];
            dst[p] = acc;
        }
    }
}

template <typename T>
void conv1x1_backward_weights_impl(const T* in, const T* dout, T* dw, T* db,
                                   const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const T* g = dout + oc * plane;
        for (int ic = 0; ic < s.in_c; ++ic) {
            const T* src = in + ic * plane;
            T lanes[8] = {};
            for (std::size_t p = 0; p < plane; ++p) lanes[p & 7] += g[p] * src[p];
            dw[static_cast<std::size_t>(oc) * s.in_c + ic] = bank_reduce(lanes);
        }
        T lanes[8] = {};
        for (std::size_t p = 0; p < plane; ++p) lanes[p & 7] += g[p];
        db[oc] = bank_reduce(lanes);
    }
}

template <typename T>
void relu_forward_impl(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_impl(const T* x_pre, const T* dy, T* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x_pre[i] > T(0) ? dy[i] : T(0);
}

}  // namespace

namespace scalar {

void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s) {
    conv3x3_forward_impl(in, w, b, out, s);
}
void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s) {
    conv3x3_backward_input_impl(dout, w, din, s);
}
void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s) {
    conv3x3_backward_weights_impl(in, dout, dw, db, s);
}
void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s) {
    conv1x1_forward_impl(in, w, b, out, s);
}
void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s) {
    conv1x1_backward_input_impl(dout, w, din, s);
}
void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s) {
    conv1x1_backward_weights_impl(in, dout, dw, db, s);
}
void relu_forward(const float* x, float* y, std::size_t n) {
    relu_forward_impl(x, y, n);
}
void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n) {
    relu_backward_impl(x_pre, dy, dx, n);
}

}  // namespace scalar

// double overloads: always the scalar reference
void conv3x3_forward(const double* in, const double* w, const double* b,
                     double* out, const Conv3x3Shape& s) {
    conv3x3_forward_impl(in, w, b, out, s);
}
void conv3x3_backward_input(const double* dout, const double* w, double* din,
                            const Conv3x3Shape& s) {
    conv3x3_backward_input_impl(dout, w, din, s);
}
void conv3x3_backward_weights(const double* in, const double* dout, double* dw,
                              double* db, const Conv3x3Shape& s) {
    conv3x3_backward_weights_impl(in, dout, dw, db, s);
}
void conv1x1_forward(const double* in, const double* w, const double* b,
                     double* out, const Conv1x1Shape& s) {
    conv1x1_forward_impl(in, w, b, out, s);
}
void conv1x1_backward_input(const double* dout, const double* w, double* din,
                            const Conv1x1Shape& s) {
    conv1x1_backward_input_impl(dout, w, din, s);
}
void conv1x1_backward_weights(const double* in, const double* dout, double* dw,
                              double* db, const Conv1x1Shape& s) {
    conv1x1_backward_weights_impl(in, dout, dw, db, s);
}
void relu_forward(const double* x, double* y, std::size_t n) {
    relu_forward_impl(x, y, n);
}
void relu_backward(const double* x_pre, const double* dy, double* dx,
                   std::size_t n) {
    relu_backward_impl(x_pre, dy, dx, n);
}

}  // namespace sedm::kernels
