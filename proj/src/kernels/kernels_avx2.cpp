// AVX2 kernels. Values must match the scalar reference exactly: the same
// per-element accumulation order, the same 8-bank reductions, mul+add kept
// separate (this TU is compiled with -mavx2 -ffp-contract=off, no FMA).

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "sedm/kernels/kernels.hpp"

namespace sedm::kernels::avx2 {
namespace {

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Extracts p[0], p[2], ..., p[14] into one vector. Reads 16 floats.
inline __m256 load_stride2(const float* p) {
    const __m256 a = _mm256_loadu_ps(p);
    const __m256 b = _mm256_loadu_ps(p + 8);
    const __m256 s = _mm256_shuffle_ps(a, b, _MM_SHUFFLE(2, 0, 2, 0));
    return _mm256_permutevar8x32_ps(s, _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7));
}

constexpr int kMaxBlocks = 8;  // 64 vectorized channels is plenty here

}  // namespace

void conv3x3_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    const int ocv = std::min(s.out_c & ~7, kMaxBlocks * 8);
    const int nblocks = ocv / 8;

    // weights repacked with oc innermost: wp[((ic*3+ky)*3+kx)*ocv + oc]
    std::vector<float> wp(static_cast<std::size_t>(s.in_c) * 9 * ocv);
    for (int ic = 0; ic < s.in_c; ++ic)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                for (int oc = 0; oc < ocv; ++oc)
                    wp[((static_cast<std::size_t>(ic) * 3 + ky) * 3 + kx) * ocv + oc] =
                        w[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx];

    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            __m256 acc[kMaxBlocks];
            for (int bl = 0; bl < nblocks; ++bl)
                acc[bl] = _mm256_loadu_ps(b + bl * 8);
            for (int ic = 0; ic < s.in_c; ++ic) {
                const float* src = in + ic * in_plane;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = oy * s.stride + ky - 1;
                    if (iy < 0 || iy >= s.in_h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = ox * s.stride + kx - 1;
                        if (ix < 0 || ix >= s.in_w) continue;
                        const __m256 xv = _mm256_broadcast_ss(
                            &src[static_cast<std::size_t>(iy) * s.in_w + ix]);
                        const float* wrow =
                            wp.data() +
                            ((static_cast<std::size_t>(ic) * 3 + ky) * 3 + kx) * ocv;
                        for (int bl = 0; bl < nblocks; ++bl)
                            acc[bl] = _mm256_add_ps(
                                acc[bl],
                                _mm256_mul_ps(_mm256_loadu_ps(wrow + bl * 8), xv));
                    }
                }
            }
            const std::size_t pix = static_cast<std::size_t>(oy) * ow + ox;
            alignas(32) float tmp[8];
            for (int bl = 0; bl < nblocks; ++bl) {
                _mm256_store_ps(tmp, acc[bl]);
                for (int j = 0; j < 8; ++j) out[(bl * 8 + j) * out_plane + pix] = tmp[j];
            }
            // tail channels, scalar (same accumulation order)
            for (int oc = ocv; oc < s.out_c; ++oc) {
                float a = b[oc];
                const float* wc = w + static_cast<std::size_t>(oc) * s.in_c * 9;
                for (int ic = 0; ic < s.in_c; ++ic) {
                    const float* src = in + ic * in_plane;
                    const float* wk = wc + ic * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * s.stride + ky - 1;
                        if (iy < 0 || iy >= s.in_h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * s.stride + kx - 1;
                            if (ix < 0 || ix >= s.in_w) continue;
                            a += wk[ky * 3 + kx] *
                                 src[static_cast<std::size_t>(iy) * s.in_w + ix];
                        }
                    }
                }
                out[oc * out_plane + pix] = a;
            }
        }
    }
}

void conv3x3_backward_input(const float* dout, const float* w, float* din,
                            const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    const int icv = std::min(s.in_c & ~7, kMaxBlocks * 8);
    const int nblocks = icv / 8;

    // weights repacked with ic innermost: wp[((oc*3+ky)*3+kx)*icv + ic]
    std::vector<float> wp(static_cast<std::size_t>(s.out_c) * 9 * icv);
    for (int oc = 0; oc < s.out_c; ++oc)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                for (int ic = 0; ic < icv; ++ic)
                    wp[((static_cast<std::size_t>(oc) * 3 + ky) * 3 + kx) * icv + ic] =
                        w[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx];

    for (int iy = 0; iy < s.in_h; ++iy) {
        for (int ix = 0; ix < s.in_w; ++ix) {
            __m256 acc[kMaxBlocks];
            for (int bl = 0; bl < nblocks; ++bl) acc[bl] = _mm256_setzero_ps();
            for (int oc = 0; oc < s.out_c; ++oc) {
                const float* g = dout + oc * out_plane;
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
                        const __m256 gv = _mm256_broadcast_ss(
                            &g[static_cast<std::size_t>(oy) * ow + ox]);
                        const float* wrow =
                            wp.data() +
                            ((static_cast<std::size_t>(oc) * 3 + ky) * 3 + kx) * icv;
                        for (int bl = 0; bl < nblocks; ++bl)
                            acc[bl] = _mm256_add_ps(
                                acc[bl],
                                _mm256_mul_ps(_mm256_loadu_ps(wrow + bl * 8), gv));
                    }
                }
            }
            const std::size_t pix = static_cast<std::size_t>(iy) * s.in_w + ix;
            alignas(32) float tmp[8];
            for (int bl = 0; bl < nblocks; ++bl) {
                _mm256_store_ps(tmp, acc[bl]);
                for (int j = 0; j < 8; ++j) din[(bl * 8 + j) * in_plane + pix] = tmp[j];
            }
            for (int ic = icv; ic < s.in_c; ++ic) {
                float a = 0.0f;
                for (int oc = 0; oc < s.out_c; ++oc) {
                    const float* wk = w + (static_cast<std::size_t>(oc) * s.in_c + ic) * 9;
                    const float* g = dout + oc * out_plane;
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
                            a += wk[ky * 3 + kx] * g[static_cast<std::size_t>(oy) * ow + ox];
                        }
                    }
                }
                din[ic * in_plane + pix] = a;
            }
        }
    }
}

void conv3x3_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv3x3Shape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(s.in_h) * s.in_w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const float* g = dout + oc * out_plane;
        for (int ic = 0; ic < s.in_c; ++ic) {
            const float* src = in + ic * in_plane;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy_lo = std::max(0, ceil_div(1 - ky, s.stride));
                const int oy_hi = std::min(oh - 1, floor_div(s.in_h - ky, s.stride));
                for (int kx = 0; kx < 3; ++kx) {
                    const int ox_lo = std::max(0, ceil_div(1 - kx, s.stride));
                    int ox_hi = std::min(ow - 1, floor_div(s.in_w - kx, s.stride));
                    // lane j accumulates ox == j (mod 8), ascending, exactly
                    // like the reference
                    alignas(32) float lanes[8] = {};
                    const int vstart = (ox_lo + 7) & ~7;
                    // stride-2 vector loads read one float past the last used
                    // element; keep that read inside the row
                    int vend = vstart;
                    if (ox_hi >= vstart) {
                        int last_block = ((ox_hi + 1 - vstart) / 8) * 8 + vstart - 8;
                        while (last_block >= vstart &&
                               s.stride == 2 &&
                               (last_block + 7) * 2 + kx - 1 + 1 > s.in_w - 1)
                            last_block -= 8;
                        vend = std::max(vstart, last_block + 8);
                    }
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * s.stride + ky - 1;
                        const float* grow = g + static_cast<std::size_t>(oy) * ow;
                        const float* irow = src + static_cast<std::size_t>(iy) * s.in_w;
                        int ox = ox_lo;
                        for (; ox < std::min(vstart, ox_hi + 1); ++ox)
                            lanes[ox & 7] += grow[ox] * irow[ox * s.stride + kx - 1];
                        if (ox < vend) {
                            __m256 v = _mm256_load_ps(lanes);
                            for (; ox + 8 <= vend; ox += 8) {
                                const __m256 gv = _mm256_loadu_ps(grow + ox);
                                const __m256 iv =
                                    s.stride == 2
                                        ? load_stride2(irow + ox * 2 + kx - 1)
                                        : _mm256_loadu_ps(irow + ox + kx - 1);
                                v = _mm256_add_ps(v, _mm256_mul_ps(gv, iv));
                            }
                            _mm256_store_ps(lanes, v);
                        }
                        for (; ox <= ox_hi; ++ox)
                            lanes[ox & 7] += grow[ox] * irow[ox * s.stride + kx - 1];
                    }
                    dw[((static_cast<std::size_t>(oc) * s.in_c + ic) * 3 + ky) * 3 + kx] =
                        bank_reduce(lanes);
                }
            }
        }
        alignas(32) float lanes[8] = {};
        {
            __m256 v = _mm256_load_ps(lanes);
            for (int oy = 0; oy < oh; ++oy) {
                const float* grow = g + static_cast<std::size_t>(oy) * ow;
                int ox = 0;
                for (; ox + 8 <= ow; ox += 8)
                    v = _mm256_add_ps(v, _mm256_loadu_ps(grow + ox));
                if (ox < ow) {
                    _mm256_store_ps(lanes, v);
                    for (; ox < ow; ++ox) lanes[ox & 7] += grow[ox];
                    v = _mm256_load_ps(lanes);
                }
            }
            _mm256_store_ps(lanes, v);
        }
        db[oc] = bank_reduce(lanes);
    }
}

void conv1x1_forward(const float* in, const float* w, const float* b, float* out,
                     const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const std::size_t pv = plane & ~std::size_t{7};
    for (int oc = 0; oc < s.out_c; ++oc) {
        const float* wc = w + static_cast<std::size_t>(oc) * s.in_c;
        float* dst = out + oc * plane;
        for (std::size_t p = 0; p < pv; p += 8) {
            __m256 acc = _mm256_broadcast_ss(b + oc);
            for (int ic = 0; ic < s.in_c; ++ic)
                acc = _mm256_add_ps(
                    acc, _mm256_mul_ps(_mm256_broadcast_ss(wc + ic),
                                       _mm256_loadu_ps(in + ic * plane + p)));
            _mm256_storeu_ps(dst + p, acc);
        }
        for (std::size_t p = pv; p < plane; ++p) {
            float acc = b[oc];
            for (int ic = 0; ic < s.in_c; ++ic) acc += wc[ic] * in[ic * plane + p];
            dst[p] = acc;
        }
    }
}

void conv1x1_backward_input(const float* dout, const float* w, float* din,
                            const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const std::size_t pv = plane & ~std::size_t{7};
    for (int ic = 0; ic < s.in_c; ++ic) {
        float* dst = din + ic * plane;
        for (std::size_t p = 0; p < pv; p += 8) {
            __m256 acc = _mm256_setzero_ps();
            for (int oc = 0; oc < s.out_c; ++oc)
                acc = _mm256_add_ps(
                    acc, _mm256_mul_ps(
                             _mm256_broadcast_ss(w + static_cast<std::size_t>(oc) * s.in_c + ic),
                             _mm256_loadu_ps(dout + oc * plane + p)));
            _mm256_storeu_ps(dst + p, acc);
        }
        for (std::size_t p = pv; p < plane; ++p) {
            float acc = 0.0f;
            for (int oc = 0; oc < s.out_c; ++oc)
                acc += w[static_cast<std::size_t>(oc) * s.in_c + ic] * dout[oc * plane + p];
            dst[p] = acc;
        }
    }
}

void conv1x1_backward_weights(const float* in, const float* dout, float* dw,
                              float* db, const Conv1x1Shape& s) {
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (int oc = 0; oc < s.out_c; ++oc) {
        const float* g = dout + oc * plane;
        for (int ic = 0; ic < s.in_c; ++ic) {
            const float* src = in + ic * plane;
            alignas(32) float lanes[8] = {};
            __m256 v = _mm256_load_ps(lanes);
            std::size_t p = 0;
            for (; p + 8 <= plane; p += 8)
                v = _mm256_add_ps(
                    v, _mm256_mul_ps(_mm256_loadu_ps(g + p), _mm256_loadu_ps(src + p)));
            _mm256_store_ps(lanes, v);
            for (; p < plane; ++p) lanes[p & 7] += g[p] * src[p];
            dw[static_cast<std::size_t>(oc) * s.in_c + ic] = bank_reduce(lanes);
        }
        alignas(32) float lanes[8] = {};
        __m256 v = _mm256_load_ps(lanes);
        std::size_t p = 0;
        for (; p + 8 <= plane; p += 8) v = _mm256_add_ps(v, _mm256_loadu_ps(g + p));
        _mm256_store_ps(lanes, v);
        for (; p < plane; ++p) lanes[p & 7] += g[p];
        db[oc] = bank_reduce(lanes);
    }
}

void relu_forward(const float* x, float* y, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x_pre, const float* dy, float* dx, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x_pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
    }
    for (; i < n; ++i) dx[i] = x_pre[i] > 0.0f ? dy[i] : 0.0f;
}

}  // namespace sedm::kernels::avx2
