#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sedm/nn/tensor.hpp"
#include "sedm/plane.hpp"

// The heatmap detector: a small stride-2 encoder (1->16->16->32, 3x3 kernels,
// batch norm + ReLU after each conv) followed by a 1x1 head producing 65
// logits per 8x8 cell. A per-cell softmax over the 65 channels yields 64
// position probabilities plus a "no keypoint" dustbin; dropping the dustbin
// and rearranging the 64 values into the cell's 8x8 pixels (depth-to-space)
// gives a full-resolution heatmap in [0,1].
//
// Everything is templated on the scalar type: float is the production path
// (kernels module, SIMD-dispatched), double is the scalar reference used by
// the finite-difference gradient checks.

namespace sedm::nn {

inline constexpr int kCell = 8;
inline constexpr int kHeadChannels = 65;  // 64 cell positions + dustbin
inline constexpr int kEncoderChannels[3] = {16, 16, 32};
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;
inline constexpr double kLossClamp = 1e-7;
inline constexpr char kArchDescriptor[] = "sedm-det/enc3x3s2x3:1-16-16-32+bn/head1x1:65/cell8";

template <typename T>
struct DetectorParams {
    // conv weights are canonical [oc][ic][ky][kx]
    std::vector<T> conv1_w, conv1_b;
    std::vector<T> bn1_gamma, bn1_beta, bn1_mean, bn1_var;
    std::vector<T> conv2_w, conv2_b;
    std::vector<T> bn2_gamma, bn2_beta, bn2_mean, bn2_var;
    std::vector<T> conv3_w, conv3_b;
    std::vector<T> bn3_gamma, bn3_beta, bn3_mean, bn3_var;
    std::vector<T> head_w, head_b;

    static DetectorParams zeros();
    /// He initialization for the encoder; the head uses a small fixed scale
    /// (0.05) so a fresh detector starts close to a uniform heatmap.
    static DetectorParams he_init(std::uint64_t seed);

    template <typename U>
    DetectorParams<U> cast() const;

    bool all_finite() const;
};

template <typename T>
struct ParamRef {
    const char* name;
    std::vector<T>* vec;
};

/// Learnable tensors in checkpoint/optimizer order.
template <typename T>
std::vector<ParamRef<T>> learnable_refs(DetectorParams<T>& p);
/// Batch-norm running statistics, saved but not optimized.
template <typename T>
std::vector<ParamRef<T>> buffer_refs(DetectorParams<T>& p);

template <typename T>
std::size_t learnable_size(const DetectorParams<T>& p);
template <typename T>
std::vector<T> flatten_learnables(const DetectorParams<T>& p);
template <typename T>
void load_learnables(DetectorParams<T>& p, const std::vector<T>& flat);

/// Inference-mode forward (running BN statistics). Image dims must be
/// divisible by 8; throws std::invalid_argument otherwise.
template <typename T>
Plane<T> forward(const DetectorParams<T>& p, const Plane<T>& image);

/// Full per-cell probability tensor (65 x H/8 x W/8), inference mode.
/// Channel t < 64 is the probability of cell pixel (t/8, t%8); channel 64 is
/// the dustbin. Each cell's 65 values sum to 1.
template <typename T>
Tensor<T> forward_probs(const DetectorParams<T>& p, const Plane<T>& image);

/// Binary cross-entropy of a heatmap against a keypoint mask:
///   -sum y*log x + (1-y)*log(1-x)
/// over pixels with valid==true that lie outside the `border` margin.
/// x is clamped to [1e-7, 1-1e-7]; the sum is accumulated in double.
template <typename T>
double heatmap_loss(const Plane<T>& heatmap, const Plane<std::uint8_t>& labels,
                    const Plane<std::uint8_t>& valid, int border = 4);

template <typename T>
struct TrainSampleView {
    const Plane<T>* image;
    const Plane<std::uint8_t>* labels;
    const Plane<std::uint8_t>* valid;
};

/// One training-mode evaluation of a mini-batch: batched forward with BN
/// batch statistics, mean-over-batch loss, and (when `grads` is non-null)
/// the full analytic backward pass. `grads` is resized to learnable_size and
/// laid out in learnable_refs order. When update_running is set the BN
/// running statistics are blended with the batch statistics (momentum 0.9).
/// Returns the mean loss.
template <typename T>
double train_forward_backward(DetectorParams<T>& p,
                              const std::vector<TrainSampleView<T>>& batch,
                              int border, bool update_running,
                              std::vector<T>* grads, int threads = 1);

}  // namespace sedm::nn
