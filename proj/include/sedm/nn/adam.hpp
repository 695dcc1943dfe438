#pragma once

#include <cstdint>
#include <vector>

#include "sedm/nn/net.hpp"

namespace sedm::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment accumulators are kept in double regardless of the parameter type.
struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;

    static AdamState zeros(std::size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

/// Bias-corrected Adam update over the flattened learnables. Throws
/// std::runtime_error naming the first offending index if a gradient is not
/// finite.
template <typename T>
void adam_step(DetectorParams<T>& params, const std::vector<T>& grads,
               AdamState& state, const AdamConfig& cfg = {});

}  // namespace sedm::nn
