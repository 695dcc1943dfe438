#include "sedm/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sedm::nn {

template <typename T>
void adam_step(DetectorParams<T>& params, const std::vector<T>& grads,
               AdamState& state, const AdamConfig& cfg) {
    const std::size_t n = learnable_size(params);
    if (grads.size() != n)
        throw std::invalid_argument("adam_step: gradient size mismatch");
    if (state.m.size() != n || state.v.size() != n)
        throw std::invalid_argument("adam_step: state size mismatch");

    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(grads[i])))
            throw std::runtime_error("adam_step: non-finite gradient at flat index " +
                                     std::to_string(i));

    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    std::size_t off = 0;
    for (auto& ref : learnable_refs(params)) {
        for (std::size_t j = 0; j < ref.vec->size(); ++j) {
            const std::size_t i = off + j;
            const double g = static_cast<double>(grads[i]);
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
            state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = state.m[i] / bc1;
            const double vhat = state.v[i] / bc2;
            (*ref.vec)[j] = static_cast<T>(static_cast<double>((*ref.vec)[j]) -
                                           cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
        off += ref.vec->size();
    }
}

template void adam_step(DetectorParams<float>&, const std::vector<float>&,
                        AdamState&, const AdamConfig&);
template void adam_step(DetectorParams<double>&, const std::vector<double>&,
                        AdamState&, const AdamConfig&);

}  // namespace sedm::nn
