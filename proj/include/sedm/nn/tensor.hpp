#pragma once

#include <cstddef>
#include <vector>

namespace sedm::nn {

/// Dense CHW tensor.
template <typename T>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(c_) * h_ * w_, T(0)) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t size() const { return data.size(); }

    T* ch(int i) { return data.data() + i * plane(); }
    const T* ch(int i) const { return data.data() + i * plane(); }

    T& at(int ci, int y, int x) { return data[ci * plane() + static_cast<std::size_t>(y) * w + x]; }
    const T& at(int ci, int y, int x) const {
        return data[ci * plane() + static_cast<std::size_t>(y) * w + x];
    }
};

}  // namespace sedm::nn
