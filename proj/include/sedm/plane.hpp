#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sedm {

/// Dense row-major 2D array. Used for images, depth maps, heatmaps and masks.
template <typename T>
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int w, int h, T fill = T{})
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    T* row(int y) { return data.data() + static_cast<std::size_t>(y) * width; }
    const T* row(int y) const {
        return data.data() + static_cast<std::size_t>(y) * width;
    }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    bool same_size(const Plane& o) const {
        return width == o.width && height == o.height;
    }

    std::size_t size() const { return data.size(); }

    void fill(T v) { data.assign(data.size(), v); }
};

template <typename T>
void require_same_size(const Plane<T>& a, const Plane<T>& b, const char* what) {
    if (!a.same_size(b))
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace sedm
