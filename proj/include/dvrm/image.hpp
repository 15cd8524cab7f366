#pragma once

#include <cstddef>
#include <vector>

namespace dvrm {

/// Grayscale image, pixels row-major in [0,1].
struct Image {
    std::size_t h = 0, w = 0;
    std::vector<double> pix;

    Image() = default;
    Image(std::size_t h_, std::size_t w_, double fill = 0.0)
        : h(h_), w(w_), pix(h_ * w_, fill) {}

    double& at(std::size_t i, std::size_t j) { return pix[i * w + j]; }
    double at(std::size_t i, std::size_t j) const { return pix[i * w + j]; }
    std::size_t size() const { return pix.size(); }
};

} // namespace dvrm
