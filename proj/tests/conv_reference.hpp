#pragma once

// Independent direct-loop conv/deconv oracles for validating the GEMM-based
// engine. Deliberately written from the textbook definitions.

#include <cstddef>
#include <vector>

namespace convref {

// y[N,F,Ho,Wo]; pads applied top/left = pt/pl
template <typename T>
std::vector<T> conv2d(const std::vector<T>& x, std::size_t N, std::size_t C,
                      std::size_t H, std::size_t W, const std::vector<T>& w,
                      std::size_t F, std::size_t kh, std::size_t kw,
                      const std::vector<T>& b, std::size_t stride, std::size_t pt,
                      std::size_t pl, std::size_t Ho, std::size_t Wo) {
    std::vector<T> y(N * F * Ho * Wo, T(0));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t i = 0; i < Ho; ++i)
                for (std::size_t j = 0; j < Wo; ++j) {
                    T acc = b.empty() ? T(0) : b[f];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v) {
                                long ii = long(i * stride + u) - long(pt);
                                long jj = long(j * stride + v) - long(pl);
                                if (ii < 0 || jj < 0 || ii >= long(H) || jj >= long(W)) continue;
                                acc += x[((n * C + c) * H + ii) * W + jj] *
                                       w[((f * C + c) * kh + u) * kw + v];
                            }
                    y[((n * F + f) * Ho + i) * Wo + j] = acc;
                }
    return y;
}

// full transposed conv; w stored [C,F,kh,kw]; output (H-1)*s+kh x (W-1)*s+kw
template <typename T>
std::vector<T> deconv2d_full(const std::vector<T>& x, std::size_t N, std::size_t C,
                             std::size_t H, std::size_t W, const std::vector<T>& w,
                             std::size_t F, std::size_t kh, std::size_t kw,
                             const std::vector<T>& b, std::size_t stride) {
    std::size_t Ho = (H - 1) * stride + kh, Wo = (W - 1) * stride + kw;
    std::vector<T> y(N * F * Ho * Wo, T(0));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    T xv = x[((n * C + c) * H + i) * W + j];
                    for (std::size_t f = 0; f < F; ++f)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v)
                                y[((n * F + f) * Ho + i * stride + u) * Wo + j * stride + v] +=
                                    xv * w[((c * F + f) * kh + u) * kw + v];
                }
    if (!b.empty())
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t f = 0; f < F; ++f)
                for (std::size_t i = 0; i < Ho * Wo; ++i)
                    y[(n * F + f) * Ho * Wo + i] += b[f];
    return y;
}

} // namespace convref
