#pragma once

#include <cstring>
#include <vector>

#include "dvrm/common.hpp"
#include "dvrm/gemm.hpp"
#include "dvrm/tensor.hpp"

namespace dvrm {

enum class Pad { valid, same };
enum class Crop { full, same };

namespace convdet {

/// Resolved geometry of a conv2d. Padding follows the TensorFlow convention:
/// pad_total = max((Ho-1)*s + k - H, 0), with the extra pixel (even k) going to
/// the bottom/right edge.
struct ConvSpec {
    std::size_t N, C, H, W, F, kh, kw, stride;
    std::size_t pt, pl, pb, pr;
    std::size_t Ho, Wo;
};

inline ConvSpec make_conv_spec(const Shape& xs, const Shape& ws, std::size_t stride,
                               Pad pad) {
    if (xs.size() != 4) throw ShapeError("conv2d: input must be rank 4, got " + shape_str(xs));
    if (ws.size() != 4) throw ShapeError("conv2d: weight must be rank 4, got " + shape_str(ws));
    if (stride == 0) throw ParamError("conv2d: stride must be >= 1");
    ConvSpec s{};
    s.N = xs[0]; s.C = xs[1]; s.H = xs[2]; s.W = xs[3];
    s.F = ws[0]; s.kh = ws[2]; s.kw = ws[3];
    s.stride = stride;
    if (ws[1] != s.C)
        throw ShapeError("conv2d: weight channel axis 1 is " + std::to_string(ws[1]) +
                         " but input has " + std::to_string(s.C) + " channels");
    if (pad == Pad::same) {
        s.Ho = (s.H + stride - 1) / stride;
        s.Wo = (s.W + stride - 1) / stride;
        std::size_t ph = (s.Ho - 1) * stride + s.kh > s.H ? (s.Ho - 1) * stride + s.kh - s.H : 0;
        std::size_t pw = (s.Wo - 1) * stride + s.kw > s.W ? (s.Wo - 1) * stride + s.kw - s.W : 0;
        s.pt = ph / 2; s.pb = ph - s.pt;
        s.pl = pw / 2; s.pr = pw - s.pl;
    } else {
        if (s.H < s.kh || s.W < s.kw)
            throw ShapeError("conv2d: kernel larger than input on spatial axis 2 or 3");
        s.Ho = (s.H - s.kh) / stride + 1;
        s.Wo = (s.W - s.kw) / stride + 1;
        s.pt = s.pl = s.pb = s.pr = 0;
    }
    return s;
}

/// Transposed conv geometry. Full output is (H-1)*s + k; crop=same keeps the
/// window starting at ((k-1)/2, (k-1)/2) with the input's spatial size scaled
/// by the stride.
struct DeconvSpec {
    std::size_t N, C, H, W, F, kh, kw, stride;
    std::size_t Hf, Wf;       // full output
    std::size_t ci, cj;       // crop origin
    std::size_t Ho, Wo;       // emitted output
};

inline DeconvSpec make_deconv_spec(const Shape& xs, const Shape& ws, std::size_t stride,
                                   Crop crop) {
    if (xs.size() != 4) throw ShapeError("deconv2d: input must be rank 4, got " + shape_str(xs));
    if (ws.size() != 4) throw ShapeError("deconv2d: weight must be rank 4, got " + shape_str(ws));
    if (stride == 0) throw ParamError("deconv2d: stride must be >= 1");
    DeconvSpec s{};
    s.N = xs[0]; s.C = xs[1]; s.H = xs[2]; s.W = xs[3];
    s.F = ws[1]; s.kh = ws[2]; s.kw = ws[3];
    s.stride = stride;
    if (ws[0] != s.C)
        throw ShapeError("deconv2d: weight channel axis 0 is " + std::to_string(ws[0]) +
                         " but input has " + std::to_string(s.C) + " channels");
    s.Hf = (s.H - 1) * stride + s.kh;
    s.Wf = (s.W - 1) * stride + s.kw;
    if (crop == Crop::full) {
        s.ci = s.cj = 0;
        s.Ho = s.Hf; s.Wo = s.Wf;
    } else {
        s.Ho = s.H * stride;
        s.Wo = s.W * stride;
        s.ci = (s.kh - 1) / 2;
        s.cj = (s.kw - 1) / 2;
        if (s.ci + s.Ho > s.Hf || s.cj + s.Wo > s.Wf)
            throw ShapeError("deconv2d: same-crop window exceeds full output");
    }
    return s;
}

// Scratch planes use a channels-outer layout [C][N][Hp*Wp] so each channel row
// spans every sample and one GEMM per kernel tap covers the whole batch.

template <typename T>
void pack_padded(const T* x, std::size_t N, std::size_t C, std::size_t H, std::size_t W,
                 std::size_t Hp, std::size_t Wp, std::size_t oi, std::size_t oj,
                 std::size_t stride, std::vector<T>& xp) {
    std::size_t Sp = Hp * Wp;
    xp.assign(C * N * Sp, T(0));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const T* src = x + (n * C + c) * H * W;
            T* dst = xp.data() + (c * N + n) * Sp + oi * Wp + oj;
            if (stride == 1) {
                for (std::size_t i = 0; i < H; ++i)
                    std::memcpy(dst + i * Wp, src + i * W, W * sizeof(T));
            } else {
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j)
                        dst[i * stride * Wp + j * stride] = src[i * W + j];
            }
        }
}

template <typename T>
void pack_w_fc(const T* w, std::size_t F, std::size_t C, std::size_t kk, std::size_t tap,
               bool w_is_cf, std::vector<T>& out) {
    // out[F][C]; conv weights are [F,C,kh,kw], deconv weights [C,F,kh,kw]
    out.resize(F * C);
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t c = 0; c < C; ++c)
            out[f * C + c] = w_is_cf ? w[(c * F + f) * kk + tap] : w[(f * C + c) * kk + tap];
}

template <typename T>
void pack_w_cf(const T* w, std::size_t F, std::size_t C, std::size_t kk, std::size_t tap,
               bool w_is_cf, std::vector<T>& out) {
    out.resize(C * F);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < F; ++f)
            out[c * F + f] = w_is_cf ? w[(c * F + f) * kk + tap] : w[(f * C + c) * kk + tap];
}

// ---- stride-1 conv via shifted GEMMs over a shared padded grid --------------

template <typename T>
void conv_fwd_s1(const ConvSpec& s, const T* x, const T* w, const T* b, T* y) {
    std::size_t Hp = s.H + s.pt + s.pb, Wp = s.W + s.pl + s.pr, Sp = Hp * Wp;
    std::size_t total = s.N * Sp;
    std::vector<T> xp, yp(s.F * total, T(0)), wt;
    pack_padded(x, s.N, s.C, s.H, s.W, Hp, Wp, s.pt, s.pl, 1, xp);
    for (std::size_t di = 0; di < s.kh; ++di)
        for (std::size_t dj = 0; dj < s.kw; ++dj) {
            std::size_t off = di * Wp + dj;
            pack_w_fc(w, s.F, s.C, s.kh * s.kw, di * s.kw + dj, false, wt);
            gemm<T>(s.F, total - off, s.C, wt.data(), s.C, xp.data() + off, total,
                    yp.data(), total, true);
        }
    for (std::size_t n = 0; n < s.N; ++n)
        for (std::size_t f = 0; f < s.F; ++f) {
            const T* src = yp.data() + (f * s.N + n) * Sp;
            T* dst = y + (n * s.F + f) * s.Ho * s.Wo;
            T bias = b ? b[f] : T(0);
            for (std::size_t i = 0; i < s.Ho; ++i)
                for (std::size_t j = 0; j < s.Wo; ++j)
                    dst[i * s.Wo + j] = src[i * Wp + j] + bias;
        }
}

template <typename T>
void conv_bwd_s1(const ConvSpec& s, const T* x, const T* w, const T* gy,
                 T* gx, T* gw, T* gb) {
    std::size_t Hp = s.H + s.pt + s.pb, Wp = s.W + s.pl + s.pr, Sp = Hp * Wp;
    std::size_t total = s.N * Sp;
    std::size_t kk = s.kh * s.kw;
    std::vector<T> gyp, wt;
    // gy embedded on the padded grid, zeros elsewhere, channels-outer
    pack_padded(gy, s.N, s.F, s.Ho, s.Wo, Hp, Wp, 0, 0, 1, gyp);
    if (gx) {
        std::vector<T> gxp(s.C * total, T(0));
        for (std::size_t di = 0; di < s.kh; ++di)
            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                std::size_t off = di * Wp + dj;
                pack_w_cf(w, s.F, s.C, kk, di * s.kw + dj, false, wt);
                gemm<T>(s.C, total - off, s.F, wt.data(), s.F, gyp.data(), total,
                        gxp.data() + off, total, true);
            }
        for (std::size_t n = 0; n < s.N; ++n)
            for (std::size_t c = 0; c < s.C; ++c) {
                const T* src = gxp.data() + (c * s.N + n) * Sp + s.pt * Wp + s.pl;
                T* dst = gx + (n * s.C + c) * s.H * s.W;
                for (std::size_t i = 0; i < s.H; ++i)
                    for (std::size_t j = 0; j < s.W; ++j)
                        dst[i * s.W + j] += src[i * Wp + j];
            }
    }
    if (gw) {
        std::vector<T> xp, gwt(s.F * s.C);
        pack_padded(x, s.N, s.C, s.H, s.W, Hp, Wp, s.pt, s.pl, 1, xp);
        for (std::size_t di = 0; di < s.kh; ++di)
            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                std::size_t off = di * Wp + dj;
                std::fill(gwt.begin(), gwt.end(), T(0));
                gemm_nt<T>(s.F, s.C, total - off, gyp.data(), total, xp.data() + off,
                           total, gwt.data(), s.C, true);
                std::size_t tap = di * s.kw + dj;
                for (std::size_t f = 0; f < s.F; ++f)
                    for (std::size_t c = 0; c < s.C; ++c)
                        gw[(f * s.C + c) * kk + tap] += gwt[f * s.C + c];
            }
    }
    if (gb) {
        for (std::size_t n = 0; n < s.N; ++n)
            for (std::size_t f = 0; f < s.F; ++f) {
                const T* src = gy + (n * s.F + f) * s.Ho * s.Wo;
                T acc = 0;
                for (std::size_t i = 0; i < s.Ho * s.Wo; ++i) acc += src[i];
                gb[f] += acc;
            }
    }
}

// ---- general-stride conv via direct loops (rare path; model uses stride 1) --

template <typename T>
void conv_fwd_direct(const ConvSpec& s, const T* x, const T* w, const T* b, T* y) {
    std::size_t kk = s.kh * s.kw;
    for (std::size_t n = 0; n < s.N; ++n)
        for (std::size_t f = 0; f < s.F; ++f)
            for (std::size_t i = 0; i < s.Ho; ++i)
                for (std::size_t j = 0; j < s.Wo; ++j) {
                    T acc = b ? b[f] : T(0);
                    for (std::size_t c = 0; c < s.C; ++c)
                        for (std::size_t di = 0; di < s.kh; ++di)
                            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                                std::ptrdiff_t ii = (std::ptrdiff_t)(i * s.stride + di) - (std::ptrdiff_t)s.pt;
                                std::ptrdiff_t jj = (std::ptrdiff_t)(j * s.stride + dj) - (std::ptrdiff_t)s.pl;
                                if (ii < 0 || jj < 0 || ii >= (std::ptrdiff_t)s.H ||
                                    jj >= (std::ptrdiff_t)s.W)
                                    continue;
                                acc += x[((n * s.C + c) * s.H + ii) * s.W + jj] *
                                       w[(f * s.C + c) * kk + di * s.kw + dj];
                            }
                    y[((n * s.F + f) * s.Ho + i) * s.Wo + j] = acc;
                }
}

template <typename T>
void conv_bwd_direct(const ConvSpec& s, const T* x, const T* w, const T* gy,
                     T* gx, T* gw, T* gb) {
    std::size_t kk = s.kh * s.kw;
    for (std::size_t n = 0; n < s.N; ++n)
        for (std::size_t f = 0; f < s.F; ++f)
            for (std::size_t i = 0; i < s.Ho; ++i)
                for (std::size_t j = 0; j < s.Wo; ++j) {
                    T g = gy[((n * s.F + f) * s.Ho + i) * s.Wo + j];
                    if (gb) gb[f] += g;
                    for (std::size_t c = 0; c < s.C; ++c)
                        for (std::size_t di = 0; di < s.kh; ++di)
                            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                                std::ptrdiff_t ii = (std::ptrdiff_t)(i * s.stride + di) - (std::ptrdiff_t)s.pt;
                                std::ptrdiff_t jj = (std::ptrdiff_t)(j * s.stride + dj) - (std::ptrdiff_t)s.pl;
                                if (ii < 0 || jj < 0 || ii >= (std::ptrdiff_t)s.H ||
                                    jj >= (std::ptrdiff_t)s.W)
                                    continue;
                                std::size_t xi = ((n * s.C + c) * s.H + ii) * s.W + jj;
                                std::size_t wi = (f * s.C + c) * kk + di * s.kw + dj;
                                if (gx) gx[xi] += g * w[wi];
                                if (gw) gw[wi] += g * x[xi];
                            }
                }
}

template <typename T>
void conv_fwd(const ConvSpec& s, const T* x, const T* w, const T* b, T* y) {
    if (s.stride == 1) conv_fwd_s1(s, x, w, b, y);
    else conv_fwd_direct(s, x, w, b, y);
}

template <typename T>
void conv_bwd(const ConvSpec& s, const T* x, const T* w, const T* gy,
              T* gx, T* gw, T* gb) {
    if (s.stride == 1) conv_bwd_s1(s, x, w, gy, gx, gw, gb);
    else conv_bwd_direct(s, x, w, gy, gx, gw, gb);
}

// ---- transposed conv: input scattered onto the full grid with stride gaps ---

template <typename T>
void deconv_fwd(const DeconvSpec& s, const T* x, const T* w, const T* b, T* y) {
    std::size_t Sp = s.Hf * s.Wf, total = s.N * Sp;
    std::vector<T> xp, yp(s.F * total, T(0)), wt;
    pack_padded(x, s.N, s.C, s.H, s.W, s.Hf, s.Wf, 0, 0, s.stride, xp);
    for (std::size_t di = 0; di < s.kh; ++di)
        for (std::size_t dj = 0; dj < s.kw; ++dj) {
            std::size_t off = di * s.Wf + dj;
            pack_w_fc(w, s.F, s.C, s.kh * s.kw, di * s.kw + dj, true, wt);
            gemm<T>(s.F, total - off, s.C, wt.data(), s.C, xp.data(), total,
                    yp.data() + off, total, true);
        }
    for (std::size_t n = 0; n < s.N; ++n)
        for (std::size_t f = 0; f < s.F; ++f) {
            const T* src = yp.data() + (f * s.N + n) * Sp + s.ci * s.Wf + s.cj;
            T* dst = y + (n * s.F + f) * s.Ho * s.Wo;
            T bias = b ? b[f] : T(0);
            for (std::size_t i = 0; i < s.Ho; ++i)
                for (std::size_t j = 0; j < s.Wo; ++j)
                    dst[i * s.Wo + j] = src[i * s.Wf + j] + bias;
        }
}

template <typename T>
void deconv_bwd(const DeconvSpec& s, const T* x, const T* w, const T* gy,
                T* gx, T* gw, T* gb) {
    std::size_t Sp = s.Hf * s.Wf, total = s.N * Sp;
    std::size_t kk = s.kh * s.kw;
    std::vector<T> gyp, wt;
    pack_padded(gy, s.N, s.F, s.Ho, s.Wo, s.Hf, s.Wf, s.ci, s.cj, 1, gyp);
    if (gx) {
        std::vector<T> gxp(s.C * total, T(0));
        for (std::size_t di = 0; di < s.kh; ++di)
            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                std::size_t off = di * s.Wf + dj;
                pack_w_cf(w, s.F, s.C, kk, di * s.kw + dj, true, wt);
                gemm<T>(s.C, total - off, s.F, wt.data(), s.F, gyp.data() + off, total,
                        gxp.data(), total, true);
            }
        for (std::size_t n = 0; n < s.N; ++n)
            for (std::size_t c = 0; c < s.C; ++c) {
                const T* src = gxp.data() + (c * s.N + n) * Sp;
                T* dst = gx + (n * s.C + c) * s.H * s.W;
                for (std::size_t i = 0; i < s.H; ++i)
                    for (std::size_t j = 0; j < s.W; ++j)
                        dst[i * s.W + j] += src[(i * s.stride) * s.Wf + j * s.stride];
            }
    }
    if (gw) {
        std::vector<T> xp, gwt(s.C * s.F);
        pack_padded(x, s.N, s.C, s.H, s.W, s.Hf, s.Wf, 0, 0, s.stride, xp);
        for (std::size_t di = 0; di < s.kh; ++di)
            for (std::size_t dj = 0; dj < s.kw; ++dj) {
                std::size_t off = di * s.Wf + dj;
                std::fill(gwt.begin(), gwt.end(), T(0));
                gemm_nt<T>(s.C, s.F, total - off, xp.data(), total, gyp.data() + off,
                           total, gwt.data(), s.F, true);
                std::size_t tap = di * s.kw + dj;
                for (std::size_t c = 0; c < s.C; ++c)
                    for (std::size_t f = 0; f < s.F; ++f)
                        gw[(c * s.F + f) * kk + tap] += gwt[c * s.F + f];
            }
    }
    if (gb) {
        for (std::size_t n = 0; n < s.N; ++n)
            for (std::size_t f = 0; f < s.F; ++f) {
                const T* src = gy + (n * s.F + f) * s.Ho * s.Wo;
                T acc = 0;
                for (std::size_t i = 0; i < s.Ho * s.Wo; ++i) acc += src[i];
                gb[f] += acc;
            }
    }
}

} // namespace convdet
} // namespace dvrm
