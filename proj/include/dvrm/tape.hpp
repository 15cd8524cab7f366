#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvrm/conv_kernels.hpp"
#include "dvrm/gemm.hpp"
#include "dvrm/tensor.hpp"

namespace dvrm {

/// A named trainable tensor. Gradients accumulate across backward passes until
/// the caller zeroes them (the optimizer does this after each step).
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape(), T(0)) {
        value.requires_grad = true;
    }

    void zero_grad() { grad.fill(T(0)); }
};

/// Reverse-mode tape. Every op records its forward result immediately and a
/// closure that routes gradients to its inputs. backward() walks the recorded
/// ops strictly in reverse execution order; it may be called once per tape.
template <typename T>
class Tape {
public:
    using Ref = std::size_t;

    Ref constant(Tensor<T> v) {
        return push(std::move(v), false, "const", nullptr, {});
    }

    Ref param(Parameter<T>& p) {
        Ref r = push(p.value, true, "param", &p, {});
        nodes_[r].backward_fn = [r](Tape& t) {
            Parameter<T>* prm = t.nodes_[r].owner;
            const Tensor<T>& g = *t.nodes_[r].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) prm->grad[i] += g[i];
        };
        return r;
    }

    const Tensor<T>& value(Ref r) const { return nodes_.at(r).value; }

    /// Gradient of the last backward() w.r.t. node r; absent if r is not on a
    /// path to the loss.
    const Tensor<T>& grad(Ref r) const {
        const auto& g = nodes_.at(r).grad;
        if (!g) throw DvrmError("no gradient recorded for node " + std::to_string(r));
        return *g;
    }

    std::size_t size() const { return nodes_.size(); }
    const std::string& op_name(Ref r) const { return nodes_.at(r).op; }

    // ---- elementwise -------------------------------------------------------

    Ref add(Ref a, Ref b) {
        check_same_shape(value(a), value(b), "add");
        Tensor<T> out = value(a);
        const Tensor<T>& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
        Ref r = push(std::move(out), needs(a) || needs(b), "add", nullptr, {a, b});
        nodes_[r].backward_fn = [r, a, b](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            if (t.needs(a)) t.accumulate(a, g);
            if (t.needs(b)) t.accumulate(b, g);
        };
        return r;
    }

    Ref sub(Ref a, Ref b) {
        check_same_shape(value(a), value(b), "sub");
        Tensor<T> out = value(a);
        const Tensor<T>& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
        Ref r = push(std::move(out), needs(a) || needs(b), "sub", nullptr, {a, b});
        nodes_[r].backward_fn = [r, a, b](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            if (t.needs(a)) t.accumulate(a, g);
            if (t.needs(b)) {
                Tensor<T>& gb = t.gbuf(b);
                for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
            }
        };
        return r;
    }

    Ref mul(Ref a, Ref b) {
        check_same_shape(value(a), value(b), "mul");
        Tensor<T> out = value(a);
        const Tensor<T>& vb = value(b);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
        Ref r = push(std::move(out), needs(a) || needs(b), "mul", nullptr, {a, b});
        nodes_[r].backward_fn = [r, a, b](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& va = t.value(a);
            const Tensor<T>& vb2 = t.value(b);
            if (t.needs(a)) {
                Tensor<T>& ga = t.gbuf(a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
            }
            if (t.needs(b)) {
                Tensor<T>& gb = t.gbuf(b);
                for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
            }
        };
        return r;
    }

    Ref add_scalar(Ref a, T c) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += c;
        Ref r = push(std::move(out), needs(a), "add_scalar", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (t.needs(a)) t.accumulate(a, *t.nodes_[r].grad);
        };
        return r;
    }

    Ref mul_scalar(Ref a, T c) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
        Ref r = push(std::move(out), needs(a), "mul_scalar", nullptr, {a});
        nodes_[r].backward_fn = [r, a, c](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * c;
        };
        return r;
    }

    Ref exp(Ref a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
        Ref r = push(std::move(out), needs(a), "exp", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& o = t.value(r);
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * o[i];
        };
        return r;
    }

    /// Clamp to [lo, hi]; gradient is zero wherever the input was clipped.
    Ref clamp(Ref a, T lo, T hi) {
        if (!(lo < hi)) throw ParamError("clamp: lo must be < hi");
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i)
            out[i] = out[i] < lo ? lo : (out[i] > hi ? hi : out[i]);
        Ref r = push(std::move(out), needs(a), "clamp", nullptr, {a});
        nodes_[r].backward_fn = [r, a, lo, hi](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& va = t.value(a);
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (va[i] >= lo && va[i] <= hi) ga[i] += g[i];
        };
        return r;
    }

    Ref relu(Ref a) { return leaky_relu(a, T(0), "relu"); }

    Ref leaky_relu(Ref a, T slope, const char* name = "leaky_relu") {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i)
            if (out[i] < T(0)) out[i] *= slope;
        Ref r = push(std::move(out), needs(a), name, nullptr, {a});
        nodes_[r].backward_fn = [r, a, slope](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& va = t.value(a);
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga[i] += va[i] > T(0) ? g[i] : g[i] * slope;
        };
        return r;
    }

    Ref sigmoid(Ref a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i)
            out[i] = T(1) / (T(1) + std::exp(-out[i]));
        Ref r = push(std::move(out), needs(a), "sigmoid", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& o = t.value(r);
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga[i] += g[i] * o[i] * (T(1) - o[i]);
        };
        return r;
    }

    Ref tanh(Ref a) {
        Tensor<T> out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
        Ref r = push(std::move(out), needs(a), "tanh", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            const Tensor<T>& o = t.value(r);
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga[i] += g[i] * (T(1) - o[i] * o[i]);
        };
        return r;
    }

    // ---- shape ops ---------------------------------------------------------

    Ref sum(Ref a) {
        T s = 0;
        const Tensor<T>& va = value(a);
        for (std::size_t i = 0; i < va.numel(); ++i) s += va[i];
        Ref r = push(Tensor<T>::scalar(s), needs(a), "sum", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (!t.needs(a)) return;
            T g = (*t.nodes_[r].grad)[0];
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
        };
        return r;
    }

    Ref reshape(Ref a, Shape s) {
        Tensor<T> out = value(a).reshaped(std::move(s));
        Ref r = push(std::move(out), needs(a), "reshape", nullptr, {a});
        nodes_[r].backward_fn = [r, a](Tape& t) {
            if (t.needs(a)) t.accumulate(a, *t.nodes_[r].grad);
        };
        return r;
    }

    Ref concat(Ref a, Ref b, std::size_t axis) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        if (va.rank() != vb.rank())
            throw ShapeError("concat: rank mismatch: " + shape_str(va.shape()) + " vs " +
                             shape_str(vb.shape()));
        if (axis >= va.rank())
            throw ShapeError("concat: axis " + std::to_string(axis) + " out of range");
        for (std::size_t d = 0; d < va.rank(); ++d)
            if (d != axis && va.shape()[d] != vb.shape()[d])
                throw ShapeError("concat: shapes differ at axis " + std::to_string(d) +
                                 ": " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
        Shape os = va.shape();
        os[axis] += vb.shape()[axis];
        Tensor<T> out(os);
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= os[d];
        for (std::size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
        std::size_t la = va.shape()[axis] * inner, lb = vb.shape()[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::memcpy(out.data() + o * (la + lb), va.data() + o * la, la * sizeof(T));
            std::memcpy(out.data() + o * (la + lb) + la, vb.data() + o * lb, lb * sizeof(T));
        }
        Ref r = push(std::move(out), needs(a) || needs(b), "concat", nullptr, {a, b});
        nodes_[r].backward_fn = [r, a, b, outer, la, lb](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            if (t.needs(a)) {
                Tensor<T>& ga = t.gbuf(a);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < la; ++i)
                        ga[o * la + i] += g[o * (la + lb) + i];
            }
            if (t.needs(b)) {
                Tensor<T>& gb = t.gbuf(b);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < lb; ++i)
                        gb[o * lb + i] += g[o * (la + lb) + la + i];
            }
        };
        return r;
    }

    Ref slice(Ref a, std::size_t axis, std::size_t start, std::size_t len) {
        const Tensor<T>& va = value(a);
        if (axis >= va.rank())
            throw ShapeError("slice: axis " + std::to_string(axis) + " out of range");
        if (start + len > va.shape()[axis] || len == 0)
            throw ShapeError("slice: window [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") exceeds axis " +
                             std::to_string(axis) + " of " + shape_str(va.shape()));
        Shape os = va.shape();
        os[axis] = len;
        Tensor<T> out(os);
        std::size_t outer = 1, inner = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= va.shape()[d];
        for (std::size_t d = axis + 1; d < va.rank(); ++d) inner *= va.shape()[d];
        std::size_t full = va.shape()[axis] * inner, win = len * inner, off = start * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + o * win, va.data() + o * full + off, win * sizeof(T));
        Ref r = push(std::move(out), needs(a), "slice", nullptr, {a});
        nodes_[r].backward_fn = [r, a, outer, full, win, off](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = *t.nodes_[r].grad;
            Tensor<T>& ga = t.gbuf(a);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < win; ++i)
                    ga[o * full + off + i] += g[o * win + i];
        };
        return r;
    }

    // ---- linear algebra ----------------------------------------------------

    /// x[N,D] * w[D,M] + b[M]
    Ref dense(Ref x, Ref w, Ref b) {
        const Tensor<T>& vx = value(x);
        const Tensor<T>& vw = value(w);
        const Tensor<T>& vb = value(b);
        if (vx.rank() != 2 || vw.rank() != 2)
            throw ShapeError("dense: x and w must be rank 2, got " + shape_str(vx.shape()) +
                             " and " + shape_str(vw.shape()));
        if (vx.shape()[1] != vw.shape()[0])
            throw ShapeError("dense: inner axis mismatch: x axis 1 is " +
                             std::to_string(vx.shape()[1]) + ", w axis 0 is " +
                             std::to_string(vw.shape()[0]));
        if (vb.rank() != 1 || vb.shape()[0] != vw.shape()[1])
            throw ShapeError("dense: bias must be [" + std::to_string(vw.shape()[1]) + "]");
        std::size_t n = vx.shape()[0], d = vx.shape()[1], m = vw.shape()[1];
        Tensor<T> out({n, m});
        gemm<T>(n, m, d, vx.data(), d, vw.data(), m, out.data(), m, false);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += vb[j];
        Ref r = push(std::move(out), needs(x) || needs(w) || needs(b), "dense", nullptr,
                     {x, w, b});
        nodes_[r].backward_fn = [r, x, w, b, n, d, m](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            if (t.needs(x))
                gemm_nt<T>(n, d, m, g.data(), m, t.value(w).data(), m,
                           t.gbuf(x).data(), d, true);
            if (t.needs(w))
                gemm_tn<T>(d, m, n, t.value(x).data(), d, g.data(), m,
                           t.gbuf(w).data(), m, true);
            if (t.needs(b)) {
                Tensor<T>& gb = t.gbuf(b);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
            }
        };
        return r;
    }

    /// Cross-correlation conv. x[N,C,H,W], w[F,C,kh,kw], b[F].
    Ref conv2d(Ref x, Ref w, Ref b, std::size_t stride, Pad pad) {
        const Tensor<T>& vx = value(x);
        const Tensor<T>& vw = value(w);
        const Tensor<T>& vb = value(b);
        auto spec = convdet::make_conv_spec(vx.shape(), vw.shape(), stride, pad);
        if (vb.rank() != 1 || vb.shape()[0] != spec.F)
            throw ShapeError("conv2d: bias must be [" + std::to_string(spec.F) + "]");
        Tensor<T> out({spec.N, spec.F, spec.Ho, spec.Wo});
        convdet::conv_fwd(spec, vx.data(), vw.data(), vb.data(), out.data());
        Ref r = push(std::move(out), needs(x) || needs(w) || needs(b), "conv2d", nullptr,
                     {x, w, b});
        nodes_[r].backward_fn = [r, x, w, b, spec](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            convdet::conv_bwd<T>(spec, t.value(x).data(), t.value(w).data(), g.data(),
                                 t.needs(x) ? t.gbuf(x).data() : nullptr,
                                 t.needs(w) ? t.gbuf(w).data() : nullptr,
                                 t.needs(b) ? t.gbuf(b).data() : nullptr);
        };
        return r;
    }

    /// Transposed conv. x[N,C,H,W], w[C,F,kh,kw], b[F]. Default emits the full
    /// (H-1)*stride+k output; Crop::same keeps an H*stride window.
    Ref deconv2d(Ref x, Ref w, Ref b, std::size_t stride, Crop crop = Crop::full) {
        const Tensor<T>& vx = value(x);
        const Tensor<T>& vw = value(w);
        const Tensor<T>& vb = value(b);
        auto spec = convdet::make_deconv_spec(vx.shape(), vw.shape(), stride, crop);
        if (vb.rank() != 1 || vb.shape()[0] != spec.F)
            throw ShapeError("deconv2d: bias must be [" + std::to_string(spec.F) + "]");
        Tensor<T> out({spec.N, spec.F, spec.Ho, spec.Wo});
        convdet::deconv_fwd(spec, vx.data(), vw.data(), vb.data(), out.data());
        Ref r = push(std::move(out), needs(x) || needs(w) || needs(b), "deconv2d", nullptr,
                     {x, w, b});
        nodes_[r].backward_fn = [r, x, w, b, spec](Tape& t) {
            const Tensor<T>& g = *t.nodes_[r].grad;
            convdet::deconv_bwd<T>(spec, t.value(x).data(), t.value(w).data(), g.data(),
                                   t.needs(x) ? t.gbuf(x).data() : nullptr,
                                   t.needs(w) ? t.gbuf(w).data() : nullptr,
                                   t.needs(b) ? t.gbuf(b).data() : nullptr);
        };
        return r;
    }

    // ---- backward ----------------------------------------------------------

    /// Seeds d(loss)/d(loss) = 1 and replays ops in reverse execution order.
    /// Parameter gradients accumulate into Parameter::grad. A second call on
    /// the same tape throws.
    void backward(Ref loss, std::vector<std::string>* visit_log = nullptr) {
        if (backward_done_)
            throw DvrmError("backward already ran on this tape; build a new tape");
        backward_done_ = true;
        if (value(loss).numel() != 1)
            throw ShapeError("backward: loss must be scalar, got shape " +
                             shape_str(value(loss).shape()));
        gbuf(loss)[0] = T(1);
        for (std::size_t i = loss + 1; i-- > 0;) {
            Node& nd = nodes_[i];
            if (!nd.needs_grad || !nd.grad || !nd.backward_fn) continue;
            if (visit_log) visit_log->push_back(nd.op);
            nd.backward_fn(*this);
        }
    }

private:
    struct Node {
        Tensor<T> value;
        std::optional<Tensor<T>> grad;
        bool needs_grad = false;
        std::string op;
        Parameter<T>* owner = nullptr;
        std::function<void(Tape&)> backward_fn;
    };

    bool needs(Ref r) const { return nodes_[r].needs_grad; }

    Tensor<T>& gbuf(Ref r) {
        auto& g = nodes_[r].grad;
        if (!g) g.emplace(nodes_[r].value.shape(), T(0));
        return *g;
    }

    void accumulate(Ref r, const Tensor<T>& g) {
        Tensor<T>& dst = gbuf(r);
        for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    Ref push(Tensor<T> v, bool needs_grad, const char* op, Parameter<T>* owner,
             std::initializer_list<Ref> /*inputs*/) {
        Node nd;
        nd.value = std::move(v);
        nd.needs_grad = needs_grad;
        nd.op = op;
        nd.owner = owner;
        nodes_.push_back(std::move(nd));
        return nodes_.size() - 1;
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

} // namespace dvrm
