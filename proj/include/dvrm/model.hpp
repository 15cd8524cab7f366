#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dvrm/container.hpp"
#include "dvrm/image.hpp"
#include "dvrm/rng.hpp"
#include "dvrm/signal_prep.hpp"
#include "dvrm/tape.hpp"

namespace dvrm {

struct ModelConfig {
    std::size_t signal_channels = 32;
    std::size_t signal_steps = 135;
    std::size_t image_side = 28;

    std::size_t rdb_count = 7;
    std::size_t conv_layers_per_rdb = 4;
    std::size_t growth_channels = 16;
    std::size_t base_channels = 32;
    double residual_scale = 0.2;

    std::size_t latent_dim = 128;
    std::size_t dr_blocks = 7; // decoder deconv blocks: two stride-2, rest stride-1
    double leak = 0.2;

    bool fixed_variance = false; // pixel log-variance frozen at 0
    double kl_weight = 1.0;
    double logvar_lo = -6.0, logvar_hi = 2.0;
    double latent_logvar_bound = 6.0; // posterior log-variance soft bound B

    std::size_t signal_dim() const { return signal_channels * signal_steps; }
    std::size_t pixel_count() const { return image_side * image_side; }
    std::size_t decoder_seed_side() const { return image_side / 4; }
    std::size_t decoder_seed_channels() const { return 2 * base_channels; }
    std::size_t mid_channels() const { return 3 * base_channels / 2; }

    void validate() const {
        if (!signal_channels || !signal_steps || !image_side) throw ParamError("zero model dims");
        if (image_side % 4 != 0) throw ParamError("image_side must be divisible by 4");
        if (!rdb_count || !conv_layers_per_rdb || !growth_channels || !base_channels)
            throw ParamError("RDB sizes must be positive");
        if (base_channels % 2 != 0) throw ParamError("base_channels must be even");
        if (residual_scale <= 0 || residual_scale > 1)
            throw ParamError("residual_scale must be in (0,1]");
        if (!latent_dim) throw ParamError("latent_dim must be positive");
        if (dr_blocks < 3) throw ParamError("dr_blocks must be at least 3");
        if (logvar_lo >= logvar_hi) throw ParamError("logvar clamp range is empty");
        if (!(latent_logvar_bound > 0)) throw ParamError("latent_logvar_bound must be positive");
    }
};

/// Refs into a forward tape; callers inspect values or run backward from loss.
template <typename T>
struct ForwardRefs {
    using Ref = typename Tape<T>::Ref;
    Ref t0 = 0, latent_mean = 0, latent_logvar = 0, z = 0;
    Ref pixel_mean = 0, pixel_logvar = 0;
    Ref kl = 0, rec = 0, loss = 0;
};

template <typename T>
class Model {
public:
    using Ref = typename Tape<T>::Ref;

    explicit Model(ModelConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        register_params();
    }

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter<T>*>& params() { return param_ptrs_; }
    Parameter<T>& param(const std::string& name) {
        for (auto* p : param_ptrs_)
            if (p->name == name) return *p;
        throw ParamError("no parameter named '" + name + "'");
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto* p : param_ptrs_) n += p->value.numel();
        return n;
    }

    void init_weights(std::uint64_t seed) {
        for (std::size_t i = 0; i < param_ptrs_.size(); ++i) {
            Parameter<T>& p = *param_ptrs_[i];
            Rng rng(derive_seed(seed, Stream::weight_init, i));
            if (p.value.rank() == 1) { // biases
                p.value.fill(T(0));
                continue;
            }
            std::size_t fan_in = fan_in_of(p);
            double limit = std::sqrt(6.0 / double(fan_in));
            for (std::size_t j = 0; j < p.value.numel(); ++j)
                p.value[j] = T(rng.uniform(-limit, limit));
            if (p.name.find(".fuse.w") != std::string::npos)
                for (std::size_t j = 0; j < p.value.numel(); ++j) p.value[j] *= T(0.1);
            // posterior heads start near zero so the posterior opens at the
            // prior; a hot log-variance head amplifies reparameterized noise
            // exponentially and can saturate the decoder before learning starts
            if (p.name == "enc.mu.w" || p.name == "enc.lv.w")
                for (std::size_t j = 0; j < p.value.numel(); ++j) p.value[j] *= T(0.1);
            p.zero_grad();
        }
    }

    // ---- forward pieces ----------------------------------------------------

    /// images [N,1,S,S] (zero-filled in inference mode), signals [N, C*steps]
    Ref fuse_inputs(Tape<T>& t, Ref images, Ref signals) {
        const Shape xs = t.value(images).shape(); // copied: pushing nodes may reallocate
        const Shape ys = t.value(signals).shape();
        if (xs.size() != 4 || xs[1] != 1 || xs[2] != cfg_.image_side || xs[3] != cfg_.image_side)
            throw ShapeError("fuse_inputs: images must be [N,1," + std::to_string(cfg_.image_side) +
                             "," + std::to_string(cfg_.image_side) + "], got " + shape_str(xs));
        if (ys.size() != 2 || ys[1] != cfg_.signal_dim())
            throw ShapeError("fuse_inputs: signals must be [N," +
                             std::to_string(cfg_.signal_dim()) + "], got " + shape_str(ys));
        if (xs[0] != ys[0])
            throw ShapeError("fuse_inputs: batch mismatch, " + std::to_string(xs[0]) +
                             " images vs " + std::to_string(ys[0]) + " signals");
        Ref proj = t.dense(signals, t.param(param("enc.proj.w")), t.param(param("enc.proj.b")));
        Ref map = t.reshape(proj, {xs[0], 1, cfg_.image_side, cfg_.image_side});
        return t.concat(images, map, 1);
    }

    struct Posterior {
        Ref mean, logvar;
    };

    Posterior encode(Tape<T>& t, Ref t0) {
        std::size_t layer = 0;
        Ref t1 = t.conv2d(t0, t.param(param("enc.conv_in.w")), t.param(param("enc.conv_in.b")),
                          1, Pad::same);
        check_stage(t, t1, "encoder", layer++, "conv_in");

        Ref x = t1;
        for (std::size_t r = 0; r < cfg_.rdb_count; ++r) {
            x = rdb(t, x, r);
            check_stage(t, x, "encoder", layer++, "rdb" + std::to_string(r));
        }
        Ref t2 = t.add(t1, t.mul_scalar(x, T(cfg_.residual_scale))); // global residual
        Ref t3 = t.conv2d(t2, t.param(param("enc.conv_post.w")),
                          t.param(param("enc.conv_post.b")), 1, Pad::same);
        check_stage(t, t3, "encoder", layer++, "conv_post");

        Ref t4 = t.concat(t3, t1, 1);
        const Shape s = t.value(t4).shape();
        Ref flat = t.reshape(t4, {s[0], s[1] * s[2] * s[3]});
        Posterior q;
        q.mean = t.dense(flat, t.param(param("enc.mu.w")), t.param(param("enc.mu.b")));
        check_stage(t, q.mean, "encoder", layer, "mu_head");
        Ref lv_raw = t.dense(flat, t.param(param("enc.lv.w")), t.param(param("enc.lv.b")));
        // soft-bound the log-variance to (-B, B) with B*tanh(raw/B), written
        // via sigmoid: tanh(y) = 2*sigmoid(2y) - 1. Identity-like near 0.
        // Unbounded sigma lets reparameterized noise amplify exponentially and
        // the KL term run away; a hard clamp would freeze saturated samples,
        // the tanh keeps a live gradient everywhere.
        const T B = T(cfg_.latent_logvar_bound);
        q.logvar = t.add_scalar(
            t.mul_scalar(t.sigmoid(t.mul_scalar(lv_raw, T(2) / B)), T(2) * B), -B);
        check_stage(t, q.logvar, "encoder", layer + 1, "logvar_head");
        return q;
    }

    /// z = mean + exp(0.5 logvar) * noise; noise is a non-differentiable input
    Ref reparameterize(Tape<T>& t, const Posterior& q, Ref noise) {
        check_same_shape(t.value(q.mean), t.value(noise), "reparameterize");
        Ref std_dev = t.exp(t.mul_scalar(q.logvar, T(0.5)));
        return t.add(q.mean, t.mul(std_dev, noise));
    }

    /// batch-summed closed form vs the unit Gaussian prior
    Ref kl_divergence(Tape<T>& t, const Posterior& q) {
        Ref mu2 = t.mul(q.mean, q.mean);
        Ref elv = t.exp(q.logvar);
        Ref inner = t.add_scalar(t.sub(t.add(mu2, elv), q.logvar), T(-1));
        return t.mul_scalar(t.sum(inner), T(0.5));
    }

    struct Decoded {
        Ref pixel_mean, pixel_logvar;
    };

    Decoded decode(Tape<T>& t, Ref z) {
        std::size_t layer = 0;
        const std::size_t side = cfg_.decoder_seed_side();
        const std::size_t ch = cfg_.decoder_seed_channels();
        Ref h = t.dense(z, t.param(param("dec.fc.w")), t.param(param("dec.fc.b")));
        Ref j1 = t.reshape(h, {t.value(z).shape()[0], ch, side, side});
        check_stage(t, j1, "decoder", layer++, "fc");

        Ref j2 = t.leaky_relu(t.conv2d(j1, t.param(param("dec.conv_in.w")),
                                       t.param(param("dec.conv_in.b")), 1, Pad::same),
                              T(cfg_.leak));
        check_stage(t, j2, "decoder", layer++, "conv_in");

        Ref x = j2;
        for (std::size_t d = 0; d < cfg_.dr_blocks; ++d) {
            std::string n = "dec.dr" + std::to_string(d);
            std::size_t stride = d < 2 ? 2 : 1;
            Crop crop = d < 2 ? Crop::full : Crop::same;
            x = t.leaky_relu(
                t.deconv2d(x, t.param(param(n + ".w")), t.param(param(n + ".b")), stride, crop),
                T(cfg_.leak));
            check_stage(t, x, "decoder", layer++, "dr" + std::to_string(d));
        }

        Decoded out;
        out.pixel_mean = t.sigmoid(t.conv2d(x, t.param(param("dec.mean_head.w")),
                                            t.param(param("dec.mean_head.b")), 1, Pad::same));
        check_stage(t, out.pixel_mean, "decoder", layer, "mean_head");
        if (cfg_.fixed_variance) {
            out.pixel_logvar = t.constant(Tensor<T>(t.value(out.pixel_mean).shape(), T(0)));
        } else {
            out.pixel_logvar =
                t.clamp(t.conv2d(x, t.param(param("dec.logvar_head.w")),
                                 t.param(param("dec.logvar_head.b")), 1, Pad::same),
                        T(cfg_.logvar_lo), T(cfg_.logvar_hi));
            check_stage(t, out.pixel_logvar, "decoder", layer + 1, "logvar_head");
        }
        return out;
    }

    /// batch-averaged Gaussian negative log-likelihood of the target pixels
    Ref recon_loss(Tape<T>& t, Ref target, const Decoded& d) {
        check_same_shape(t.value(target), t.value(d.pixel_mean), "recon_loss");
        const std::size_t n = t.value(target).shape()[0];
        Ref diff = t.sub(target, d.pixel_mean);
        Ref d2 = t.mul(diff, diff);
        Ref inv_var = t.exp(t.mul_scalar(d.pixel_logvar, T(-1)));
        Ref inner = t.add(d.pixel_logvar, t.mul(d2, inv_var));
        T floor = T(0.5) * T(std::log(2.0 * kPi)) * T(cfg_.pixel_count());
        return t.add_scalar(t.mul_scalar(t.sum(inner), T(0.5) / T(n)), floor);
    }

    /// Full training-mode forward: loss = recon + kl_weight * KL.
    /// images/signals/noise are constants; pass a zero image batch (and zero
    /// noise) for inference-style evaluation.
    /// Per-epoch z-score over all channels and steps. Recording gain is
    /// hardware-dependent, so the encoder consumes each epoch standardized;
    /// every ingestion path applies this exactly once. Inter-channel amplitude
    /// ratios survive (one mean/scale per epoch, not per channel).
    static void standardize_signals(Tensor<T>& s) {
        const Shape& sh = s.shape();
        if (sh.size() != 2) throw ShapeError("standardize_signals wants [N,D], got " + shape_str(sh));
        const std::size_t d = sh[1];
        for (std::size_t i = 0; i < sh[0]; ++i) {
            T* row = s.data() + i * d;
            double mean = 0;
            for (std::size_t j = 0; j < d; ++j) mean += double(row[j]);
            mean /= double(d);
            double var = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = double(row[j]) - mean;
                var += c * c;
            }
            const double scale = 1.0 / std::sqrt(var / double(d) + 1e-12);
            for (std::size_t j = 0; j < d; ++j) row[j] = T((double(row[j]) - mean) * scale);
        }
    }

    ForwardRefs<T> forward(Tape<T>& t, Tensor<T> images, Tensor<T> signals, Tensor<T> noise) {
        ForwardRefs<T> r;
        standardize_signals(signals);
        Ref xi = t.constant(std::move(images));
        Ref yi = t.constant(std::move(signals));
        r.t0 = fuse_inputs(t, xi, yi);
        Posterior q = encode(t, r.t0);
        r.latent_mean = q.mean;
        r.latent_logvar = q.logvar;
        Ref nz = t.constant(std::move(noise));
        r.z = reparameterize(t, q, nz);
        Decoded d = decode(t, r.z);
        r.pixel_mean = d.pixel_mean;
        r.pixel_logvar = d.pixel_logvar;
        r.kl = kl_divergence(t, q);
        r.rec = recon_loss(t, xi, d);
        r.loss = cfg_.kl_weight == 1.0
                     ? t.add(r.rec, r.kl)
                     : t.add(r.rec, t.mul_scalar(r.kl, T(cfg_.kl_weight)));
        return r;
    }

    /// Test-time path: zero image channel, z = posterior mean, returns pixel
    /// means as images in [0,1].
    std::vector<Image> reconstruct(const std::vector<SignalEpoch>& epochs) {
        for (const auto* p : param_ptrs_)
            if (!all_finite(p->value.data(), p->value.numel()))
                throw NumericError("parameter '" + p->name + "' holds non-finite values");
        Tape<T> t;
        Tensor<T> signals = pack_signals(epochs);
        standardize_signals(signals);
        const std::size_t n = epochs.size();
        Tensor<T> images({n, 1, cfg_.image_side, cfg_.image_side}, T(0));
        Ref xi = t.constant(std::move(images));
        Ref yi = t.constant(std::move(signals));
        Ref t0 = fuse_inputs(t, xi, yi);
        Posterior q = encode(t, t0);
        Decoded d = decode(t, q.mean);
        const Tensor<T>& pm = t.value(d.pixel_mean);
        std::vector<Image> out;
        for (std::size_t i = 0; i < n; ++i) {
            Image im(cfg_.image_side, cfg_.image_side);
            for (std::size_t p = 0; p < cfg_.pixel_count(); ++p)
                im.pix[p] = double(pm[i * cfg_.pixel_count() + p]);
            out.push_back(std::move(im));
        }
        return out;
    }

    /// Posterior means for a batch of epochs (zero image channel).
    std::vector<std::vector<double>> posterior_means(const std::vector<SignalEpoch>& epochs) {
        Tape<T> t;
        Tensor<T> signals = pack_signals(epochs);
        standardize_signals(signals);
        const std::size_t n = epochs.size();
        Tensor<T> images({n, 1, cfg_.image_side, cfg_.image_side}, T(0));
        Ref t0 = fuse_inputs(t, t.constant(std::move(images)), t.constant(std::move(signals)));
        Posterior q = encode(t, t0);
        const Tensor<T>& m = t.value(q.mean);
        std::vector<std::vector<double>> out(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < cfg_.latent_dim; ++j)
                out[i].push_back(double(m[i * cfg_.latent_dim + j]));
        return out;
    }

    // ---- batch packing -------------------------------------------------------

    Tensor<T> pack_signals(const std::vector<SignalEpoch>& epochs) const {
        if (epochs.empty()) throw ParamError("empty epoch batch");
        Tensor<T> out({epochs.size(), cfg_.signal_dim()});
        for (std::size_t i = 0; i < epochs.size(); ++i) {
            const auto& e = epochs[i];
            if (e.channels != cfg_.signal_channels || e.steps != cfg_.signal_steps)
                throw ShapeError("epoch " + std::to_string(i) + " is " +
                                 std::to_string(e.channels) + "x" + std::to_string(e.steps) +
                                 ", model wants " + std::to_string(cfg_.signal_channels) + "x" +
                                 std::to_string(cfg_.signal_steps));
            for (std::size_t j = 0; j < cfg_.signal_dim(); ++j)
                out[i * cfg_.signal_dim() + j] = T(e.data[j]);
        }
        return out;
    }

    Tensor<T> pack_images(const std::vector<Image>& images) const {
        if (images.empty()) throw ParamError("empty image batch");
        Tensor<T> out({images.size(), 1, cfg_.image_side, cfg_.image_side});
        for (std::size_t i = 0; i < images.size(); ++i) {
            if (images[i].h != cfg_.image_side || images[i].w != cfg_.image_side)
                throw ShapeError("image " + std::to_string(i) + " is " +
                                 std::to_string(images[i].h) + "x" + std::to_string(images[i].w) +
                                 ", model wants " + std::to_string(cfg_.image_side) + "x" +
                                 std::to_string(cfg_.image_side));
            for (std::size_t p = 0; p < cfg_.pixel_count(); ++p)
                out[i * cfg_.pixel_count() + p] = T(images[i].pix[p]);
        }
        return out;
    }

    // ---- checkpoint I/O ------------------------------------------------------

    void save(const std::string& path) const {
        Container c;
        c.meta["format"] = "dvrm-checkpoint";
        c.meta["signal_channels"] = std::to_string(cfg_.signal_channels);
        c.meta["signal_steps"] = std::to_string(cfg_.signal_steps);
        c.meta["image_side"] = std::to_string(cfg_.image_side);
        c.meta["rdb_count"] = std::to_string(cfg_.rdb_count);
        c.meta["conv_layers_per_rdb"] = std::to_string(cfg_.conv_layers_per_rdb);
        c.meta["growth_channels"] = std::to_string(cfg_.growth_channels);
        c.meta["base_channels"] = std::to_string(cfg_.base_channels);
        c.meta["residual_scale"] = fmt_double(cfg_.residual_scale);
        c.meta["latent_dim"] = std::to_string(cfg_.latent_dim);
        c.meta["dr_blocks"] = std::to_string(cfg_.dr_blocks);
        c.meta["leak"] = fmt_double(cfg_.leak);
        c.meta["fixed_variance"] = cfg_.fixed_variance ? "1" : "0";
        c.meta["kl_weight"] = fmt_double(cfg_.kl_weight);
        c.meta["logvar_lo"] = fmt_double(cfg_.logvar_lo);
        c.meta["logvar_hi"] = fmt_double(cfg_.logvar_hi);
        c.meta["latent_logvar_bound"] = fmt_double(cfg_.latent_logvar_bound);
        for (const auto* p : param_ptrs_) {
            if constexpr (std::is_same_v<T, float>)
                c.add_f32(p->name, p->value.shape(),
                          std::vector<float>(p->value.data(), p->value.data() + p->value.numel()));
            else
                c.add_f64(p->name, p->value.shape(),
                          std::vector<double>(p->value.data(), p->value.data() + p->value.numel()));
        }
        write_container(path, c);
    }

    static ModelConfig read_config(const Container& c) {
        if (!c.meta.count("format") || c.meta.at("format") != "dvrm-checkpoint")
            throw DataError("container is not a model checkpoint");
        ModelConfig cfg;
        cfg.signal_channels = std::stoul(c.meta.at("signal_channels"));
        cfg.signal_steps = std::stoul(c.meta.at("signal_steps"));
        cfg.image_side = std::stoul(c.meta.at("image_side"));
        cfg.rdb_count = std::stoul(c.meta.at("rdb_count"));
        cfg.conv_layers_per_rdb = std::stoul(c.meta.at("conv_layers_per_rdb"));
        cfg.growth_channels = std::stoul(c.meta.at("growth_channels"));
        cfg.base_channels = std::stoul(c.meta.at("base_channels"));
        cfg.residual_scale = std::stod(c.meta.at("residual_scale"));
        cfg.latent_dim = std::stoul(c.meta.at("latent_dim"));
        cfg.dr_blocks = std::stoul(c.meta.at("dr_blocks"));
        cfg.leak = std::stod(c.meta.at("leak"));
        cfg.fixed_variance = c.meta.at("fixed_variance") == "1";
        cfg.kl_weight = std::stod(c.meta.at("kl_weight"));
        cfg.logvar_lo = std::stod(c.meta.at("logvar_lo"));
        cfg.logvar_hi = std::stod(c.meta.at("logvar_hi"));
        if (c.meta.count("latent_logvar_bound"))
            cfg.latent_logvar_bound = std::stod(c.meta.at("latent_logvar_bound"));
        return cfg;
    }

    static Model load(const std::string& path) {
        Container c = read_container(path);
        Model m(read_config(c));
        for (auto* p : m.param_ptrs_) {
            const auto& a = c.get(p->name);
            if (a.shape != p->value.shape())
                throw DataError("checkpoint array '" + p->name + "' has shape " +
                                shape_str(a.shape) + ", model wants " + shape_str(p->value.shape()));
            if constexpr (std::is_same_v<T, float>) {
                if (a.dtype != "f32") throw DataError("checkpoint dtype mismatch for " + p->name);
                std::copy(a.f32.begin(), a.f32.end(), p->value.data());
            } else {
                if (a.dtype != "f64") throw DataError("checkpoint dtype mismatch for " + p->name);
                std::copy(a.f64.begin(), a.f64.end(), p->value.data());
            }
        }
        return m;
    }

private:
    ModelConfig cfg_;
    std::vector<std::unique_ptr<Parameter<T>>> params_;
    std::vector<Parameter<T>*> param_ptrs_;

    static std::string fmt_double(double v) {
        std::string s = std::to_string(v);
        return s;
    }

    void add_param(const std::string& name, Shape shape) {
        params_.push_back(std::make_unique<Parameter<T>>(name, Tensor<T>(std::move(shape), T(0))));
        param_ptrs_.push_back(params_.back().get());
    }

    void register_params() {
        const std::size_t px = cfg_.pixel_count();
        add_param("enc.proj.w", {cfg_.signal_dim(), px});
        add_param("enc.proj.b", {px});
        add_param("enc.conv_in.w", {cfg_.base_channels, 2, 2, 2});
        add_param("enc.conv_in.b", {cfg_.base_channels});
        for (std::size_t r = 0; r < cfg_.rdb_count; ++r) {
            std::string base = "enc.rdb" + std::to_string(r);
            std::size_t cin = cfg_.base_channels;
            for (std::size_t l = 0; l < cfg_.conv_layers_per_rdb; ++l) {
                add_param(base + ".conv" + std::to_string(l) + ".w",
                          {cfg_.growth_channels, cin, 2, 2});
                add_param(base + ".conv" + std::to_string(l) + ".b", {cfg_.growth_channels});
                cin += cfg_.growth_channels;
            }
            add_param(base + ".fuse.w", {cfg_.base_channels, cin, 1, 1});
            add_param(base + ".fuse.b", {cfg_.base_channels});
        }
        add_param("enc.conv_post.w", {cfg_.base_channels, cfg_.base_channels, 2, 2});
        add_param("enc.conv_post.b", {cfg_.base_channels});
        std::size_t flat = 2 * cfg_.base_channels * px;
        add_param("enc.mu.w", {flat, cfg_.latent_dim});
        add_param("enc.mu.b", {cfg_.latent_dim});
        add_param("enc.lv.w", {flat, cfg_.latent_dim});
        add_param("enc.lv.b", {cfg_.latent_dim});

        const std::size_t side = cfg_.decoder_seed_side();
        const std::size_t ch0 = cfg_.decoder_seed_channels();
        add_param("dec.fc.w", {cfg_.latent_dim, ch0 * side * side});
        add_param("dec.fc.b", {ch0 * side * side});
        add_param("dec.conv_in.w", {ch0, ch0, 2, 2});
        add_param("dec.conv_in.b", {ch0});
        std::size_t cin = ch0;
        for (std::size_t d = 0; d < cfg_.dr_blocks; ++d) {
            std::size_t cout = d == 0 ? cfg_.mid_channels() : cfg_.base_channels;
            if (d >= 2) cout = cfg_.base_channels;
            // deconv weights are [C_in, C_out, kh, kw]
            add_param("dec.dr" + std::to_string(d) + ".w", {cin, cout, 2, 2});
            add_param("dec.dr" + std::to_string(d) + ".b", {cout});
            cin = cout;
        }
        add_param("dec.mean_head.w", {1, cfg_.base_channels, 2, 2});
        add_param("dec.mean_head.b", {1});
        add_param("dec.logvar_head.w", {1, cfg_.base_channels, 2, 2});
        add_param("dec.logvar_head.b", {1});
    }

    std::size_t fan_in_of(const Parameter<T>& p) const {
        const auto& s = p.value.shape();
        if (s.size() == 2) return s[0]; // dense [in, out]
        if (s.size() == 4) {
            if (p.name.rfind("dec.dr", 0) == 0) return s[0] * s[2] * s[3]; // deconv [Cin,Cout,k,k]
            return s[1] * s[2] * s[3];                                     // conv [F,C,k,k]
        }
        return p.value.numel();
    }

    Ref rdb(Tape<T>& t, Ref x, std::size_t index) {
        std::string base = "enc.rdb" + std::to_string(index);
        Ref cat = x;
        for (std::size_t l = 0; l < cfg_.conv_layers_per_rdb; ++l) {
            std::string n = base + ".conv" + std::to_string(l);
            Ref c = t.leaky_relu(t.conv2d(cat, t.param(param(n + ".w")),
                                          t.param(param(n + ".b")), 1, Pad::same),
                                 T(cfg_.leak));
            cat = t.concat(cat, c, 1);
        }
        Ref fused = t.conv2d(cat, t.param(param(base + ".fuse.w")),
                             t.param(param(base + ".fuse.b")), 1, Pad::same);
        return t.add(x, t.mul_scalar(fused, T(cfg_.residual_scale)));
    }

    void check_stage(const Tape<T>& t, Ref r, const char* which, std::size_t layer,
                     const std::string& name) const {
        const Tensor<T>& v = t.value(r);
        if (!all_finite(v.data(), v.numel()))
            throw NumericError(std::string(which) + " layer " + std::to_string(layer) + " (" +
                               name + "): non-finite activation");
    }
};

} // namespace dvrm
