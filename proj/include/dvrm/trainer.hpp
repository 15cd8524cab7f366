#pragma once

#include <array>
#include <cstdio>
#include <functional>
#include <limits>
#include <vector>

#include "dvrm/adam.hpp"
#include "dvrm/model.hpp"

namespace dvrm {

struct TrainConfig {
    std::size_t iterations_per_epoch = 2000;
    std::size_t epochs = 10;
    std::size_t batch_size = 20;
    std::uint64_t seed = 42;
    AdamConfig adam;               // lr 2e-5, betas 0.9/0.999
    double image_dropout = 0.5;    // chance a sample's image channel is zeroed
    std::size_t patience = 3;      // early-stop after this many non-improving epochs; 0 disables
    std::array<double, 3> split = {0.8, 0.1, 0.1};

    void validate() const {
        adam.validate();
        if (!batch_size) throw ParamError("train: batch_size must be positive");
        if (!iterations_per_epoch) throw ParamError("train: iterations_per_epoch must be positive");
        if (image_dropout < 0 || image_dropout > 1)
            throw ParamError("train: image_dropout must lie in [0,1]");
    }
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

/// Stratified 3-way split: per-class deterministic shuffle, then
/// largest-remainder apportionment of the ratios within each class.
SplitIndices split_dataset(const std::vector<int>& labels, std::array<double, 3> ratios,
                           std::uint64_t seed);

struct LossCurve {
    std::vector<double> train; // one entry per iteration
    std::vector<double> val;   // one entry per completed epoch
};

struct TrainResult {
    LossCurve curve;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0; // 1-based; 0 = no validation performed
    double best_val = std::numeric_limits<double>::infinity();
    bool early_stopped = false;
};

void write_loss_csv(const std::string& path, const std::vector<double>& losses);
void write_val_csv(const std::string& path, const std::vector<double>& losses);

template <typename T>
double eval_loss(Model<T>& model, const std::vector<SignalEpoch>& eps,
                 const std::vector<Image>& imgs, std::size_t chunk);

/// Optimizes `model` in place. Each epoch runs iterations_per_epoch Adam steps
/// over shuffled mini-batches (reshuffling each full pass), then scores the
/// validation split in inference mode (zero image channel, zero latent noise).
/// The best-validation parameters are restored before returning. A non-finite
/// training loss aborts with the best (or initial) parameters restored.
template <typename T>
TrainResult train_model(Model<T>& model, const std::vector<SignalEpoch>& train_eps,
                        const std::vector<Image>& train_imgs,
                        const std::vector<SignalEpoch>& val_eps,
                        const std::vector<Image>& val_imgs, const TrainConfig& cfg,
                        const std::function<void(std::size_t, double, double)>& on_epoch = {}) {
    cfg.validate();
    if (train_eps.empty()) throw ParamError("train: empty training split");
    if (train_eps.size() != train_imgs.size())
        throw ShapeError("train: " + std::to_string(train_eps.size()) + " epochs vs " +
                         std::to_string(train_imgs.size()) + " images");
    if (val_eps.size() != val_imgs.size())
        throw ShapeError("train: validation epochs/images length mismatch");

    const ModelConfig& mc = model.config();
    const std::size_t n = train_eps.size();
    const std::size_t d = mc.latent_dim;

    Adam<T> opt(model.params(), cfg.adam);
    Rng drop_rng(derive_seed(cfg.seed, Stream::image_dropout, 0));
    Rng noise_rng(derive_seed(cfg.seed, Stream::latent_noise, 0));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t pos = n;
    std::uint64_t pass = 0;
    auto next_index = [&]() {
        if (pos >= n) {
            Rng r(derive_seed(cfg.seed, Stream::batch_shuffle, pass++));
            r.shuffle(order);
            pos = 0;
        }
        return order[pos++];
    };

    auto snapshot = [&]() {
        std::vector<Tensor<T>> vals;
        vals.reserve(model.params().size());
        for (auto* p : model.params()) vals.push_back(p->value);
        return vals;
    };
    auto restore = [&](const std::vector<Tensor<T>>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) model.params()[i]->value = vals[i];
    };

    std::vector<Tensor<T>> best = snapshot(); // initial params are the first "good" checkpoint
    TrainResult res;
    std::size_t bad_epochs = 0;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
            const std::size_t bs = std::min(cfg.batch_size, n);
            Tensor<T> images({bs, 1, mc.image_side, mc.image_side});
            Tensor<T> signals({bs, mc.signal_dim()});
            Tensor<T> noise({bs, d});
            for (std::size_t b = 0; b < bs; ++b) {
                std::size_t idx = next_index();
                const bool drop = drop_rng.uniform() < cfg.image_dropout;
                const Image& im = train_imgs[idx];
                for (std::size_t p = 0; p < mc.pixel_count(); ++p)
                    images[b * mc.pixel_count() + p] = drop ? T(0) : T(im.pix[p]);
                const SignalEpoch& ep = train_eps[idx];
                if (ep.channels != mc.signal_channels || ep.steps != mc.signal_steps)
                    throw ShapeError("train: epoch " + std::to_string(idx) + " is " +
                                     std::to_string(ep.channels) + "x" + std::to_string(ep.steps));
                for (std::size_t j = 0; j < mc.signal_dim(); ++j)
                    signals[b * mc.signal_dim() + j] = T(ep.data[j]);
                for (std::size_t j = 0; j < d; ++j) noise[b * d + j] = T(noise_rng.normal());
            }

            Tape<T> t;
            double loss;
            try {
                auto r = model.forward(t, std::move(images), std::move(signals), std::move(noise));
                t.backward(r.loss);
                loss = double(t.value(r.loss)[0]);
            } catch (const NumericError&) {
                restore(best);
                throw;
            }
            if (!std::isfinite(loss)) {
                restore(best);
                throw NumericError("train: loss became non-finite at epoch " +
                                   std::to_string(e + 1) + " iteration " + std::to_string(it + 1) +
                                   "; best checkpoint restored");
            }
            opt.step();
            res.curve.train.push_back(loss);
        }
        res.epochs_run = e + 1;

        if (!val_eps.empty()) {
            double vl = eval_loss(model, val_eps, val_imgs, cfg.batch_size);
            res.curve.val.push_back(vl);
            if (on_epoch) on_epoch(e + 1, res.curve.train.back(), vl);
            if (vl < res.best_val) {
                res.best_val = vl;
                res.best_epoch = e + 1;
                best = snapshot();
                bad_epochs = 0;
            } else if (++bad_epochs >= cfg.patience && cfg.patience > 0) {
                res.early_stopped = true;
                break;
            }
        } else if (on_epoch) {
            on_epoch(e + 1, res.curve.train.back(), std::numeric_limits<double>::quiet_NaN());
        }
    }

    if (!val_eps.empty() && res.epochs_run > 0) restore(best);
    return res;
}

/// Eq.9 loss of a split in inference mode (zero image channel, zero noise),
/// evaluated in chunks: per-sample-averaged reconstruction term plus the
/// batch-summed KL of the whole split.
template <typename T>
double eval_loss(Model<T>& model, const std::vector<SignalEpoch>& eps,
                 const std::vector<Image>& imgs, std::size_t chunk) {
    if (eps.empty()) throw ParamError("eval_loss: empty split");
    if (eps.size() != imgs.size()) throw ShapeError("eval_loss: epochs/images length mismatch");
    const ModelConfig& mc = model.config();
    const std::size_t m = eps.size();
    double rec_sum = 0, kl_sum = 0;
    for (std::size_t at = 0; at < m; at += chunk) {
        const std::size_t bn = std::min(chunk, m - at);
        Tensor<T> images({bn, 1, mc.image_side, mc.image_side}, T(0));
        Tensor<T> target({bn, 1, mc.image_side, mc.image_side});
        Tensor<T> signals({bn, mc.signal_dim()});
        for (std::size_t b = 0; b < bn; ++b) {
            for (std::size_t p = 0; p < mc.pixel_count(); ++p)
                target[b * mc.pixel_count() + p] = T(imgs[at + b].pix[p]);
            for (std::size_t j = 0; j < mc.signal_dim(); ++j)
                signals[b * mc.signal_dim() + j] = T(eps[at + b].data[j]);
        }
        Model<T>::standardize_signals(signals);
        Tape<T> t;
        auto t0 = model.fuse_inputs(t, t.constant(std::move(images)),
                                    t.constant(std::move(signals)));
        auto q = model.encode(t, t0);
        auto dec = model.decode(t, q.mean); // zero noise: z is the posterior mean
        auto rec = model.recon_loss(t, t.constant(std::move(target)), dec);
        auto kl = model.kl_divergence(t, q);
        rec_sum += double(bn) * double(t.value(rec)[0]);
        kl_sum += double(t.value(kl)[0]);
    }
    return rec_sum / double(m) + model.config().kl_weight * kl_sum;
}

} // namespace dvrm
