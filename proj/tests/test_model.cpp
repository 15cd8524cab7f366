#include "doctest.h"

#include <cmath>
#include <cstring>

#include "dvrm/gradcheck.hpp"
#include "dvrm/model.hpp"
#include "dvrm/rng.hpp"

using namespace dvrm;

namespace {

ModelConfig mini_config() {
    ModelConfig cfg;
    cfg.rdb_count = 1;
    cfg.base_channels = 8;
    cfg.growth_channels = 6;
    cfg.latent_dim = 4;
    return cfg;
}

template <typename T>
Tensor<T> rand_tensor(Shape s, Rng& rng, double lo = -1, double hi = 1) {
    Tensor<T> t(std::move(s));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(lo, hi));
    return t;
}

} // namespace

TEST_CASE("config validation rejects broken descriptors") {
    ModelConfig cfg;
    cfg.image_side = 30;
    CHECK_THROWS_AS(Model<float>{cfg}, ParamError);
    cfg = ModelConfig{};
    cfg.residual_scale = 1.5;
    CHECK_THROWS_AS(Model<float>{cfg}, ParamError);
    cfg = ModelConfig{};
    cfg.base_channels = 9;
    CHECK_THROWS_AS(Model<float>{cfg}, ParamError);
}

TEST_CASE("parameter count is a pure function of the descriptor") {
    Model<float> a(mini_config()), b(mini_config());
    CHECK(a.param_count() == b.param_count());

    auto cfg2 = mini_config();
    cfg2.latent_dim = 8;
    Model<float> c(cfg2);
    CHECK(c.param_count() != a.param_count());

    // default descriptor: closed-form expected count
    ModelConfig d;
    std::size_t want = 0;
    want += 4320 * 784 + 784;        // signal projection
    want += 32 * 2 * 4 + 32;         // encoder conv_in
    for (int r = 0; r < 7; ++r) {    // RDBs
        std::size_t cin = 32;
        for (int l = 0; l < 4; ++l) {
            want += 16 * cin * 4 + 16;
            cin += 16;
        }
        want += 32 * cin + 32;       // 1x1 fusion
    }
    want += 32 * 32 * 4 + 32;        // conv_post
    want += 2 * (50176 * 128 + 128); // mu + logvar heads
    want += 128 * 3136 + 3136;       // decoder fc
    want += 64 * 64 * 4 + 64;        // decoder conv_in
    want += 64 * 48 * 4 + 48;        // dr0
    want += 48 * 32 * 4 + 32;        // dr1
    want += 5 * (32 * 32 * 4 + 32);  // dr2..dr6
    want += 2 * (32 * 4 + 1);        // pixel mean + logvar heads
    CHECK(Model<float>(d).param_count() == want);
}

TEST_CASE("fuse_inputs shapes, channel-0 round-trip, bias pattern") {
    Model<float> m(mini_config());
    m.init_weights(3);
    Tape<float> t;
    Rng rng(5);
    auto imgs = rand_tensor<float>({1, 1, 28, 28}, rng, 0, 1);
    auto sigs = rand_tensor<float>({1, 4320}, rng);
    Tensor<float> imgs_copy = imgs;
    auto t0 = m.fuse_inputs(t, t.constant(std::move(imgs)), t.constant(std::move(sigs)));
    CHECK(t.value(t0).shape() == Shape{1, 2, 28, 28});

    // channel 0 is exactly the input image
    auto ch0 = t.slice(t0, 1, 0, 1);
    CHECK(std::memcmp(t.value(ch0).data(), imgs_copy.data(), 784 * sizeof(float)) == 0);

    // zero image + zero epoch: image channel 0, signal channel = projection bias
    auto& bias = m.param("enc.proj.b");
    for (std::size_t i = 0; i < bias.value.numel(); ++i) bias.value[i] = float(i) * 0.001f;
    Tape<float> t2;
    auto z0 = m.fuse_inputs(t2, t2.constant(Tensor<float>({2, 1, 28, 28}, 0.f)),
                            t2.constant(Tensor<float>({2, 4320}, 0.f)));
    const auto& v = t2.value(z0);
    for (std::size_t p = 0; p < 784; ++p) {
        CHECK(v[p] == 0.f);                     // image channel, sample 0
        CHECK(v[784 + p] == bias.value[p]);     // projected channel
        CHECK(v[2 * 784 + p] == 0.f);           // image channel, sample 1
        CHECK(v[3 * 784 + p] == bias.value[p]);
    }

    // batch mismatch
    Tape<float> t3;
    CHECK_THROWS_WITH_AS(m.fuse_inputs(t3, t3.constant(Tensor<float>({2, 1, 28, 28}, 0.f)),
                                       t3.constant(Tensor<float>({3, 4320}, 0.f))),
                         doctest::Contains("batch mismatch"), ShapeError);
}

TEST_CASE("zero weights: posterior equals prior, KL is zero") {
    Model<float> m(mini_config()); // params default to zero
    Tape<float> t;
    Rng rng(6);
    auto t0 = m.fuse_inputs(t, t.constant(Tensor<float>({2, 1, 28, 28}, 0.f)),
                            t.constant(Tensor<float>({2, 4320}, 0.f)));
    auto q = m.encode(t, t0);
    for (std::size_t i = 0; i < t.value(q.mean).numel(); ++i) {
        CHECK(t.value(q.mean)[i] == 0.f);
        CHECK(t.value(q.logvar)[i] == 0.f);
    }
    CHECK(t.value(m.kl_divergence(t, q))[0] == 0.f);
}

TEST_CASE("encode is deterministic and reports non-finite layers") {
    Model<float> m(mini_config());
    m.init_weights(11);
    Rng rng(7);
    auto imgs = rand_tensor<float>({2, 1, 28, 28}, rng, 0, 1);
    auto sigs = rand_tensor<float>({2, 4320}, rng);

    auto run = [&]() {
        Tape<float> t;
        auto t0 = m.fuse_inputs(t, t.constant(imgs), t.constant(sigs));
        auto q = m.encode(t, t0);
        return std::make_pair(t.value(q.mean), t.value(q.logvar));
    };
    auto [m1, lv1] = run();
    auto [m2, lv2] = run();
    CHECK(std::memcmp(m1.data(), m2.data(), m1.numel() * sizeof(float)) == 0);
    CHECK(std::memcmp(lv1.data(), lv2.data(), lv1.numel() * sizeof(float)) == 0);

    m.param("enc.rdb0.conv1.w").value[0] = std::numeric_limits<float>::infinity();
    Tape<float> t;
    auto t0 = m.fuse_inputs(t, t.constant(imgs), t.constant(sigs));
    CHECK_THROWS_WITH_AS(m.encode(t, t0), doctest::Contains("encoder layer"), NumericError);
}

TEST_CASE("reparameterize: pinned cases and Monte Carlo convergence") {
    Model<double> m(mini_config());
    Tape<double> t;
    Tensor<double> mean({1, 4});
    Tensor<double> logvar({1, 4});
    for (int i = 0; i < 4; ++i) {
        mean[i] = 0.5 * (i + 1);
        logvar[i] = 0.3 * i - 0.5;
    }
    Model<double>::Posterior q{t.constant(mean), t.constant(logvar)};

    auto z0 = m.reparameterize(t, q, t.constant(Tensor<double>({1, 4}, 0.0)));
    for (int i = 0; i < 4; ++i) CHECK(t.value(z0)[i] == mean[i]);

    Model<double>::Posterior unit{t.constant(mean), t.constant(Tensor<double>({1, 4}, 0.0))};
    Tensor<double> n({1, 4});
    for (int i = 0; i < 4; ++i) n[i] = 0.1 * (i - 2);
    auto z1 = m.reparameterize(t, unit, t.constant(n));
    for (int i = 0; i < 4; ++i) CHECK(t.value(z1)[i] == doctest::Approx(mean[i] + n[i]).epsilon(1e-15));

    // sample mean converges to q.mean at the 1/sqrt(n) rate
    Rng rng(8);
    const std::size_t draws = 100000;
    std::vector<double> acc(4, 0.0);
    for (std::size_t s = 0; s < draws; ++s) {
        Tape<double> ts;
        Tensor<double> noise({1, 4});
        for (int i = 0; i < 4; ++i) noise[i] = rng.normal();
        Model<double>::Posterior qq{ts.constant(mean), ts.constant(logvar)};
        auto z = m.reparameterize(ts, qq, ts.constant(noise));
        for (int i = 0; i < 4; ++i) acc[i] += ts.value(z)[i];
    }
    for (int i = 0; i < 4; ++i) {
        double sd = std::exp(0.5 * logvar[i]);
        CHECK(std::abs(acc[i] / draws - mean[i]) <= 3.0 * sd / std::sqrt(double(draws)));
    }
}

TEST_CASE("kl divergence: closed form pinned values and Monte Carlo oracle") {
    Model<double> m(mini_config());
    {
        Tape<double> t;
        Model<double>::Posterior q{t.constant(Tensor<double>({1, 1}, 1.0)),
                                   t.constant(Tensor<double>({1, 1}, 0.0))};
        CHECK(t.value(m.kl_divergence(t, q))[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    {
        // batch-summed: two identical rows double the loss
        Tape<double> t;
        Model<double>::Posterior q{t.constant(Tensor<double>({2, 1}, 1.0)),
                                   t.constant(Tensor<double>({2, 1}, 0.0))};
        CHECK(t.value(m.kl_divergence(t, q))[0] == doctest::Approx(1.0).epsilon(1e-15));
    }

    Rng rng(9);
    for (int rep = 0; rep < 2; ++rep) {
        const std::size_t d = 6;
        Tensor<double> mean({1, d}), logvar({1, d});
        for (std::size_t i = 0; i < d; ++i) {
            mean[i] = rng.uniform(-1.5, 1.5);
            logvar[i] = rng.uniform(-1.0, 1.0);
        }
        Tape<double> t;
        Model<double>::Posterior q{t.constant(mean), t.constant(logvar)};
        double closed = t.value(m.kl_divergence(t, q))[0];

        // E_q[log q - log p] by direct sampling
        double acc = 0;
        const std::size_t draws = 300000;
        for (std::size_t s = 0; s < draws; ++s)
            for (std::size_t i = 0; i < d; ++i) {
                double sd = std::exp(0.5 * logvar[i]);
                double x = mean[i] + sd * rng.normal();
                double logq = -0.5 * (std::log(2 * kPi) + logvar[i]) -
                              0.5 * (x - mean[i]) * (x - mean[i]) / (sd * sd);
                double logp = -0.5 * std::log(2 * kPi) - 0.5 * x * x;
                acc += logq - logp;
            }
        double mc = acc / double(draws);
        CHECK(std::abs(closed - mc) / std::abs(closed) < 0.02);
    }
}

TEST_CASE("decode: 28x28 heads, sigmoid range, determinism") {
    Model<float> m(mini_config());
    m.init_weights(12);
    Rng rng(10);
    auto z = rand_tensor<float>({3, 4}, rng);
    auto run = [&]() {
        Tape<float> t;
        auto d = m.decode(t, t.constant(z));
        return std::make_pair(t.value(d.pixel_mean), t.value(d.pixel_logvar));
    };
    auto [pm, plv] = run();
    CHECK(pm.shape() == Shape{3, 1, 28, 28});
    CHECK(plv.shape() == Shape{3, 1, 28, 28});
    for (std::size_t i = 0; i < pm.numel(); ++i) {
        CHECK(pm[i] > 0.f);
        CHECK(pm[i] < 1.f);
        CHECK(plv[i] >= -6.f);
        CHECK(plv[i] <= 2.f);
    }
    auto [pm2, plv2] = run();
    CHECK(std::memcmp(pm.data(), pm2.data(), pm.numel() * sizeof(float)) == 0);
    CHECK(std::memcmp(plv.data(), plv2.data(), plv.numel() * sizeof(float)) == 0);
}

TEST_CASE("recon loss: pinned closed forms and zero gradient at the optimum") {
    Model<double> m(mini_config());
    const double log2pi = std::log(2 * kPi);
    Rng rng(11);
    auto x = rand_tensor<double>({2, 1, 28, 28}, rng, 0, 1);
    {
        // x == mean, log_var 0: the likelihood floor per sample
        Tape<double> t;
        Model<double>::Decoded d{t.constant(x), t.constant(Tensor<double>({2, 1, 28, 28}, 0.0))};
        double got = t.value(m.recon_loss(t, t.constant(x), d))[0];
        CHECK(got == doctest::Approx(784 * 0.5 * log2pi).epsilon(1e-12));
    }
    {
        // one unit residual on one pixel adds exactly 1/2 (batch of 1)
        Tensor<double> xa({1, 1, 28, 28}, 0.0), ma({1, 1, 28, 28}, 0.0);
        xa[13] = 1.0;
        Tape<double> t;
        Model<double>::Decoded d{t.constant(ma), t.constant(Tensor<double>({1, 1, 28, 28}, 0.0))};
        double got = t.value(m.recon_loss(t, t.constant(xa), d))[0];
        CHECK(got == doctest::Approx(784 * 0.5 * log2pi + 0.5).epsilon(1e-12));
    }
    {
        // gradient w.r.t. pixel means vanishes exactly at mean == x
        Parameter<double> pm("pm", x);
        Tape<double> t;
        auto pref = t.param(pm);
        Model<double>::Decoded d{pref, t.constant(Tensor<double>({2, 1, 28, 28}, 0.0))};
        auto loss = m.recon_loss(t, t.constant(x), d);
        t.backward(loss);
        for (std::size_t i = 0; i < pm.grad.numel(); ++i) CHECK(pm.grad[i] == 0.0);
    }
}

TEST_CASE("total loss decomposes and respects the KL floor") {
    auto cfg = mini_config();
    Model<float> m(cfg);
    m.init_weights(13);
    Rng rng(12);
    auto imgs = rand_tensor<float>({2, 1, 28, 28}, rng, 0, 1);
    auto sigs = rand_tensor<float>({2, 4320}, rng);
    Tensor<float> noise({2, cfg.latent_dim});
    for (std::size_t i = 0; i < noise.numel(); ++i) noise[i] = float(rng.normal());

    Tape<float> t;
    auto r = m.forward(t, imgs, sigs, noise);
    float kl = t.value(r.kl)[0];
    float rec = t.value(r.rec)[0];
    CHECK(kl >= 0.f);
    CHECK(t.value(r.loss)[0] == doctest::Approx(rec + kl).epsilon(1e-6));

    // the variance head is clamped, so the per-pixel term is bounded below
    float floor = 784.f * 0.5f * (std::log(2.f * float(kPi)) - 6.f);
    CHECK(rec >= floor);
}

TEST_CASE("full-model gradient check on the miniature architecture (float64)") {
    auto cfg = mini_config();
    Model<double> m(cfg);
    // The loss surface has leaky_relu/clamp kinks; at a generic point the
    // central-difference secant stays on one side of every kink and the check
    // is tight. This seed was verified to give >10x headroom; a wrong adjoint
    // fails at every seed, so the pinned point loses no detection power.
    m.init_weights(10);
    Rng rng(1010);
    auto imgs = rand_tensor<double>({2, 1, 28, 28}, rng, 0, 1);
    auto sigs = rand_tensor<double>({2, 4320}, rng, -0.5, 0.5);
    Tensor<double> noise({2, cfg.latent_dim});
    for (std::size_t i = 0; i < noise.numel(); ++i) noise[i] = rng.normal();

    auto run = [&](bool with_grad) {
        Tape<double> t;
        auto r = m.forward(t, imgs, sigs, noise);
        if (with_grad) t.backward(r.loss);
        return t.value(r.loss)[0];
    };

    double worst = 0;
    std::string worst_name;
    for (auto* p : m.params()) {
        auto res = finite_diff_check<double>(run, *p, 1e-5, 4);
        if (res.max_rel_err > worst) {
            worst = res.max_rel_err;
            worst_name = p->name;
        }
    }
    INFO("worst layer: ", worst_name, " rel err ", worst);
    CHECK(worst <= 1e-4);
}

TEST_CASE("reconstruct: determinism, range, shape, NaN rejection") {
    auto cfg = mini_config();
    Model<float> m(cfg);
    m.init_weights(31);

    std::vector<SignalEpoch> eps;
    Rng rng(32);
    for (int i = 0; i < 3; ++i) {
        SignalEpoch e;
        e.channels = 32;
        e.steps = 135;
        e.data.resize(32 * 135);
        for (auto& v : e.data) v = rng.uniform(-1, 1);
        eps.push_back(std::move(e));
    }
    auto r1 = m.reconstruct(eps);
    auto r2 = m.reconstruct(eps);
    REQUIRE(r1.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r1[i].h == 28);
        CHECK(r1[i].w == 28);
        for (double p : r1[i].pix) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
        CHECK(std::memcmp(r1[i].pix.data(), r2[i].pix.data(), 784 * sizeof(double)) == 0);
    }

    auto means = m.posterior_means(eps);
    REQUIRE(means.size() == 3);
    CHECK(means[0].size() == cfg.latent_dim);

    m.param("dec.fc.w").value[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(m.reconstruct(eps), NumericError);

    SignalEpoch bad;
    bad.channels = 16;
    bad.steps = 135;
    bad.data.resize(16 * 135, 0.0);
    Model<float> m2(cfg);
    CHECK_THROWS_AS(m2.reconstruct({bad}), ShapeError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    auto cfg = mini_config();
    cfg.fixed_variance = true;
    cfg.kl_weight = 0.5;
    Model<float> m(cfg);
    m.init_weights(41);
    m.save("/tmp/dvrm_test_ckpt.bin");

    auto r = Model<float>::load("/tmp/dvrm_test_ckpt.bin");
    CHECK(r.config().fixed_variance == true);
    CHECK(r.config().kl_weight == doctest::Approx(0.5));
    CHECK(r.config().base_channels == 8);
    REQUIRE(r.params().size() == m.params().size());
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        auto* a = m.params()[i];
        auto* b = r.params()[i];
        CHECK(a->name == b->name);
        CHECK(std::memcmp(a->value.data(), b->value.data(),
                          a->value.numel() * sizeof(float)) == 0);
    }
    std::remove("/tmp/dvrm_test_ckpt.bin");
}

TEST_CASE("fixed-variance mode freezes the pixel log-variance at zero") {
    auto cfg = mini_config();
    cfg.fixed_variance = true;
    Model<float> m(cfg);
    m.init_weights(51);
    Tape<float> t;
    Rng rng(52);
    auto z = rand_tensor<float>({2, 4}, rng);
    auto d = m.decode(t, t.constant(z));
    for (std::size_t i = 0; i < t.value(d.pixel_logvar).numel(); ++i)
        CHECK(t.value(d.pixel_logvar)[i] == 0.f);
}
