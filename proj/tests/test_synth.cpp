#include "doctest.h"

#include <cmath>
#include <cstring>
#include <map>

#include "dvrm/metrics.hpp"
#include "dvrm/synth_data.hpp"

using namespace dvrm;

namespace {

std::uint64_t image_hash(const Image& im) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double p : im.pix) {
        auto b = (unsigned char)std::lround(std::clamp(p, 0.0, 1.0) * 255.0);
        h = (h ^ b) * 0x100000001b3ull;
    }
    return h;
}

double ink_fraction(const Image& im) {
    std::size_t n = 0;
    for (double p : im.pix) n += p > 0.5;
    return double(n) / double(im.size());
}

// mean-over-channels magnitude spectrum on the template frequency grid
std::vector<double> mean_spectrum(const SignalEpoch& e) {
    std::vector<double> spec(kTemplateFreqBins, 0.0);
    for (std::size_t b = 0; b < kTemplateFreqBins; ++b) {
        double f = kTemplateFreqLo + kTemplateFreqStep * double(b);
        double w = 2.0 * kPi * f / 128.0;
        for (std::size_t ch = 0; ch < e.channels; ++ch) {
            double re = 0, im = 0;
            for (std::size_t t = 0; t < e.steps; ++t) {
                re += e.data[ch * e.steps + t] * std::cos(w * double(t));
                im += e.data[ch * e.steps + t] * std::sin(w * double(t));
            }
            spec[b] += std::sqrt(re * re + im * im);
        }
        spec[b] /= double(e.channels);
    }
    return spec;
}

double vec_pcc(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= double(a.size());
    mb /= double(a.size());
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST_CASE("glyph class ids round-trip and reject junk") {
    CHECK(glyph_class('A') == 0);
    CHECK(glyph_class('Z') == 25);
    CHECK(glyph_class('a') == 26);
    CHECK(glyph_class('0') == 52);
    CHECK(glyph_class('9') == 61);
    for (std::size_t c = 0; c < kGlyphClasses; ++c) CHECK(glyph_class(glyph_char(c)) == c);
    CHECK_THROWS_AS(glyph_class('!'), ParamError);
    CHECK_THROWS_AS(glyph_char(62), ParamError);
    CHECK_THROWS_AS(render_glyph({'A', -1, {}}), ParamError);
    CHECK_THROWS_AS(render_glyph({'A', 50, {}}), ParamError);
    CHECK_THROWS_AS(render_glyph({'?', 0, {}}), ParamError);
}

TEST_CASE("glyph rendering is deterministic and variant-sensitive") {
    auto a1 = render_glyph({'A', 0, {}});
    auto a2 = render_glyph({'A', 0, {}});
    REQUIRE(a1.h == 28);
    REQUIRE(a1.w == 28);
    CHECK(std::memcmp(a1.pix.data(), a2.pix.data(), a1.size() * sizeof(double)) == 0);

    auto a3 = render_glyph({'A', 1, {}});
    CHECK(std::memcmp(a1.pix.data(), a3.pix.data(), a1.size() * sizeof(double)) != 0);

    GlyphJitter j;
    j.dx = 0.05;
    auto a4 = render_glyph({'A', 0, j});
    CHECK(std::memcmp(a1.pix.data(), a4.pix.data(), a1.size() * sizeof(double)) != 0);

    for (double p : a1.pix) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("full glyph corpus: pairwise distinct, sane ink coverage") {
    std::vector<Image> corpus;
    std::vector<std::uint64_t> hashes;
    corpus.reserve(kGlyphClasses * kGlyphVariants);
    for (std::size_t c = 0; c < kGlyphClasses; ++c)
        for (std::size_t v = 0; v < kGlyphVariants; ++v) {
            auto im = render_glyph({glyph_char(c), int(v), {}});
            double ink = ink_fraction(im);
            CHECK(ink >= 0.05);
            CHECK(ink <= 0.60);
            corpus.push_back(std::move(im));
            hashes.push_back(image_hash(corpus.back()));
        }

    std::size_t dup = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        for (std::size_t j = i + 1; j < corpus.size(); ++j)
            if (hashes[i] == hashes[j] &&
                std::memcmp(corpus[i].pix.data(), corpus[j].pix.data(),
                            corpus[i].size() * sizeof(double)) == 0)
                ++dup;
    CHECK(dup == 0);
}

TEST_CASE("class templates: frequency range and pairwise spectral separation") {
    std::vector<std::vector<double>> binned;
    for (std::size_t c = 0; c < kGlyphClasses; ++c) {
        const auto& t = class_template(c);
        REQUIRE(t.freqs_hz.size() == kTemplateComponents);
        std::vector<double> v(kTemplateFreqBins, 0.0);
        for (std::size_t k = 0; k < kTemplateComponents; ++k) {
            CHECK(t.freqs_hz[k] >= 1.0);
            CHECK(t.freqs_hz[k] <= 40.0);
            double mean_amp = 0;
            for (std::size_t ch = 0; ch < t.amps.size(); ++ch) {
                CHECK(t.amps[ch][k] >= 0.3);
                CHECK(t.amps[ch][k] <= 1.0);
                mean_amp += t.amps[ch][k];
            }
            auto bin = std::size_t(std::lround((t.freqs_hz[k] - kTemplateFreqLo) / kTemplateFreqStep));
            v[bin] += mean_amp / double(t.amps.size());
        }
        binned.push_back(std::move(v));
    }
    CHECK_THROWS_AS(class_template(62), ParamError);

    double worst = -1;
    for (std::size_t a = 0; a < binned.size(); ++a)
        for (std::size_t b = a + 1; b < binned.size(); ++b)
            worst = std::max(worst, vec_pcc(binned[a], binned[b]));
    CHECK(worst <= 0.5);
}

TEST_CASE("synthetic trials are bit-deterministic per (class, seed, trial)") {
    SignalSynthSpec spec;
    spec.seed = 7;
    auto a = synth_signal(3, 11, spec);
    auto b = synth_signal(3, 11, spec);
    REQUIRE(a.data.size() == 32 * 235);
    CHECK(a.channels == 32);
    CHECK(a.steps == 235);
    CHECK(a.label == 3);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);

    auto c = synth_signal(3, 12, spec);
    CHECK(std::memcmp(a.data.data(), c.data.data(), a.data.size() * sizeof(double)) != 0);
    spec.seed = 8;
    auto d = synth_signal(3, 11, spec);
    CHECK(std::memcmp(a.data.data(), d.data.data(), a.data.size() * sizeof(double)) != 0);
}

TEST_CASE("noise-free trials of one class share their spectrum") {
    SignalSynthSpec spec;
    spec.noise_sigma = 0.0;
    auto s1 = mean_spectrum(synth_signal(40, 0, spec));
    auto s2 = mean_spectrum(synth_signal(40, 1, spec));
    CHECK(vec_pcc(s1, s2) >= 0.99);
}

TEST_CASE("combination registry matches the published table") {
    auto c = combination("0-1");
    CHECK(c.classes == std::vector<std::size_t>{52, 53});
    CHECK(c.train_per_class == 200);
    CHECK(c.val_per_class == 25);
    CHECK(c.test_per_class == 25);

    auto b = combination("B-R-A-I-N-S");
    CHECK(b.classes.size() == 6);
    CHECK(b.classes[0] == glyph_class('B'));
    CHECK(b.classes[5] == glyph_class('S'));
    CHECK(b.train_per_class == 40);

    CHECK(combination_names().size() == 44);
    CHECK_THROWS_WITH_AS(combination("x-y"), doctest::Contains("valid names"), ParamError);
}

TEST_CASE("raw splits: counts, onsets, labels, and pairing") {
    SignalSynthSpec spec;
    auto combo = combination("B-R-A-I-N-S");
    auto tr = build_raw_split(combo, spec, SplitPart::train);
    CHECK(tr.recording.event_onsets.size() == 240);
    auto va = build_raw_split(combo, spec, SplitPart::val);
    CHECK(va.recording.event_onsets.size() == 30);
    auto te = build_raw_split(combo, spec, SplitPart::test);
    CHECK(te.recording.event_onsets.size() == 30);

    CHECK(tr.recording.channel_count == 32);
    CHECK(tr.recording.sample_rate_hz == 128.0);
    CHECK(tr.recording.length() == 240 * 363);
    for (std::size_t i = 0; i < tr.recording.event_onsets.size(); ++i)
        CHECK(tr.recording.event_onsets[i] == 128 + i * 363);

    // interleaved classes; images pair with labels
    CHECK(tr.labels[0] == int(glyph_class('B')));
    CHECK(tr.labels[1] == int(glyph_class('R')));
    CHECK(tr.labels[6] == int(glyph_class('B')));
    REQUIRE(tr.images.size() == 240);
    auto want = render_glyph({'R', 0, {}});
    CHECK(std::memcmp(tr.images[1].pix.data(), want.pix.data(),
                      want.size() * sizeof(double)) == 0);

    // event signal content equals the standalone trial slice
    auto trial = synth_signal(glyph_class('B'), 0, spec);
    std::size_t onset = tr.recording.event_onsets[0];
    for (std::size_t ch = 0; ch < 4; ++ch)
        for (std::size_t t = 0; t < 235; ++t)
            CHECK(tr.recording.channel(ch)[onset + t] == trial.data[ch * 235 + t]);

    // val/test trials are fresh, not reused train trials
    auto val_trial = synth_signal(glyph_class('B'), 40, spec);
    std::size_t vonset = va.recording.event_onsets[0];
    for (std::size_t t = 0; t < 8; ++t)
        CHECK(va.recording.channel(0)[vonset + t] == val_trial.data[t]);
}

TEST_CASE("raw splits are reproducible byte-for-byte") {
    SignalSynthSpec spec;
    spec.seed = 123;
    auto combo = combination("0-1");
    // small custom counts keep this fast; the registry path is covered above
    combo.train_per_class = 3;
    auto a = build_raw_split(combo, spec, SplitPart::train);
    auto b = build_raw_split(combo, spec, SplitPart::train);
    CHECK(std::memcmp(a.recording.samples.data(), b.recording.samples.data(),
                      a.recording.samples.size() * sizeof(double)) == 0);
    REQUIRE(a.images.size() == b.images.size());
    for (std::size_t i = 0; i < a.images.size(); ++i)
        CHECK(std::memcmp(a.images[i].pix.data(), b.images[i].pix.data(),
                          a.images[i].size() * sizeof(double)) == 0);
}

TEST_CASE("preprocessing chain on a raw split: offsets removed, 32x135 epochs") {
    SignalSynthSpec spec;
    auto combo = combination("0-1");
    combo.train_per_class = 4;
    auto raw = build_raw_split(combo, spec, SplitPart::train);

    auto corrected = baseline_correct(raw.recording, 1000.0);
    std::size_t b = 128;
    for (std::size_t ev = 0; ev < corrected.event_onsets.size(); ++ev) {
        std::size_t onset = corrected.event_onsets[ev];
        for (std::size_t ch = 0; ch < corrected.channel_count; ++ch) {
            double m = 0;
            for (std::size_t t = onset - b; t < onset; ++t) m += corrected.channel(ch)[t];
            CHECK(std::abs(m / double(b)) <= 1e-9);
        }
    }

    auto filt = apply_filter(design_fir_bandpass(1.0, 63.9, 128.0, 129), corrected);
    auto epochs = epoch_trials(filt, 235, 100);
    REQUIRE(epochs.size() == 8);
    for (const auto& e : epochs) {
        CHECK(e.channels == 32);
        CHECK(e.steps == 135);
    }
}

TEST_CASE("raw-signal knn beats chance at default noise") {
    SignalSynthSpec spec;
    std::vector<std::vector<double>> train;
    std::vector<int> labels;
    std::size_t c0 = glyph_class('0'), c1 = glyph_class('1');
    for (std::size_t t = 0; t < 50; ++t) {
        for (std::size_t cls : {c0, c1}) {
            auto e = synth_signal(cls, t, spec);
            train.push_back(std::move(e.data));
            labels.push_back(int(cls));
        }
    }
    std::size_t hits = 0, total = 0;
    for (std::size_t t = 50; t < 70; ++t) {
        for (std::size_t cls : {c0, c1}) {
            auto e = synth_signal(cls, t, spec);
            hits += knn_classify(train, labels, e.data, 5) == int(cls);
            ++total;
        }
    }
    CHECK(double(hits) / double(total) > 0.55);
}
