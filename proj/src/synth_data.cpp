#include "dvrm/synth_data.hpp"

#include <algorithm>
#include <cmath>

#include "dvrm/rng.hpp"

namespace dvrm {

namespace {

constexpr std::uint64_t kTemplateSeed = 0x7370656374ull; // template table is seed-independent
constexpr std::size_t kTemplateChannels = 32;

std::vector<std::size_t> pick_freq_bins(Rng& r) {
    std::vector<std::size_t> pool(kTemplateFreqBins);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    r.shuffle(pool);
    pool.resize(kTemplateComponents);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::size_t shared_bins(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::size_t n = 0;
    for (auto x : a)
        for (auto y : b)
            if (x == y) ++n;
    return n;
}

// all 62 templates built together so the <=1 shared frequency guarantee holds
const std::vector<ClassTemplate>& template_table() {
    static const std::vector<ClassTemplate> table = [] {
        std::vector<ClassTemplate> out;
        std::vector<std::vector<std::size_t>> bins;
        for (std::size_t cls = 0; cls < kGlyphClasses; ++cls) {
            for (std::size_t attempt = 0;; ++attempt) {
                if (attempt >= 100000)
                    throw NumericError("class template frequency packing failed");
                Rng r(derive_seed(kTemplateSeed, Stream::class_template, cls * 100000 + attempt));
                auto cand = pick_freq_bins(r);
                bool ok = true;
                for (const auto& prev : bins)
                    if (shared_bins(cand, prev) > 1) { ok = false; break; }
                if (!ok) continue;

                ClassTemplate t;
                for (auto b : cand) t.freqs_hz.push_back(kTemplateFreqLo + kTemplateFreqStep * double(b));
                t.amps.resize(kTemplateChannels);
                t.phases.resize(kTemplateChannels);
                for (std::size_t ch = 0; ch < kTemplateChannels; ++ch)
                    for (std::size_t k = 0; k < kTemplateComponents; ++k) {
                        t.amps[ch].push_back(r.uniform(0.3, 1.0));
                        t.phases[ch].push_back(r.uniform(0.0, 2.0 * kPi));
                    }
                bins.push_back(cand);
                out.push_back(std::move(t));
                break;
            }
        }
        return out;
    }();
    return table;
}

} // namespace

const ClassTemplate& class_template(std::size_t class_id) {
    if (class_id >= kGlyphClasses)
        throw ParamError("class id " + std::to_string(class_id) + " out of range [0,62)");
    return template_table()[class_id];
}

std::vector<double> synth_trial_segment(std::size_t class_id, std::size_t trial_index,
                                        const SignalSynthSpec& spec) {
    const auto& t = class_template(class_id);
    if (spec.channels > kTemplateChannels)
        throw ParamError("channels " + std::to_string(spec.channels) + " exceeds template limit " +
                         std::to_string(kTemplateChannels));

    const std::size_t seg_len = spec.baseline_len + spec.trial_len;
    const std::uint64_t salt = class_id * 0x10000ull + trial_index;

    Rng tr(derive_seed(spec.seed, Stream::signal_synth, salt));
    std::vector<double> jitter(kTemplateComponents);
    for (auto& j : jitter) j = tr.uniform(-0.5, 0.5); // trial-to-trial phase wobble

    Rng orng(derive_seed(spec.seed, Stream::channel_offset, salt));
    std::vector<double> offset(spec.channels);
    for (auto& o : offset) o = orng.uniform(-2.0, 2.0);

    std::vector<double> seg(spec.channels * seg_len);
    for (std::size_t ch = 0; ch < spec.channels; ++ch)
        for (std::size_t i = 0; i < seg_len; ++i) {
            // tau = 0 at the event onset; the baseline window runs tau < 0
            double tau = (double(i) - double(spec.baseline_len)) / spec.sample_rate_hz;
            double v = offset[ch];
            for (std::size_t k = 0; k < kTemplateComponents; ++k)
                v += t.amps[ch][k] *
                     std::sin(2.0 * kPi * t.freqs_hz[k] * tau + t.phases[ch][k] + jitter[k]);
            seg[ch * seg_len + i] = v;
        }
    if (spec.noise_sigma > 0)
        for (auto& v : seg) v += spec.noise_sigma * tr.normal();
    return seg;
}

SignalEpoch synth_signal(std::size_t class_id, std::size_t trial_index,
                         const SignalSynthSpec& spec) {
    auto seg = synth_trial_segment(class_id, trial_index, spec);
    const std::size_t seg_len = spec.baseline_len + spec.trial_len;
    SignalEpoch e;
    e.channels = spec.channels;
    e.steps = spec.trial_len;
    e.label = int(class_id);
    e.trial_index = int(trial_index);
    e.data.resize(spec.channels * spec.trial_len);
    for (std::size_t ch = 0; ch < spec.channels; ++ch)
        std::copy_n(seg.begin() + ch * seg_len + spec.baseline_len, spec.trial_len,
                    e.data.begin() + ch * spec.trial_len);
    return e;
}

namespace {

std::vector<std::string> make_combo_names() {
    return {
        // number and number
        "0-1", "2-8", "3-7", "4-5", "6-9",
        // lowercase and lowercase
        "a-z", "b-y", "c-x", "d-w", "e-v", "f-u", "g-t", "h-s", "i-q", "j-r", "k-p", "l-o", "m-n",
        // uppercase and uppercase
        "A-Z", "B-Y", "C-X", "D-W", "E-V", "F-U", "G-T", "H-S", "I-R", "J-Q", "K-P", "L-N", "M-O",
        // number and lowercase
        "0-h", "2-g", "e-4", "f-3",
        // number and uppercase
        "7-X", "S-8", "6-D", "K-2",
        // lowercase and uppercase
        "g-D", "p-Q", "R-W", "H-a",
        // six classes
        "B-R-A-I-N-S",
    };
}

} // namespace

const std::vector<std::string>& combination_names() {
    static const std::vector<std::string> names = make_combo_names();
    return names;
}

CombinationSpec combination(const std::string& name) {
    const auto& names = combination_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string msg = "unknown combination '" + name + "'; valid names:";
        for (const auto& n : names) msg += " " + n;
        throw ParamError(msg);
    }
    CombinationSpec spec;
    spec.name = name;
    for (std::size_t i = 0; i < name.size(); i += 2)
        spec.classes.push_back(glyph_class(name[i]));
    if (spec.classes.size() == 2) {
        spec.train_per_class = 200;
        spec.val_per_class = 25;
        spec.test_per_class = 25;
    } else { // B-R-A-I-N-S
        spec.train_per_class = 40;
        spec.val_per_class = 5;
        spec.test_per_class = 5;
    }
    return spec;
}

RawSplit build_raw_split(const CombinationSpec& combo, const SignalSynthSpec& spec,
                         SplitPart part) {
    if (combo.classes.empty()) throw ParamError("combination has no classes");

    // per-class trial indices are global across splits so trials never repeat
    std::size_t count_per_class = 0, first_trial = 0;
    switch (part) {
        case SplitPart::train: count_per_class = combo.train_per_class; first_trial = 0; break;
        case SplitPart::val:
            count_per_class = combo.val_per_class;
            first_trial = combo.train_per_class;
            break;
        case SplitPart::test:
            count_per_class = combo.test_per_class;
            first_trial = combo.train_per_class + combo.val_per_class;
            break;
    }

    const std::size_t n_events = combo.classes.size() * count_per_class;
    const std::size_t seg_len = spec.baseline_len + spec.trial_len;

    RawSplit out;
    out.recording.channel_count = spec.channels;
    out.recording.sample_rate_hz = spec.sample_rate_hz;
    out.recording.samples.assign(spec.channels * n_events * seg_len, 0.0);
    const std::size_t total_len = n_events * seg_len;

    // classes alternate event to event, mirroring an interleaved presentation
    for (std::size_t ev = 0; ev < n_events; ++ev) {
        std::size_t which = ev % combo.classes.size();
        std::size_t cls = combo.classes[which];
        std::size_t trial = first_trial + ev / combo.classes.size();

        auto seg = synth_trial_segment(cls, trial, spec);
        std::size_t seg_start = ev * seg_len;
        for (std::size_t ch = 0; ch < spec.channels; ++ch)
            std::copy_n(seg.begin() + ch * seg_len, seg_len,
                        out.recording.samples.begin() + ch * total_len + seg_start);

        out.recording.event_onsets.push_back(seg_start + spec.baseline_len);
        out.labels.push_back(int(cls));
        out.images.push_back(render_glyph(
            {glyph_char(cls), int(trial % kGlyphVariants), GlyphJitter{}}));
    }
    return out;
}

} // namespace dvrm
