#include "dvrm/signal_prep.hpp"

#include <cmath>
#include <string>

namespace dvrm {

namespace {

double sinc(double x) {
    if (x == 0.0) return 1.0;
    double px = kPi * x;
    return std::sin(px) / px;
}

void check_recording(const RawRecording& rec) {
    if (rec.channel_count == 0 || rec.samples.empty())
        throw ParamError("recording has no samples");
    if (rec.samples.size() % rec.channel_count != 0)
        throw ShapeError("recording sample count is not a multiple of channel_count");
    for (std::size_t i = 1; i < rec.event_onsets.size(); ++i)
        if (rec.event_onsets[i] <= rec.event_onsets[i - 1])
            throw ParamError("event_onsets must be strictly increasing (event " +
                             std::to_string(i) + ")");
}

} // namespace

FirFilter design_fir_bandpass(double low_hz, double high_hz, double sample_rate_hz,
                              std::size_t num_taps) {
    if (!(low_hz > 0.0)) throw ParamError("design_fir_bandpass: low edge must be > 0");
    if (!(low_hz < high_hz))
        throw ParamError("design_fir_bandpass: low edge must be below high edge");
    if (high_hz > sample_rate_hz / 2.0)
        throw ParamError("design_fir_bandpass: high edge " + std::to_string(high_hz) +
                         " Hz exceeds Nyquist " + std::to_string(sample_rate_hz / 2.0) + " Hz");
    if (num_taps % 2 == 0 || num_taps < 3)
        throw ParamError("design_fir_bandpass: num_taps must be odd and >= 3");

    std::size_t n = num_taps;
    double m = double(n - 1);
    double c = m / 2.0;
    double fl = low_hz / sample_rate_hz, fh = high_hz / sample_rate_hz;

    std::vector<double> h(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
        double t = double(k) - c;
        h[k] = 2.0 * fh * sinc(2.0 * fh * t) - 2.0 * fl * sinc(2.0 * fl * t);
        w[k] = 0.54 - 0.46 * std::cos(2.0 * kPi * double(k) / m);
        h[k] *= w[k];
    }
    // exact DC null: subtract a window-shaped (symmetric, linear-phase
    // preserving) component carrying the residual DC gain
    double sh = 0, sw = 0;
    for (std::size_t k = 0; k < n; ++k) { sh += h[k]; sw += w[k]; }
    for (std::size_t k = 0; k < n; ++k) h[k] -= w[k] * (sh / sw);

    FirFilter f{std::move(h), low_hz, high_hz, sample_rate_hz};
    double center = (low_hz + high_hz) / 2.0;
    double g = fir_gain(f, center);
    if (g <= 0.0) throw NumericError("design_fir_bandpass: zero gain at band center");
    for (auto& v : f.taps) v /= g;
    return f;
}

double fir_gain(const FirFilter& f, double freq_hz) {
    double re = 0, im = 0;
    double wang = 2.0 * kPi * freq_hz / f.sample_rate_hz;
    for (std::size_t k = 0; k < f.taps.size(); ++k) {
        re += f.taps[k] * std::cos(wang * double(k));
        im -= f.taps[k] * std::sin(wang * double(k));
    }
    return std::sqrt(re * re + im * im);
}

RawRecording apply_filter(const FirFilter& f, const RawRecording& rec) {
    check_recording(rec);
    if (f.sample_rate_hz != rec.sample_rate_hz)
        throw ParamError("apply_filter: filter designed for " +
                         std::to_string(f.sample_rate_hz) + " Hz, recording is " +
                         std::to_string(rec.sample_rate_hz) + " Hz");
    RawRecording out = rec;
    std::size_t len = rec.length();
    std::ptrdiff_t n = f.taps.size();
    std::ptrdiff_t center = (n - 1) / 2;
    for (std::size_t ch = 0; ch < rec.channel_count; ++ch) {
        const double* x = rec.channel(ch);
        double* y = out.channel(ch);
        for (std::ptrdiff_t t = 0; t < (std::ptrdiff_t)len; ++t) {
            double acc = 0;
            for (std::ptrdiff_t k = 0; k < n; ++k) {
                std::ptrdiff_t src = t - k + center;
                if (src >= 0 && src < (std::ptrdiff_t)len) acc += f.taps[k] * x[src];
            }
            y[t] = acc;
        }
    }
    return out;
}

RawRecording baseline_correct(const RawRecording& rec, double baseline_ms) {
    check_recording(rec);
    std::size_t b = (std::size_t)std::llround(baseline_ms / 1000.0 * rec.sample_rate_hz);
    if (b == 0) throw ParamError("baseline_correct: baseline window is empty");
    RawRecording out = rec;
    std::size_t len = rec.length();
    for (std::size_t e = 0; e < rec.event_onsets.size(); ++e) {
        std::size_t onset = rec.event_onsets[e];
        if (onset < b)
            throw DataError("baseline_correct: event " + std::to_string(e) + " at sample " +
                            std::to_string(onset) + " has fewer than " + std::to_string(b) +
                            " preceding samples");
        if (onset > len)
            throw DataError("baseline_correct: event " + std::to_string(e) +
                            " lies past the end of the recording");
        std::size_t region_begin = onset - b;
        std::size_t region_end =
            (e + 1 < rec.event_onsets.size()) ? rec.event_onsets[e + 1] - b : len;
        for (std::size_t ch = 0; ch < rec.channel_count; ++ch) {
            const double* x = rec.channel(ch);
            double mean = 0;
            for (std::size_t t = onset - b; t < onset; ++t) mean += x[t];
            mean /= double(b);
            double* y = out.channel(ch);
            for (std::size_t t = region_begin; t < region_end; ++t) y[t] -= mean;
        }
    }
    return out;
}

std::vector<SignalEpoch> epoch_trials(const RawRecording& rec, std::size_t trial_len,
                                      std::size_t discard_prefix) {
    check_recording(rec);
    if (trial_len <= discard_prefix)
        throw ParamError("epoch_trials: trial_len must exceed discard_prefix");
    std::size_t len = rec.length();
    std::vector<SignalEpoch> epochs;
    epochs.reserve(rec.event_onsets.size());
    std::size_t keep = trial_len - discard_prefix;
    for (std::size_t e = 0; e < rec.event_onsets.size(); ++e) {
        std::size_t onset = rec.event_onsets[e];
        if (onset + trial_len > len)
            throw DataError("epoch_trials: event " + std::to_string(e) + " at sample " +
                            std::to_string(onset) + " extends past the recording end (" +
                            std::to_string(len) + " samples)");
        SignalEpoch ep;
        ep.channels = rec.channel_count;
        ep.steps = keep;
        ep.trial_index = (int)e;
        ep.data.resize(rec.channel_count * keep);
        for (std::size_t ch = 0; ch < rec.channel_count; ++ch) {
            const double* x = rec.channel(ch) + onset + discard_prefix;
            std::copy(x, x + keep, ep.data.data() + ch * keep);
        }
        epochs.push_back(std::move(ep));
    }
    return epochs;
}

} // namespace dvrm
