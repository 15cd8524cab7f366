#pragma once

#include <cstdint>
#include <vector>

#include "dvrm/common.hpp"

namespace dvrm {

/// Continuous multichannel recording. samples is row-major channels x time.
struct RawRecording {
    std::vector<double> samples;
    std::size_t channel_count = 0;
    double sample_rate_hz = 0.0;
    std::vector<std::size_t> event_onsets;

    std::size_t length() const {
        return channel_count ? samples.size() / channel_count : 0;
    }
    double* channel(std::size_t c) { return samples.data() + c * length(); }
    const double* channel(std::size_t c) const { return samples.data() + c * length(); }
};

/// Linear-phase (Type-I) FIR bandpass.
struct FirFilter {
    std::vector<double> taps;
    double low_hz = 0.0, high_hz = 0.0, sample_rate_hz = 0.0;
};

/// One model-ready trial: channels x time, baseline-corrected and filtered.
struct SignalEpoch {
    std::vector<double> data;
    std::size_t channels = 0, steps = 0;
    int label = -1;
    int subject_id = 0;
    int trial_index = 0;
};

/// Windowed-sinc bandpass: difference of two sinc low-passes under a Hamming
/// window, with an exact DC null and unit gain at the passband center
/// (low+high)/2.
FirFilter design_fir_bandpass(double low_hz, double high_hz, double sample_rate_hz,
                              std::size_t num_taps);

/// Magnitude response |H(f)| of the taps at frequency f.
double fir_gain(const FirFilter& f, double freq_hz);

/// Same-length filtering with group-delay compensation; edges are zero-padded.
RawRecording apply_filter(const FirFilter& f, const RawRecording& rec);

/// Subtracts, per channel and per event, the mean of the baseline window
/// ending at the event onset. The correction applies from the start of the
/// event's baseline window up to the start of the next event's baseline
/// window (or the end of the recording), so the corrected baseline mean is 0.
RawRecording baseline_correct(const RawRecording& rec, double baseline_ms);

/// Cuts one epoch per onset: samples[onset+discard_prefix, onset+trial_len).
/// Labels and ids are left at defaults; callers attach them.
std::vector<SignalEpoch> epoch_trials(const RawRecording& rec, std::size_t trial_len,
                                      std::size_t discard_prefix);

} // namespace dvrm
