#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvrm/glyphs.hpp"
#include "dvrm/image.hpp"
#include "dvrm/signal_prep.hpp"

namespace dvrm {

struct SignalSynthSpec {
    std::size_t channels = 32;
    std::size_t trial_len = 235;
    std::size_t baseline_len = 128; // pre-onset samples carried with each trial
    double sample_rate_hz = 128.0;
    double noise_sigma = 17.0;
    std::uint64_t seed = 42;
};

// fixed per-class spectral signature: 6 sinusoid components, frequencies on a
// 0.5 Hz grid chosen so any two classes share at most one component
struct ClassTemplate {
    std::vector<double> freqs_hz;            // [kTemplateComponents]
    std::vector<std::vector<double>> amps;   // [channels][components]
    std::vector<std::vector<double>> phases; // [channels][components]
};

inline constexpr std::size_t kTemplateComponents = 6;
inline constexpr double kTemplateFreqLo = 1.5, kTemplateFreqStep = 0.5;
inline constexpr std::size_t kTemplateFreqBins = 78; // 1.5 .. 40.0 Hz

const ClassTemplate& class_template(std::size_t class_id);

// one trial plus its pre-onset context, row-major [channels][baseline+trial]
std::vector<double> synth_trial_segment(std::size_t class_id, std::size_t trial_index,
                                        const SignalSynthSpec& spec);

// the trial proper (columns [baseline, baseline+trial) of the segment)
SignalEpoch synth_signal(std::size_t class_id, std::size_t trial_index,
                         const SignalSynthSpec& spec);

struct CombinationSpec {
    std::string name;                  // e.g. "0-1", "B-R-A-I-N-S"
    std::vector<std::size_t> classes;  // glyph class ids
    std::size_t train_per_class = 0, val_per_class = 0, test_per_class = 0;

    std::size_t per_class_total() const {
        return train_per_class + val_per_class + test_per_class;
    }
};

const std::vector<std::string>& combination_names();
CombinationSpec combination(const std::string& name);

// a generated split: continuous recording with one event per trial, plus the
// paired stimulus image and class label for each event
struct RawSplit {
    RawRecording recording;
    std::vector<int> labels;
    std::vector<Image> images;
};

enum class SplitPart { train = 0, val = 1, test = 2 };

RawSplit build_raw_split(const CombinationSpec& combo, const SignalSynthSpec& spec,
                         SplitPart part);

} // namespace dvrm
