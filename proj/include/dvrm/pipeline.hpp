#pragma once

#include <string>

#include "dvrm/model.hpp"
#include "dvrm/synth_data.hpp"
#include "dvrm/trainer.hpp"

namespace dvrm {

/// gen-data: synthesize a combination's three splits. By default the raw
/// recordings are preprocessed in place (filter + baseline + epoch) and
/// written as model-ready epoch containers; --raw keeps the recordings.
struct GenDataOptions {
    std::string combo = "0-1";
    std::string out_dir = ".";
    std::uint64_t seed = 42;
    double noise_sigma = 17.0;
    bool raw = false;
};

struct PreprocessOptions {
    std::string in_dir;
    std::string out_dir;
    double low_hz = 1.0, high_hz = 63.9;
    std::size_t taps = 129;
    double baseline_ms = 1000.0;
    std::size_t trial_len = 235, discard = 100;
};

struct TrainOptions {
    std::string data_dir;
    std::string out_dir = ".";
    ModelConfig model;
    TrainConfig train;
};

struct ReconstructOptions {
    std::string checkpoint;
    std::string data_dir;
    std::string out_dir = ".";
    std::string split = "test";
    std::size_t batch = 20;
    bool write_targets = true;   // targets/ beside the reconstructions
    bool write_latents = false;  // posterior means container
};

struct EvaluateOptions {
    std::string targets_dir;
    std::string recons_dir;
    std::string out_dir = ".";
    std::string group;           // override; default comes from pairs.csv or "all"
};

struct GradCheckOptions {
    std::size_t rdb_count = 1;
    std::size_t base_channels = 8;
    std::size_t growth_channels = 6;
    std::size_t latent_dim = 4;
    std::uint64_t seed = 10;
    double eps = 1e-5;
    double tolerance = 1e-4;
    std::size_t coords_per_param = 4;
};

void run_gen_data(const GenDataOptions& opt);
void run_preprocess(const PreprocessOptions& opt);
void run_train(const TrainOptions& opt);
void run_reconstruct(const ReconstructOptions& opt);
void run_evaluate(const EvaluateOptions& opt);

/// Returns the worst relative error over all parameters; prints one line per
/// parameter. Callers treat worst > tolerance as failure.
double run_grad_check(const GradCheckOptions& opt);

// shared container plumbing
struct EpochSet {
    std::vector<SignalEpoch> epochs;
    std::vector<Image> images;
    std::vector<int> labels;
    std::map<std::string, std::string> meta;
};

Container raw_split_to_container(const RawSplit& split, const CombinationSpec& combo,
                                 const SignalSynthSpec& spec, const char* part);
Container epochs_to_container(const EpochSet& set);
EpochSet container_to_epochs(const Container& c);
EpochSet preprocess_raw(const Container& raw, const PreprocessOptions& opt);

} // namespace dvrm
