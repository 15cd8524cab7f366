#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "dvrm/pipeline.hpp"

using namespace dvrm;

namespace {

// DVRM_SEED is the fallback when neither --seed nor a config file sets one.
std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("DVRM_SEED");
    if (!s) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || end == s || *end != '\0')
        throw ParamError("DVRM_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    return v;
}

// Run-config keys; the CLI flag for each is the same name with dashes.
struct ConfigKey {
    const char* name;
    std::function<void(TrainOptions&, const nlohmann::json&)> set;
};

const std::vector<ConfigKey>& config_keys() {
    using J = const nlohmann::json;
    static const std::vector<ConfigKey> keys = {
        {"epochs", [](TrainOptions& o, J& v) { o.train.epochs = v.get<std::size_t>(); }},
        {"iterations_per_epoch",
         [](TrainOptions& o, J& v) { o.train.iterations_per_epoch = v.get<std::size_t>(); }},
        {"batch_size", [](TrainOptions& o, J& v) { o.train.batch_size = v.get<std::size_t>(); }},
        {"seed", [](TrainOptions& o, J& v) { o.train.seed = v.get<std::uint64_t>(); }},
        {"patience", [](TrainOptions& o, J& v) { o.train.patience = v.get<std::size_t>(); }},
        {"image_dropout", [](TrainOptions& o, J& v) { o.train.image_dropout = v.get<double>(); }},
        {"lr", [](TrainOptions& o, J& v) { o.train.adam.lr = v.get<double>(); }},
        {"beta1", [](TrainOptions& o, J& v) { o.train.adam.beta1 = v.get<double>(); }},
        {"beta2", [](TrainOptions& o, J& v) { o.train.adam.beta2 = v.get<double>(); }},
        {"adam_eps", [](TrainOptions& o, J& v) { o.train.adam.eps = v.get<double>(); }},
        {"rdb_count", [](TrainOptions& o, J& v) { o.model.rdb_count = v.get<std::size_t>(); }},
        {"conv_layers_per_rdb",
         [](TrainOptions& o, J& v) { o.model.conv_layers_per_rdb = v.get<std::size_t>(); }},
        {"growth_channels",
         [](TrainOptions& o, J& v) { o.model.growth_channels = v.get<std::size_t>(); }},
        {"base_channels",
         [](TrainOptions& o, J& v) { o.model.base_channels = v.get<std::size_t>(); }},
        {"residual_scale",
         [](TrainOptions& o, J& v) { o.model.residual_scale = v.get<double>(); }},
        {"latent_dim", [](TrainOptions& o, J& v) { o.model.latent_dim = v.get<std::size_t>(); }},
        {"dr_blocks", [](TrainOptions& o, J& v) { o.model.dr_blocks = v.get<std::size_t>(); }},
        {"leak", [](TrainOptions& o, J& v) { o.model.leak = v.get<double>(); }},
        {"fixed_variance",
         [](TrainOptions& o, J& v) { o.model.fixed_variance = v.get<bool>(); }},
        {"kl_weight", [](TrainOptions& o, J& v) { o.model.kl_weight = v.get<double>(); }},
        {"logvar_lo", [](TrainOptions& o, J& v) { o.model.logvar_lo = v.get<double>(); }},
        {"logvar_hi", [](TrainOptions& o, J& v) { o.model.logvar_hi = v.get<double>(); }},
        {"latent_logvar_bound",
         [](TrainOptions& o, J& v) { o.model.latent_logvar_bound = v.get<double>(); }},
    };
    return keys;
}

// Precedence: CLI flag > config file > default. Flags already parsed into o,
// so a config key only lands where its flag was absent. Unknown keys are
// rejected outright.
void load_config_file(TrainOptions& o, const std::string& path, const CLI::App& cmd,
                      bool& has_seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParamError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParamError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParamError("config file '" + path + "' must hold a JSON object");
    for (const auto& [key, val] : j.items()) {
        const ConfigKey* hit = nullptr;
        for (const auto& ck : config_keys())
            if (key == ck.name) hit = &ck;
        if (!hit) throw ParamError("unknown config key '" + key + "'");
        if (key == "seed") has_seed = true;
        std::string flag = "--" + key;
        for (auto& ch : flag)
            if (ch == '_') ch = '-';
        if (cmd.count(flag)) continue;
        try {
            hit->set(o, val);
        } catch (const nlohmann::json::exception&) {
            throw ParamError("config key '" + key + "' has the wrong type");
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dvrm: signal-to-image reconstruction pipeline"};
    app.require_subcommand(1);

    GenDataOptions gd;
    auto* c_gd = app.add_subcommand("gen-data", "Synthesize a stimulus combination's datasets");
    c_gd->add_option("--combo", gd.combo, "Combination name, e.g. 0-1")->capture_default_str();
    c_gd->add_option("--out", gd.out_dir, "Output directory")->capture_default_str();
    c_gd->add_option("--seed", gd.seed, "Master seed")->capture_default_str();
    c_gd->add_option("--noise-sigma", gd.noise_sigma, "Per-sample recording noise")
        ->capture_default_str();
    c_gd->add_flag("--raw", gd.raw, "Emit raw recordings instead of preprocessed epochs");

    PreprocessOptions pp;
    auto* c_pp = app.add_subcommand("preprocess", "Filter, baseline-correct and epoch raw splits");
    c_pp->add_option("--in", pp.in_dir, "Directory holding raw_{train,val,test}.dvrm")->required();
    c_pp->add_option("--out", pp.out_dir, "Output directory")->required();
    c_pp->add_option("--low-hz", pp.low_hz, "Bandpass low edge")->capture_default_str();
    c_pp->add_option("--high-hz", pp.high_hz, "Bandpass high edge")->capture_default_str();
    c_pp->add_option("--taps", pp.taps, "FIR tap count")->capture_default_str();
    c_pp->add_option("--baseline-ms", pp.baseline_ms, "Baseline window length")
        ->capture_default_str();
    c_pp->add_option("--trial-len", pp.trial_len, "Samples per trial from onset")
        ->capture_default_str();
    c_pp->add_option("--discard", pp.discard, "Leading samples dropped per trial")
        ->capture_default_str();

    TrainOptions tr;
    std::string config_path;
    auto* c_tr = app.add_subcommand("train", "Train the model on preprocessed epochs");
    c_tr->add_option("--data", tr.data_dir, "Directory holding prep_{train,val}.dvrm")->required();
    c_tr->add_option("--out", tr.out_dir, "Output directory for checkpoint and curves")
        ->capture_default_str();
    c_tr->add_option("--config", config_path, "JSON config file; CLI flags override it");
    c_tr->add_option("--epochs", tr.train.epochs, "Training epochs")->capture_default_str();
    c_tr->add_option("--iterations-per-epoch", tr.train.iterations_per_epoch,
                     "Optimizer steps per epoch")
        ->capture_default_str();
    c_tr->add_option("--batch-size", tr.train.batch_size, "Samples per step")
        ->capture_default_str();
    c_tr->add_option("--seed", tr.train.seed, "Master seed")->capture_default_str();
    c_tr->add_option("--patience", tr.train.patience, "Early-stop patience; 0 disables")
        ->capture_default_str();
    c_tr->add_option("--image-dropout", tr.train.image_dropout,
                     "Chance a sample's image input is zeroed")
        ->capture_default_str();
    c_tr->add_option("--lr", tr.train.adam.lr, "Adam learning rate")->capture_default_str();
    c_tr->add_option("--beta1", tr.train.adam.beta1, "Adam beta1")->capture_default_str();
    c_tr->add_option("--beta2", tr.train.adam.beta2, "Adam beta2")->capture_default_str();
    c_tr->add_option("--adam-eps", tr.train.adam.eps, "Adam epsilon")->capture_default_str();
    c_tr->add_option("--rdb-count", tr.model.rdb_count, "Residual dense blocks in the encoder")
        ->capture_default_str();
    c_tr->add_option("--conv-layers-per-rdb", tr.model.conv_layers_per_rdb,
                     "Dense convs per block")
        ->capture_default_str();
    c_tr->add_option("--growth-channels", tr.model.growth_channels,
                     "Channels added per dense conv")
        ->capture_default_str();
    c_tr->add_option("--base-channels", tr.model.base_channels, "Encoder trunk channels")
        ->capture_default_str();
    c_tr->add_option("--residual-scale", tr.model.residual_scale, "Residual branch scale")
        ->capture_default_str();
    c_tr->add_option("--latent-dim", tr.model.latent_dim, "Latent dimensionality")
        ->capture_default_str();
    c_tr->add_option("--dr-blocks", tr.model.dr_blocks, "Decoder deconv blocks")
        ->capture_default_str();
    c_tr->add_option("--leak", tr.model.leak, "Leaky ReLU slope")->capture_default_str();
    c_tr->add_flag("--fixed-variance", tr.model.fixed_variance,
                   "Freeze the pixel log-variance at 0");
    c_tr->add_option("--kl-weight", tr.model.kl_weight, "KL term weight")->capture_default_str();
    c_tr->add_option("--logvar-lo", tr.model.logvar_lo, "Pixel log-variance clamp floor")
        ->capture_default_str();
    c_tr->add_option("--logvar-hi", tr.model.logvar_hi, "Pixel log-variance clamp ceiling")
        ->capture_default_str();
    c_tr->add_option("--latent-logvar-bound", tr.model.latent_logvar_bound,
                     "Posterior log-variance soft bound")
        ->capture_default_str();

    ReconstructOptions rc;
    bool no_targets = false;
    auto* c_rc = app.add_subcommand("reconstruct", "Decode images from a split's signals");
    c_rc->add_option("--checkpoint", rc.checkpoint, "Model checkpoint file")->required();
    c_rc->add_option("--data", rc.data_dir, "Directory holding prep_<split>.dvrm")->required();
    c_rc->add_option("--out", rc.out_dir, "Output directory")->capture_default_str();
    c_rc->add_option("--split", rc.split, "Which split to reconstruct")->capture_default_str();
    c_rc->add_option("--batch", rc.batch, "Signals per forward pass")->capture_default_str();
    c_rc->add_flag("--no-targets", no_targets, "Skip writing the paired target images");
    c_rc->add_flag("--latents", rc.write_latents, "Also write posterior means as a container");

    EvaluateOptions ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score reconstructions against targets");
    c_ev->add_option("--targets", ev.targets_dir, "Directory of target .pgm images")->required();
    c_ev->add_option("--recons", ev.recons_dir, "Directory of reconstructed .pgm images")
        ->required();
    c_ev->add_option("--out", ev.out_dir, "Output directory for report.csv/report.txt")
        ->capture_default_str();
    c_ev->add_option("--group", ev.group, "Group label override (default: pairs.csv or 'all')");

    GradCheckOptions gc;
    auto* c_gc = app.add_subcommand("grad-check",
                                    "Verify analytic gradients against finite differences");
    c_gc->add_option("--rdb-count", gc.rdb_count, "Encoder blocks")->capture_default_str();
    c_gc->add_option("--base-channels", gc.base_channels, "Trunk channels")->capture_default_str();
    c_gc->add_option("--growth-channels", gc.growth_channels, "Dense growth")
        ->capture_default_str();
    c_gc->add_option("--latent-dim", gc.latent_dim, "Latent dimensionality")
        ->capture_default_str();
    c_gc->add_option("--seed", gc.seed, "Fixture seed")->capture_default_str();
    c_gc->add_option("--eps", gc.eps, "Central-difference step")->capture_default_str();
    c_gc->add_option("--tolerance", gc.tolerance, "Max allowed relative error")
        ->capture_default_str();
    c_gc->add_option("--coords", gc.coords_per_param, "Coordinates sampled per parameter")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_gd->parsed()) {
            if (!c_gd->count("--seed"))
                if (auto s = env_seed()) gd.seed = *s;
            run_gen_data(gd);
        } else if (c_pp->parsed()) {
            run_preprocess(pp);
        } else if (c_tr->parsed()) {
            bool config_has_seed = false;
            if (!config_path.empty()) load_config_file(tr, config_path, *c_tr, config_has_seed);
            if (!c_tr->count("--seed") && !config_has_seed)
                if (auto s = env_seed()) tr.train.seed = *s;
            tr.train.validate();
            tr.model.validate();
            run_train(tr);
        } else if (c_rc->parsed()) {
            rc.write_targets = !no_targets;
            run_reconstruct(rc);
        } else if (c_ev->parsed()) {
            run_evaluate(ev);
        } else if (c_gc->parsed()) {
            if (!c_gc->count("--seed"))
                if (auto s = env_seed()) gc.seed = *s;
            double worst = run_grad_check(gc);
            if (!(worst <= gc.tolerance)) {
                std::fprintf(stderr, "gradient check FAILED: %.3e > %.1e\n", worst, gc.tolerance);
                return 3;
            }
            std::printf("gradient check passed\n");
        }
    } catch (const ParamError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DvrmError& e) { // DataError, ShapeError
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
