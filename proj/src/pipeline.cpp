#include "dvrm/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dvrm/gradcheck.hpp"
#include "dvrm/metrics.hpp"
#include "dvrm/pgm.hpp"

namespace fs = std::filesystem;

namespace dvrm {

namespace {

std::string part_name(SplitPart p) {
    switch (p) {
    case SplitPart::train: return "train";
    case SplitPart::val: return "val";
    default: return "test";
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

std::string meta_get(const Container& c, const std::string& key) {
    auto it = c.meta.find(key);
    if (it == c.meta.end()) throw DataError("container is missing meta key '" + key + "'");
    return it->second;
}

std::size_t meta_size(const Container& c, const std::string& key) {
    return std::stoul(meta_get(c, key));
}

void check_format(const Container& c, const std::string& want, const std::string& path) {
    if (!c.meta.count("format") || c.meta.at("format") != want)
        throw DataError("'" + path + "' is not a " + want + " container");
}

std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string pad4(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

void add_images(Container& c, const std::vector<Image>& images) {
    std::vector<double> px;
    px.reserve(images.size() * 784);
    for (const auto& im : images) px.insert(px.end(), im.pix.begin(), im.pix.end());
    c.add_f64("images", {images.size(), images.empty() ? 0 : images[0].h,
                         images.empty() ? 0 : images[0].w},
              std::move(px));
}

std::vector<Image> images_from(const Container& c) {
    const auto& a = c.get("images");
    if (a.shape.size() != 3) throw DataError("images array must be [n,h,w]");
    std::vector<Image> out;
    const std::size_t hw = a.shape[1] * a.shape[2];
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
        Image im(a.shape[1], a.shape[2]);
        std::copy(a.f64.begin() + i * hw, a.f64.begin() + (i + 1) * hw, im.pix.begin());
        out.push_back(std::move(im));
    }
    return out;
}

std::vector<int> labels_from(const Container& c, std::size_t want) {
    const auto& a = c.get("labels");
    if (a.numel() != want) throw DataError("labels array length mismatch");
    std::vector<int> out;
    for (double v : a.f64) out.push_back(int(v));
    return out;
}

} // namespace

Container raw_split_to_container(const RawSplit& split, const CombinationSpec& combo,
                                 const SignalSynthSpec& spec, const char* part) {
    Container c;
    c.meta["format"] = "dvrm-raw";
    c.meta["combo"] = combo.name;
    c.meta["part"] = part;
    c.meta["seed"] = std::to_string(spec.seed);
    c.meta["noise_sigma"] = fmt_g17(spec.noise_sigma);
    c.meta["channels"] = std::to_string(split.recording.channel_count);
    c.meta["sample_rate_hz"] = fmt_g17(split.recording.sample_rate_hz);
    c.meta["trial_len"] = std::to_string(spec.trial_len);
    c.meta["baseline_len"] = std::to_string(spec.baseline_len);

    c.add_f64("recording", {split.recording.channel_count, split.recording.length()},
              split.recording.samples);
    std::vector<double> onsets(split.recording.event_onsets.begin(),
                               split.recording.event_onsets.end());
    const std::size_t n_events = onsets.size();
    c.add_f64("onsets", {n_events}, std::move(onsets));
    std::vector<double> labels(split.labels.begin(), split.labels.end());
    const std::size_t n_labels = labels.size();
    c.add_f64("labels", {n_labels}, std::move(labels));
    add_images(c, split.images);
    return c;
}

EpochSet preprocess_raw(const Container& raw, const PreprocessOptions& opt) {
    RawRecording rec;
    const auto& samples = raw.get("recording");
    if (samples.shape.size() != 2) throw DataError("recording array must be [channels, samples]");
    rec.channel_count = samples.shape[0];
    rec.samples = samples.f64;
    rec.sample_rate_hz = std::stod(meta_get(raw, "sample_rate_hz"));
    for (double v : raw.get("onsets").f64) rec.event_onsets.push_back(std::size_t(v));

    RawRecording corrected = baseline_correct(rec, opt.baseline_ms);
    FirFilter fir = design_fir_bandpass(opt.low_hz, opt.high_hz, rec.sample_rate_hz, opt.taps);
    RawRecording filtered = apply_filter(fir, corrected);

    EpochSet set;
    set.epochs = epoch_trials(filtered, opt.trial_len, opt.discard);
    set.images = images_from(raw);
    set.labels = labels_from(raw, set.epochs.size());
    if (set.images.size() != set.epochs.size())
        throw DataError("raw container pairs " + std::to_string(set.images.size()) +
                        " images with " + std::to_string(set.epochs.size()) + " events");
    for (std::size_t i = 0; i < set.epochs.size(); ++i) {
        set.epochs[i].label = set.labels[i];
        set.epochs[i].trial_index = int(i);
    }

    set.meta["format"] = "dvrm-epochs";
    for (const char* k : {"combo", "part", "seed", "noise_sigma", "sample_rate_hz"})
        if (raw.meta.count(k)) set.meta[k] = raw.meta.at(k);
    set.meta["low_hz"] = fmt_g17(opt.low_hz);
    set.meta["high_hz"] = fmt_g17(opt.high_hz);
    set.meta["taps"] = std::to_string(opt.taps);
    set.meta["baseline_ms"] = fmt_g17(opt.baseline_ms);
    set.meta["trial_len"] = std::to_string(opt.trial_len);
    set.meta["discard"] = std::to_string(opt.discard);
    set.meta["channels"] = std::to_string(set.epochs.empty() ? 0 : set.epochs[0].channels);
    set.meta["steps"] = std::to_string(set.epochs.empty() ? 0 : set.epochs[0].steps);
    return set;
}

Container epochs_to_container(const EpochSet& set) {
    Container c;
    c.meta = set.meta;
    const std::size_t n = set.epochs.size();
    const std::size_t ch = n ? set.epochs[0].channels : 0;
    const std::size_t st = n ? set.epochs[0].steps : 0;
    std::vector<double> flat;
    flat.reserve(n * ch * st);
    for (const auto& e : set.epochs) flat.insert(flat.end(), e.data.begin(), e.data.end());
    c.add_f64("epochs", {n, ch, st}, std::move(flat));
    std::vector<double> labels(set.labels.begin(), set.labels.end());
    const std::size_t n_labels = labels.size();
    c.add_f64("labels", {n_labels}, std::move(labels));
    add_images(c, set.images);
    return c;
}

EpochSet container_to_epochs(const Container& c) {
    EpochSet set;
    set.meta = c.meta;
    const auto& a = c.get("epochs");
    if (a.shape.size() != 3) throw DataError("epochs array must be [n, channels, steps]");
    const std::size_t n = a.shape[0], ch = a.shape[1], st = a.shape[2];
    set.labels = labels_from(c, n);
    set.images = images_from(c);
    if (set.images.size() != n) throw DataError("epochs/images count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        SignalEpoch e;
        e.channels = ch;
        e.steps = st;
        e.label = set.labels[i];
        e.trial_index = int(i);
        e.data.assign(a.f64.begin() + i * ch * st, a.f64.begin() + (i + 1) * ch * st);
        set.epochs.push_back(std::move(e));
    }
    return set;
}

void run_gen_data(const GenDataOptions& opt) {
    CombinationSpec combo = combination(opt.combo);
    SignalSynthSpec spec;
    spec.seed = opt.seed;
    spec.noise_sigma = opt.noise_sigma;
    ensure_dir(opt.out_dir);

    nlohmann::json manifest;
    manifest["combo"] = combo.name;
    manifest["classes"] = combo.classes;
    manifest["seed"] = opt.seed;
    manifest["noise_sigma"] = opt.noise_sigma;
    manifest["raw"] = opt.raw;

    for (SplitPart part : {SplitPart::train, SplitPart::val, SplitPart::test}) {
        const std::string name = part_name(part);
        RawSplit split = build_raw_split(combo, spec, part);
        Container raw = raw_split_to_container(split, combo, spec, name.c_str());
        std::string file;
        if (opt.raw) {
            file = "raw_" + name + ".dvrm";
            write_container(opt.out_dir + "/" + file, raw);
        } else {
            file = "prep_" + name + ".dvrm";
            write_container(opt.out_dir + "/" + file,
                            epochs_to_container(preprocess_raw(raw, PreprocessOptions{})));
        }
        manifest["files"][name] = file;
        manifest["pairs"][name] = split.labels.size();
    }

    std::ofstream mf(opt.out_dir + "/manifest.json", std::ios::binary);
    if (!mf) throw DataError("cannot write manifest in '" + opt.out_dir + "'");
    mf << manifest.dump(2) << "\n";
}

void run_preprocess(const PreprocessOptions& opt) {
    ensure_dir(opt.out_dir);
    for (const char* part : {"train", "val", "test"}) {
        const std::string in = opt.in_dir + "/raw_" + part + ".dvrm";
        Container raw = read_container(in);
        check_format(raw, "dvrm-raw", in);
        write_container(opt.out_dir + "/prep_" + part + ".dvrm",
                        epochs_to_container(preprocess_raw(raw, opt)));
    }
}

void run_train(const TrainOptions& opt) {
    const std::string train_path = opt.data_dir + "/prep_train.dvrm";
    const std::string val_path = opt.data_dir + "/prep_val.dvrm";
    Container ct = read_container(train_path);
    check_format(ct, "dvrm-epochs", train_path);
    Container cv = read_container(val_path);
    check_format(cv, "dvrm-epochs", val_path);
    EpochSet train_set = container_to_epochs(ct);
    EpochSet val_set = container_to_epochs(cv);

    ModelConfig mc = opt.model;
    mc.signal_channels = meta_size(ct, "channels");
    mc.signal_steps = meta_size(ct, "steps");
    Model<float> model(mc);
    model.init_weights(opt.train.seed);

    ensure_dir(opt.out_dir);
    const std::string ckpt = opt.out_dir + "/checkpoint.dvrm";
    TrainResult res;
    try {
        res = train_model(model, train_set.epochs, train_set.images, val_set.epochs,
                          val_set.images, opt.train,
                          [](std::size_t epoch, double tr, double vl) {
                              std::fprintf(stderr, "epoch %zu  train %.4f  val %.4f\n", epoch, tr,
                                           vl);
                          });
    } catch (const NumericError&) {
        model.save(ckpt); // last good parameters, restored by the trainer
        throw;
    }
    model.save(ckpt);
    write_loss_csv(opt.out_dir + "/loss.csv", res.curve.train);
    write_val_csv(opt.out_dir + "/val_loss.csv", res.curve.val);
    std::fprintf(stderr, "best epoch %zu  val %.4f%s\n", res.best_epoch, res.best_val,
                 res.early_stopped ? "  (early stop)" : "");
}

void run_reconstruct(const ReconstructOptions& opt) {
    Model<float> model = Model<float>::load(opt.checkpoint);
    const std::string data_path = opt.data_dir + "/prep_" + opt.split + ".dvrm";
    Container c = read_container(data_path);
    check_format(c, "dvrm-epochs", data_path);
    EpochSet set = container_to_epochs(c);
    if (set.epochs.empty()) throw DataError("'" + data_path + "' holds no epochs");
    const std::string group = set.meta.count("combo") ? set.meta.at("combo") : "all";

    ensure_dir(opt.out_dir);
    if (opt.write_targets) ensure_dir(opt.out_dir + "/targets");

    std::vector<std::vector<double>> latents;
    std::FILE* pairs = std::fopen((opt.out_dir + "/pairs.csv").c_str(), "wb");
    if (!pairs) throw DataError("cannot write pairs.csv in '" + opt.out_dir + "'");
    std::fprintf(pairs, "pair_id,group\n");

    const std::size_t bs = opt.batch ? opt.batch : 20;
    for (std::size_t at = 0; at < set.epochs.size(); at += bs) {
        const std::size_t n = std::min(bs, set.epochs.size() - at);
        std::vector<SignalEpoch> batch(set.epochs.begin() + at, set.epochs.begin() + at + n);
        std::vector<Image> recon = model.reconstruct(batch);
        if (opt.write_latents) {
            auto means = model.posterior_means(batch);
            latents.insert(latents.end(), means.begin(), means.end());
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::string id = pad4(at + i);
            write_pgm(opt.out_dir + "/" + id + ".pgm", recon[i]);
            if (opt.write_targets)
                write_pgm(opt.out_dir + "/targets/" + id + ".pgm", set.images[at + i]);
            std::fprintf(pairs, "%s,%s\n", id.c_str(), group.c_str());
        }
    }
    if (std::fclose(pairs) != 0) throw DataError("write failed for pairs.csv");

    if (opt.write_latents) {
        Container lc;
        lc.meta["format"] = "dvrm-latents";
        lc.meta["combo"] = group;
        lc.meta["split"] = opt.split;
        const std::size_t d = latents.empty() ? 0 : latents[0].size();
        std::vector<double> flat;
        flat.reserve(latents.size() * d);
        for (const auto& v : latents) flat.insert(flat.end(), v.begin(), v.end());
        lc.add_f64("means", {latents.size(), d}, std::move(flat));
        std::vector<double> labels(set.labels.begin(), set.labels.end());
        const std::size_t n_labels = labels.size();
        lc.add_f64("labels", {n_labels}, std::move(labels));
        write_container(opt.out_dir + "/latents.dvrm", lc);
    }
}

void run_evaluate(const EvaluateOptions& opt) {
    std::vector<std::string> names;
    if (!fs::is_directory(opt.targets_dir))
        throw DataError("targets directory '" + opt.targets_dir + "' does not exist");
    for (const auto& entry : fs::directory_iterator(opt.targets_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no .pgm targets in '" + opt.targets_dir + "'");

    std::map<std::string, std::string> groups;
    const std::string pairs_path = opt.recons_dir + "/pairs.csv";
    if (opt.group.empty() && fs::exists(pairs_path)) {
        std::ifstream in(pairs_path);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            auto comma = line.find(',');
            if (comma != std::string::npos)
                groups[line.substr(0, comma)] = line.substr(comma + 1);
        }
    }

    std::vector<Image> targets, recons;
    targets.reserve(names.size());
    recons.reserve(names.size());
    std::vector<EvalPair> pairs;
    for (const auto& name : names) {
        const std::string rp = opt.recons_dir + "/" + name;
        if (!fs::exists(rp)) throw DataError("reconstruction missing for '" + name + "'");
        targets.push_back(read_pgm(opt.targets_dir + "/" + name));
        recons.push_back(read_pgm(rp));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        EvalPair p;
        p.pair_id = names[i].substr(0, names[i].size() - 4);
        if (!opt.group.empty())
            p.group = opt.group;
        else if (auto it = groups.find(p.pair_id); it != groups.end())
            p.group = it->second;
        else
            p.group = "all";
        p.target = &targets[i];
        p.recon = &recons[i];
        pairs.push_back(p);
    }

    EvalReport report = evaluate(pairs);
    ensure_dir(opt.out_dir);
    const std::string table = eval_report_table(report);
    std::ofstream csv(opt.out_dir + "/report.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write report.csv in '" + opt.out_dir + "'");
    csv << eval_report_csv(report);
    std::ofstream txt(opt.out_dir + "/report.txt", std::ios::binary);
    if (!txt) throw DataError("cannot write report.txt in '" + opt.out_dir + "'");
    txt << table;
    std::fputs(table.c_str(), stdout);
}

double run_grad_check(const GradCheckOptions& opt) {
    ModelConfig cfg;
    cfg.rdb_count = opt.rdb_count;
    cfg.base_channels = opt.base_channels;
    cfg.growth_channels = opt.growth_channels;
    cfg.latent_dim = opt.latent_dim;
    Model<double> m(cfg);
    m.init_weights(opt.seed);
    Rng rng(opt.seed + 1000);
    Tensor<double> imgs({2, 1, cfg.image_side, cfg.image_side});
    Tensor<double> sigs({2, cfg.signal_dim()});
    Tensor<double> noise({2, cfg.latent_dim});
    for (std::size_t i = 0; i < imgs.numel(); ++i) imgs[i] = rng.uniform(0, 1);
    for (std::size_t i = 0; i < sigs.numel(); ++i) sigs[i] = rng.uniform(-0.5, 0.5);
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
        auto res = finite_diff_check<double>(run, *p, opt.eps, opt.coords_per_param);
        std::printf("%-22s rel err %.3e\n", p->name.c_str(), res.max_rel_err);
        if (res.max_rel_err > worst) {
            worst = res.max_rel_err;
            worst_name = p->name;
        }
    }
    std::printf("worst %-15s rel err %.3e  (tolerance %.1e)\n", worst_name.c_str(), worst,
                opt.tolerance);
    return worst;
}

} // namespace dvrm
