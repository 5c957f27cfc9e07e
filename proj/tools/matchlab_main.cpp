#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "matchlab/config.hpp"
#include "matchlab/corruption.hpp"
#include "matchlab/eval.hpp"
#include "matchlab/image_io.hpp"
#include "matchlab/pair_engine.hpp"
#include "matchlab/parallel.hpp"
#include "matchlab/synthetic.hpp"
#include "matchlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace matchlab;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"", {"seed", "data_root", "output_root"}},
        {"synth",
         {"num_classes", "images_per_class", "image_size", "keypoints_per_class",
          "labeled_fraction", "warp_family", "rotation_max", "scale_lo", "scale_hi",
          "translation_max", "val_per_class", "test_per_class", "photo_jitter", "texture_octaves",
          "texture_blobs"}},
        {"matcher", {"proj_dim", "temperature", "stride", "init_noise"}},
        {"train",
         {"lambda", "tau", "learning_rate", "epochs_per_iteration", "num_iterations",
          "batch_labeled", "batch_unlabeled", "steps_per_epoch", "unlabeled_budget_per_class",
          "optimizer", "momentum", "cosine_decay", "labeled_fraction", "use_unlabeled",
          "use_augmentation_noise", "use_iterative", "regenerate_labels_each_epoch", "val_alpha"}},
        {"augment.weak",
         {"apply_probability", "brightness", "contrast", "saturation", "grayscale_probability",
          "family", "rotation", "scale_lo", "scale_hi", "translation", "tps_grid",
          "tps_displacement"}},
        {"augment.strong",
         {"apply_probability", "brightness", "contrast", "saturation", "grayscale_probability",
          "family", "rotation", "scale_lo", "scale_hi", "translation", "tps_grid",
          "tps_displacement"}},
        {"eval", {"alphas", "norm", "slice_alpha", "split"}},
        {"corrupt", {"seed"}},
    };
    return keys;
}

SynthSpec synth_spec_from(const Config& cfg) {
    SynthSpec spec;
    spec.num_classes = cfg.get_int("synth", "num_classes", spec.num_classes);
    spec.images_per_class = cfg.get_int("synth", "images_per_class", spec.images_per_class);
    spec.image_size = cfg.get_int("synth", "image_size", spec.image_size);
    spec.keypoints_per_class = cfg.get_int("synth", "keypoints_per_class", spec.keypoints_per_class);
    spec.labeled_fraction = cfg.get_double("synth", "labeled_fraction", spec.labeled_fraction);
    spec.warp_family = cfg.get("synth", "warp_family", spec.warp_family);
    spec.rotation_max = cfg.get_double("synth", "rotation_max", spec.rotation_max);
    spec.scale_lo = cfg.get_double("synth", "scale_lo", spec.scale_lo);
    spec.scale_hi = cfg.get_double("synth", "scale_hi", spec.scale_hi);
    spec.translation_max = cfg.get_double("synth", "translation_max", spec.translation_max);
    spec.val_per_class = cfg.get_int("synth", "val_per_class", spec.val_per_class);
    spec.test_per_class = cfg.get_int("synth", "test_per_class", spec.test_per_class);
    spec.photo_jitter = cfg.get_double("synth", "photo_jitter", spec.photo_jitter);
    spec.texture_octaves = cfg.get_int("synth", "texture_octaves", spec.texture_octaves);
    spec.texture_blobs = cfg.get_int("synth", "texture_blobs", spec.texture_blobs);
    spec.seed = cfg.get_u64("", "seed", spec.seed);
    return spec;
}

GeometricSpec geo_from(const Config& cfg, const std::string& section, GeometricSpec base) {
    std::string family = cfg.get(section, "family", "");
    if (!family.empty()) {
        if (family == "none") {
            base.family = GeoFamily::none;
        } else if (family == "affine") {
            base.family = GeoFamily::affine;
        } else if (family == "tps") {
            base.family = GeoFamily::tps;
        } else {
            throw ConfigError("unknown geometric family: " + family);
        }
    }
    base.rotation = cfg.get_double(section, "rotation", base.rotation);
    base.scale_lo = cfg.get_double(section, "scale_lo", base.scale_lo);
    base.scale_hi = cfg.get_double(section, "scale_hi", base.scale_hi);
    base.translation = cfg.get_double(section, "translation", base.translation);
    base.tps_grid = cfg.get_int(section, "tps_grid", base.tps_grid);
    base.tps_displacement = cfg.get_double(section, "tps_displacement", base.tps_displacement);
    return base;
}

PhotometricSpec photo_from(const Config& cfg, const std::string& section, PhotometricSpec base) {
    base.apply_probability = cfg.get_double(section, "apply_probability", base.apply_probability);
    base.brightness = cfg.get_double(section, "brightness", base.brightness);
    base.contrast = cfg.get_double(section, "contrast", base.contrast);
    base.saturation = cfg.get_double(section, "saturation", base.saturation);
    base.grayscale_probability =
        cfg.get_double(section, "grayscale_probability", base.grayscale_probability);
    return base;
}

TrainConfig train_config_from(const Config& cfg, int workers) {
    TrainConfig tc;
    tc.lambda = cfg.get_double("train", "lambda", tc.lambda);
    tc.tau = cfg.get_double("train", "tau", tc.tau);
    tc.learning_rate = cfg.get_double("train", "learning_rate", tc.learning_rate);
    tc.epochs_per_iteration = cfg.get_int("train", "epochs_per_iteration", tc.epochs_per_iteration);
    tc.num_iterations = cfg.get_int("train", "num_iterations", tc.num_iterations);
    tc.batch_labeled = cfg.get_int("train", "batch_labeled", tc.batch_labeled);
    tc.batch_unlabeled = cfg.get_int("train", "batch_unlabeled", tc.batch_unlabeled);
    tc.steps_per_epoch = cfg.get_int("train", "steps_per_epoch", tc.steps_per_epoch);
    tc.unlabeled_budget_per_class =
        cfg.get_int("train", "unlabeled_budget_per_class", tc.unlabeled_budget_per_class);
    tc.optimizer = optimizer_from_string(cfg.get("train", "optimizer", to_string(tc.optimizer)));
    tc.momentum = cfg.get_double("train", "momentum", tc.momentum);
    tc.cosine_decay = cfg.get_bool("train", "cosine_decay", tc.cosine_decay);
    tc.labeled_fraction = cfg.get_double("train", "labeled_fraction", tc.labeled_fraction);
    tc.use_unlabeled = cfg.get_bool("train", "use_unlabeled", tc.use_unlabeled);
    tc.use_augmentation_noise =
        cfg.get_bool("train", "use_augmentation_noise", tc.use_augmentation_noise);
    tc.use_iterative = cfg.get_bool("train", "use_iterative", tc.use_iterative);
    tc.regenerate_labels_each_epoch =
        cfg.get_bool("train", "regenerate_labels_each_epoch", tc.regenerate_labels_each_epoch);
    tc.val_alpha = cfg.get_double("train", "val_alpha", tc.val_alpha);
    tc.proj_dim = cfg.get_int("matcher", "proj_dim", tc.proj_dim);
    tc.temperature = cfg.get_double("matcher", "temperature", tc.temperature);
    tc.stride = cfg.get_int("matcher", "stride", tc.stride);
    tc.init_noise = cfg.get_double("matcher", "init_noise", tc.init_noise);
    tc.seed = cfg.get_u64("", "seed", tc.seed);
    tc.weak.photo = photo_from(cfg, "augment.weak", weak_photometric());
    tc.weak.geo = geo_from(cfg, "augment.weak", weak_geometric());
    tc.strong.photo = photo_from(cfg, "augment.strong", strong_photometric());
    tc.strong.geo = geo_from(cfg, "augment.strong", strong_geometric());
    tc.workers = workers;
    return tc;
}

EvalOptions eval_options_from(const Config& cfg, int workers) {
    EvalOptions opts;
    opts.alphas = cfg.get_doubles("eval", "alphas", opts.alphas);
    opts.slice_alpha = cfg.get_double("eval", "slice_alpha", opts.slice_alpha);
    std::string norm = cfg.get("eval", "norm", "bbox");
    if (norm == "bbox") {
        opts.norm = PckNorm::bbox;
    } else if (norm == "img") {
        opts.norm = PckNorm::img;
    } else {
        throw ConfigError("eval: norm must be img or bbox");
    }
    opts.split = split_from_string(cfg.get("eval", "split", "test"));
    opts.workers = workers;
    return opts;
}

Config load_config(const std::string& path, std::uint64_t seed_override, bool seed_set) {
    Config cfg = path.empty() ? Config{} : Config::parse_file(path);
    cfg.validate_known_keys(known_keys());
    if (seed_set) cfg.set("", "seed", std::to_string(seed_override));
    return cfg;
}

void write_snapshot(const Config& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    cfg.write(out_dir / "resolved.cfg");
}

double final_test_pck(const LoadedDataset& ds, const MatcherParams& params, int workers) {
    EvalOptions opts;
    opts.alphas = {0.1};
    opts.slice_alpha = 0.1;
    opts.norm = PckNorm::bbox;
    opts.split = Split::test;
    opts.workers = workers;
    return evaluate_report(ds, params, opts).overall();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct TrainOutputs {
    std::vector<Checkpoint> checkpoints;
    TrainLog log;
};

TrainOutputs run_training(const LoadedDataset& ds, const TrainConfig& tc) {
    TrainOutputs out;
    out.checkpoints = iterative_train(ds, tc, &out.log);
    return out;
}

void save_training(const TrainOutputs& out, const fs::path& dir) {
    fs::create_directories(dir);
    out.log.save_csv(dir / "metrics.csv");
    std::ofstream summary(dir / "generations.csv");
    summary << "generation,epoch,val_pck\n";
    summary.precision(12);
    for (const auto& ck : out.checkpoints) {
        char name[64];
        std::snprintf(name, sizeof(name), "gen%02d.ckpt", ck.generation);
        save_params(ck.params, dir / name,
                    {{"generation", std::to_string(ck.generation)},
                     {"epoch", std::to_string(ck.epoch)},
                     {"val_pck", std::to_string(ck.val_pck)},
                     {"rng_state", std::to_string(ck.rng_state)}});
        summary << ck.generation << "," << ck.epoch << "," << ck.val_pck << "\n";
    }
    save_params(out.checkpoints.back().params, dir / "final.ckpt");
}

int run(int argc, char** argv) {
    CLI::App app{"matchlab: semi-supervised semantic correspondence laboratory"};
    app.require_subcommand(1);
    app.fallthrough();
    int workers = 1;
    app.add_option("--workers", workers, "worker threads for annotate/corrupt/eval");

    std::string config_path, manifest_path, out_path, checkpoint_path;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override the global seed")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with exact oracles");
    synth->add_option("--config", config_path, "config file");
    synth->add_option("--out", out_path, "output directory")->required();
    add_seed(synth);

    // mine-pairs
    auto* mine = app.add_subcommand("mine-pairs", "enumerate / sample image pairs to CSV");
    mine->add_option("--manifest", manifest_path, "dataset manifest")->required();
    mine->add_option("--out", out_path, "output CSV")->required();
    std::string mine_what = "universe";
    std::string mine_class;
    int mine_budget = 8;
    int mine_iteration = 0;
    mine->add_option("--what", mine_what, "universe | labeled | sample");
    mine->add_option("--class", mine_class, "class id (universe only; default: all classes)");
    mine->add_option("--budget", mine_budget, "per-class budget (sample)");
    mine->add_option("--iteration", mine_iteration, "iteration index (sample)");
    add_seed(mine);

    // train
    auto* train = app.add_subcommand("train", "supervised or iterative self-training per config");
    train->add_option("--config", config_path, "config file");
    train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    train->add_option("--out", out_path, "output directory")->required();
    add_seed(train);

    // annotate
    auto* annotate = app.add_subcommand("annotate", "machine-annotate unlabeled pairs");
    annotate->add_option("--checkpoint", checkpoint_path, "teacher checkpoint")->required();
    annotate->add_option("--manifest", manifest_path, "dataset manifest")->required();
    annotate->add_option("--out", out_path, "output directory")->required();
    double annotate_tau = 0.7;
    int annotate_budget = 8;
    int annotate_iteration = 0;
    annotate->add_option("--tau", annotate_tau, "confidence threshold");
    annotate->add_option("--budget", annotate_budget, "per-class unlabeled budget");
    annotate->add_option("--iteration", annotate_iteration, "iteration index for sampling");
    add_seed(annotate);

    // eval
    auto* eval = app.add_subcommand("eval", "PCK report for a checkpoint or prediction file");
    eval->add_option("--manifest", manifest_path, "dataset manifest")->required();
    eval->add_option("--out", out_path, "output prefix (writes <out>.csv and <out>.txt)")
        ->required();
    eval->add_option("--checkpoint", checkpoint_path, "matcher checkpoint");
    std::string predictions_path;
    eval->add_option("--predictions", predictions_path, "prediction CSV instead of a checkpoint");
    eval->add_option("--config", config_path, "config file (eval section)");
    int overlay_count = 0;
    eval->add_option("--overlays", overlay_count, "write up to N match overlay PNGs");

    // corrupt
    auto* corrupt_cmd = app.add_subcommand("corrupt", "build the corrupted test-set variants");
    corrupt_cmd->add_option("--manifest", manifest_path, "clean dataset manifest")->required();
    corrupt_cmd->add_option("--out", out_path, "output directory")->required();
    add_seed(corrupt_cmd);

    // robustness
    auto* robust = app.add_subcommand("robustness", "robustness report over a corrupted set");
    robust->add_option("--checkpoint", checkpoint_path, "matcher checkpoint")->required();
    robust->add_option("--manifest", manifest_path, "clean dataset manifest")->required();
    std::string corrupted_dir;
    robust->add_option("--corrupted", corrupted_dir, "corrupted set directory")->required();
    robust->add_option("--out", out_path, "output CSV")->required();
    double robust_alpha = 0.1;
    robust->add_option("--alpha", robust_alpha, "PCK tolerance");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "sweep tau, alpha or labeled_fraction");
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::vector<std::uint64_t> sweep_seeds{0};
    sweep->add_option("--param", sweep_param, "tau | alpha | labeled_fraction")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "seeds to aggregate over")->delimiter(',');
    sweep->add_option("--config", config_path, "config file");
    sweep->add_option("--manifest", manifest_path, "dataset manifest")->required();
    sweep->add_option("--out", out_path, "output CSV")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "the four component-ablation configurations");
    std::vector<std::uint64_t> ablate_seeds{0};
    ablate->add_option("--seeds", ablate_seeds, "seeds to aggregate over")->delimiter(',');
    ablate->add_option("--config", config_path, "config file");
    ablate->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ablate->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (synth->parsed()) {
        Config cfg = load_config(config_path, seed, seed_set);
        SynthSpec spec = synth_spec_from(cfg);
        GeneratedDataset ds = generate_dataset(spec);
        write_dataset(ds, out_path);
        write_snapshot(cfg, out_path);
        std::cout << "synth: " << ds.manifest.images.size() << " images, "
                  << ds.manifest.pairs.size() << " annotated pairs -> " << out_path << "\n";
        return 0;
    }

    if (mine->parsed()) {
        DatasetManifest m = load_manifest(manifest_path);
        PairSet set;
        if (mine_what == "universe") {
            if (!mine_class.empty()) {
                set = enumerate_pairs(m, mine_class);
            } else {
                for (const auto& cls : m.classes) {
                    PairSet per = enumerate_pairs(m, cls);
                    set.pairs.insert(set.pairs.end(), per.pairs.begin(), per.pairs.end());
                }
            }
        } else if (mine_what == "labeled") {
            set = labeled_pairs(m);
        } else if (mine_what == "sample") {
            set = sample_unlabeled_batch(m, mine_budget, seed, mine_iteration);
        } else {
            throw ConfigError("mine-pairs: --what must be universe, labeled or sample");
        }
        save_pairs_csv(set, out_path);
        std::cout << "mine-pairs: " << set.size() << " pairs -> " << out_path << "\n";
        return 0;
    }

    if (train->parsed()) {
        Config cfg = load_config(config_path, seed, seed_set);
        TrainConfig tc = train_config_from(cfg, workers);
        LoadedDataset ds = load_dataset(manifest_path);
        TrainOutputs out = run_training(ds, tc);
        save_training(out, out_path);
        write_snapshot(cfg, out_path);
        std::cout << "train: " << out.checkpoints.size() << " generations, final val PCK "
                  << out.checkpoints.back().val_pck << " -> " << out_path << "\n";
        return 0;
    }

    if (annotate->parsed()) {
        MatcherParams teacher = load_params(checkpoint_path);
        LoadedDataset ds = load_dataset(manifest_path);
        PairSet batch = sample_unlabeled_batch(ds.manifest, annotate_budget, seed,
                                               annotate_iteration);
        std::vector<PseudoLabel> labels(batch.size());
        parallel_for(batch.size(), workers, [&](std::size_t i) {
            const PairRef& ref = batch.pairs[i];
            PseudoLabel label =
                annotate_pair(teacher, to_float(ds.image(ref.src_id)),
                              to_float(ds.image(ref.tgt_id)), annotate_tau, annotate_iteration);
            label.pair_src = ref.src_id;
            label.pair_tgt = ref.tgt_id;
            labels[i] = std::move(label);
        });
        save_pseudo_labels(labels, out_path);
        std::size_t retained = 0, cells = 0;
        for (const auto& l : labels) {
            retained += l.retained();
            cells += l.mask.size();
        }
        std::cout << "annotate: " << labels.size() << " pairs, retained " << retained << "/"
                  << cells << " cells -> " << out_path << "\n";
        return 0;
    }

    if (eval->parsed()) {
        Config cfg = load_config(config_path, 0, false);
        EvalOptions opts = eval_options_from(cfg, workers);
        LoadedDataset ds = load_dataset(manifest_path);
        PredictionTable preds;
        if (!predictions_path.empty()) {
            preds = load_predictions(predictions_path);
        } else if (!checkpoint_path.empty()) {
            preds = predict_with_params(ds, load_params(checkpoint_path), opts.split, workers);
        } else {
            throw ConfigError("eval: need --checkpoint or --predictions");
        }
        EvalReport report = evaluate_report(ds, preds, opts);
        save_report_csv(report, out_path + ".csv");
        save_report_text(report, out_path + ".txt");
        if (overlay_count > 0) {
            fs::path overlay_dir = fs::path(out_path + "_overlays");
            fs::create_directories(overlay_dir);
            int made = 0;
            for (const auto& pair : ds.manifest.pairs) {
                if (made >= overlay_count) break;
                if (ds.manifest.image(pair.src_id).split != opts.split) continue;
                auto it = preds.find(pair_key(pair.src_id, pair.tgt_id));
                if (it == preds.end()) continue;
                const ImageRecord& src = ds.manifest.image(pair.src_id);
                double fh = src.bbox && opts.norm == PckNorm::bbox ? src.bbox->height()
                                                                   : src.height;
                double fw = src.bbox && opts.norm == PckNorm::bbox ? src.bbox->width()
                                                                   : src.width;
                render_match_overlay(ds.image(pair.src_id), ds.image(pair.tgt_id), pair.keypoints,
                                     it->second, opts.slice_alpha * std::max(fh, fw),
                                     overlay_dir /
                                         (pair_key(pair.src_id, pair.tgt_id) + ".png"));
                ++made;
            }
        }
        std::cout << "eval: overall PCK@" << report.slice_alpha << " = " << report.overall()
                  << " over " << report.keypoints << " keypoints -> " << out_path << ".csv\n";
        return 0;
    }

    if (corrupt_cmd->parsed()) {
        LoadedDataset ds = load_dataset(manifest_path);
        DatasetManifest derived = build_corrupted_set(ds, out_path, seed, workers);
        std::cout << "corrupt: " << derived.images.size() << " test images x "
                  << kNumCorruptionKinds * kNumSeverities << " variants -> " << out_path << "\n";
        return 0;
    }

    if (robust->parsed()) {
        MatcherParams params = load_params(checkpoint_path);
        LoadedDataset clean = load_dataset(manifest_path);
        DatasetManifest corrupted = load_manifest(fs::path(corrupted_dir) / "manifest.json");
        PckSpec spec{robust_alpha, PckNorm::bbox};
        RobustnessReport report =
            robustness_eval(params, corrupted, corrupted_dir, clean, spec, workers);
        save_robustness_csv(report, out_path);
        std::cout << "robustness: corrupted avg " << report.corrupted_avg << " vs clean "
                  << report.clean << " -> " << out_path << "\n";
        return 0;
    }

    if (sweep->parsed()) {
        Config cfg = load_config(config_path, 0, false);
        LoadedDataset ds = load_dataset(manifest_path);
        std::ofstream out(out_path);
        if (!out) throw IoFailure("cannot write sweep csv: " + out_path);
        out << "param,value,seed,final_pck\n";
        out.precision(12);
        if (sweep_param != "tau" && sweep_param != "alpha" && sweep_param != "labeled_fraction") {
            throw ConfigError("sweep: --param must be tau, alpha or labeled_fraction");
        }
        if (sweep_param == "alpha") {
            // one pipeline per seed, evaluated at each tolerance
            for (std::uint64_t s : sweep_seeds) {
                Config run_cfg = cfg;
                run_cfg.set("", "seed", std::to_string(s));
                TrainConfig tc = train_config_from(run_cfg, workers);
                TrainOutputs res = run_training(ds, tc);
                EvalOptions opts;
                opts.alphas = sweep_values;
                opts.slice_alpha = sweep_values.front();
                opts.norm = PckNorm::bbox;
                opts.split = Split::test;
                opts.workers = workers;
                EvalReport report =
                    evaluate_report(ds, res.checkpoints.back().params, opts);
                for (double a : sweep_values) {
                    out << "alpha," << a << "," << s << "," << report.overall_at(a) << "\n";
                }
            }
        } else {
            std::map<double, std::vector<double>> by_value;
            for (double v : sweep_values) {
                for (std::uint64_t s : sweep_seeds) {
                    Config run_cfg = cfg;
                    run_cfg.set("", "seed", std::to_string(s));
                    if (sweep_param == "tau") {
                        run_cfg.set("train", "tau", std::to_string(v));
                    } else {
                        run_cfg.set("train", "labeled_fraction", std::to_string(v));
                    }
                    TrainConfig tc = train_config_from(run_cfg, workers);
                    TrainOutputs res = run_training(ds, tc);
                    double pck = final_test_pck(ds, res.checkpoints.back().params, workers);
                    by_value[v].push_back(pck);
                    out << sweep_param << "," << v << "," << s << "," << pck << "\n";
                }
            }
            for (const auto& [v, pcks] : by_value) {
                out << sweep_param << "," << v << ",median," << median(pcks) << "\n";
            }
        }
        std::cout << "sweep: " << sweep_param << " over " << sweep_values.size() << " values -> "
                  << out_path << "\n";
        return 0;
    }

    if (ablate->parsed()) {
        Config cfg = load_config(config_path, 0, false);
        LoadedDataset ds = load_dataset(manifest_path);
        std::ofstream out(out_path);
        if (!out) throw IoFailure("cannot write ablate csv: " + out_path);
        out << "config,seed,final_pck\n";
        out.precision(12);
        struct Variant {
            const char* name;
            bool iterative, noise, unlabeled;
        };
        const Variant variants[4] = {{"full", true, true, true},
                                     {"no_iterative", false, true, true},
                                     {"no_noise", false, false, true},
                                     {"no_unpaired", false, false, false}};
        std::map<std::string, std::vector<double>> by_name;
        for (const Variant& v : variants) {
            for (std::uint64_t s : ablate_seeds) {
                Config run_cfg = cfg;
                run_cfg.set("", "seed", std::to_string(s));
                run_cfg.set("train", "use_iterative", v.iterative ? "true" : "false");
                run_cfg.set("train", "use_augmentation_noise", v.noise ? "true" : "false");
                run_cfg.set("train", "use_unlabeled", v.unlabeled ? "true" : "false");
                TrainConfig tc = train_config_from(run_cfg, workers);
                TrainOutputs res = run_training(ds, tc);
                double pck = final_test_pck(ds, res.checkpoints.back().params, workers);
                by_name[v.name].push_back(pck);
                out << v.name << "," << s << "," << pck << "\n";
            }
        }
        for (const Variant& v : variants) {
            out << v.name << ",median," << median(by_name[v.name]) << "\n";
        }
        std::cout << "ablate: 4 configurations x " << ablate_seeds.size() << " seeds -> "
                  << out_path << "\n";
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
