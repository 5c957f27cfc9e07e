#include "matchlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "matchlab/annotator.hpp"
#include "matchlab/parallel.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "sgd_momentum" || name == "sgd+momentum") return OptimizerKind::sgd_momentum;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sgd_momentum: return "sgd_momentum";
        case OptimizerKind::adam: return "adam";
    }
    return "sgd";
}

void TrainConfig::validate() const {
    if (lambda < 0) throw ConfigError("train: lambda must be >= 0");
    if (tau < 0 || tau > 1) throw ConfigError("train: tau must be in [0, 1]");
    if (epochs_per_iteration < 1 || num_iterations < 1)
        throw ConfigError("train: epochs and iterations must be >= 1");
    if (batch_labeled < 1 || batch_unlabeled < 1 || steps_per_epoch < 1)
        throw ConfigError("train: batch sizes and steps_per_epoch must be >= 1");
    if (labeled_fraction <= 0 || labeled_fraction > 1)
        throw ConfigError("train: labeled_fraction must be in (0, 1]");
    if (temperature <= 0) throw ConfigError("train: temperature must be > 0");
}

void TrainLog::save_csv(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write metrics log: " + path.string());
    f << "step,epoch,generation,loss_sup,loss_unsup,loss_total,retained_fraction,val_pck\n";
    f.precision(12);
    for (const auto& row : rows) {
        f << row.step << "," << row.epoch << "," << row.generation << "," << row.loss_sup << ","
          << row.loss_unsup << "," << row.loss_total << "," << row.retained_fraction << ","
          << row.val_pck << "\n";
    }
}

namespace {

struct Optimizer {
    OptimizerKind kind;
    double momentum;
    Eigen::MatrixXd velocity;
    Eigen::MatrixXd m1, m2;  // adam moments
    long t = 0;

    explicit Optimizer(const TrainConfig& cfg, Eigen::Index rows, Eigen::Index cols)
        : kind(cfg.optimizer), momentum(cfg.momentum) {
        velocity = Eigen::MatrixXd::Zero(rows, cols);
        m1 = Eigen::MatrixXd::Zero(rows, cols);
        m2 = Eigen::MatrixXd::Zero(rows, cols);
    }

    void step(Eigen::MatrixXd& theta, const Eigen::MatrixXd& grad, double lr) {
        ++t;
        switch (kind) {
            case OptimizerKind::sgd:
                theta -= lr * grad;
                break;
            case OptimizerKind::sgd_momentum:
                velocity = momentum * velocity - lr * grad;
                theta += velocity;
                break;
            case OptimizerKind::adam: {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                m1 = b1 * m1 + (1 - b1) * grad;
                m2 = b2 * m2 + (1 - b2) * grad.cwiseProduct(grad).eval();
                double c1 = 1 - std::pow(b1, static_cast<double>(t));
                double c2 = 1 - std::pow(b2, static_cast<double>(t));
                theta -= (lr / c1) *
                         (m1.array() / ((m2.array() / c2).sqrt() + eps)).matrix();
                break;
            }
        }
    }
};

MatcherParams fresh_params(const TrainConfig& cfg) {
    MatcherParams p = MatcherParams::identity_init(cfg.proj_dim, cfg.temperature, cfg.stride);
    Rng rng(derive_stream({cfg.seed, fnv1a("init")}));
    for (Eigen::Index i = 0; i < p.projection.rows(); ++i)
        for (Eigen::Index j = 0; j < p.projection.cols(); ++j)
            p.projection(i, j) += cfg.init_noise * rng.normal();
    return p;
}

double stage_lr(const TrainConfig& cfg, int epoch, int epochs) {
    if (!cfg.cosine_decay || epochs <= 1) return cfg.learning_rate;
    return cfg.learning_rate * 0.5 *
           (1.0 + std::cos(M_PI * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

// Selection metric. Datasets without annotated val pairs fall back to the
// train-split annotations (never the test split).
double validation_pck(const LoadedDataset& ds, const MatcherParams& params,
                      const TrainConfig& cfg) {
    EvalOptions opts;
    opts.alphas = {cfg.val_alpha};
    opts.slice_alpha = cfg.val_alpha;
    opts.norm = PckNorm::bbox;
    opts.split = Split::val;
    opts.workers = cfg.workers;
    try {
        return evaluate_report(ds, params, opts).overall();
    } catch (const MissingGroundTruth&) {
        opts.split = Split::train;
        return evaluate_report(ds, params, opts).overall();
    }
}

const AnnotatedPair* find_annotation(const DatasetManifest& m, const PairRef& ref) {
    for (const auto& pair : m.pairs) {
        if (pair.src_id == ref.src_id && pair.tgt_id == ref.tgt_id) return &pair;
    }
    return nullptr;
}

struct StageInputs {
    std::vector<const AnnotatedPair*> labeled;     // sparse supervision
    std::vector<const PairRef*> unlabeled;         // pseudo supervision
    std::vector<PseudoLabel> pseudo_labels;        // aligned with `unlabeled`
};

// Per-item work for one optimization step; slots computed independently and
// reduced in index order so results do not depend on the worker count.
struct ItemResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;
    bool used = false;
    double retained = 0.0;
};

struct StageResult {
    Checkpoint best;
    MatcherParams final_params;
};

// The shared stage loop. `teacher` null means supervised-only (no unlabeled
// term regardless of cfg.use_unlabeled).
Checkpoint run_stage(const LoadedDataset& ds, const PairSet& labeled_set,
                     const MatcherParams* teacher, const MatcherParams& init, int generation,
                     int epochs, const TrainConfig& cfg, TrainLog* log) {
    cfg.validate();
    const bool with_unlabeled = teacher != nullptr && cfg.use_unlabeled;
    if (labeled_set.empty() && !with_unlabeled) {
        throw EmptyPairSet("run_stage: no labeled pairs and no unlabeled term");
    }

    StageInputs inputs;
    for (const auto& ref : labeled_set.pairs) {
        const AnnotatedPair* ann = find_annotation(ds.manifest, ref);
        if (ann != nullptr && !ann->keypoints.empty()) inputs.labeled.push_back(ann);
    }
    if (!labeled_set.empty() && inputs.labeled.empty() && !with_unlabeled) {
        throw EmptyPairSet("run_stage: labeled pairs carry no keypoints");
    }

    PairSet unlabeled_set;
    if (with_unlabeled) {
        unlabeled_set = sample_unlabeled_batch(ds.manifest, labeled_set,
                                               cfg.unlabeled_budget_per_class, cfg.seed,
                                               generation);
        for (const auto& ref : unlabeled_set.pairs) inputs.unlabeled.push_back(&ref);
    }

    const AugmentPreset& preset = teacher != nullptr && cfg.use_augmentation_noise ? cfg.strong
                                                                                   : cfg.weak;

    auto annotate_all = [&]() {
        inputs.pseudo_labels.clear();
        inputs.pseudo_labels.resize(inputs.unlabeled.size());
        parallel_for(inputs.unlabeled.size(), cfg.workers, [&](std::size_t i) {
            const PairRef& ref = *inputs.unlabeled[i];
            PseudoLabel label = annotate_pair(*teacher, to_float(ds.image(ref.src_id)),
                                              to_float(ds.image(ref.tgt_id)), cfg.tau, generation);
            label.pair_src = ref.src_id;
            label.pair_tgt = ref.tgt_id;
            inputs.pseudo_labels[i] = std::move(label);
        });
    };
    if (with_unlabeled) {
        annotate_all();
        bool any_retained = false;
        for (const auto& label : inputs.pseudo_labels) {
            if (label.retained() > 0) {
                any_retained = true;
                break;
            }
        }
        if (!any_retained && (cfg.lambda == 0.0 || inputs.labeled.empty())) {
            throw EmptySupervision(
                "self_train_stage: tau gated out every pseudo-label cell and no supervised "
                "signal remains");
        }
    }

    MatcherParams student = init;
    Optimizer opt(cfg, student.projection.rows(), student.projection.cols());

    Checkpoint best;
    best.params = student;
    best.generation = generation;
    best.epoch = 0;
    best.val_pck = validation_pck(ds, student, cfg);
    best.rng_state = derive_stream({cfg.seed, static_cast<std::uint64_t>(generation)});

    long global_step = log != nullptr && !log->rows.empty() ? log->rows.back().step + 1 : 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        if (with_unlabeled && cfg.regenerate_labels_each_epoch && epoch > 0) annotate_all();

        std::vector<std::size_t> sup_order(inputs.labeled.size());
        for (std::size_t i = 0; i < sup_order.size(); ++i) sup_order[i] = i;
        Rng sup_rng(derive_stream({cfg.seed, fnv1a("sup_order"),
                                   static_cast<std::uint64_t>(generation),
                                   static_cast<std::uint64_t>(epoch)}));
        sup_rng.shuffle(sup_order);

        std::vector<std::size_t> unsup_order(inputs.unlabeled.size());
        for (std::size_t i = 0; i < unsup_order.size(); ++i) unsup_order[i] = i;
        Rng unsup_rng(derive_stream({cfg.seed, fnv1a("unsup_order"),
                                     static_cast<std::uint64_t>(generation),
                                     static_cast<std::uint64_t>(epoch)}));
        unsup_rng.shuffle(unsup_order);

        std::size_t sup_cursor = 0, unsup_cursor = 0;
        const double lr = stage_lr(cfg, epoch, epochs);

        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            // ---- supervised term ----
            double loss_sup = 0.0;
            Eigen::MatrixXd grad_sup =
                Eigen::MatrixXd::Zero(student.projection.rows(), student.projection.cols());
            if (!inputs.labeled.empty() && cfg.lambda > 0.0) {
                const int take = std::min<int>(cfg.batch_labeled,
                                               static_cast<int>(inputs.labeled.size()));
                std::vector<ItemResult> slots(static_cast<std::size_t>(take));
                std::vector<const AnnotatedPair*> batch;
                for (int b = 0; b < take; ++b) {
                    batch.push_back(inputs.labeled[sup_order[sup_cursor % sup_order.size()]]);
                    ++sup_cursor;
                }
                parallel_for(static_cast<std::size_t>(take), cfg.workers, [&](std::size_t b) {
                    const AnnotatedPair& ann = *batch[b];
                    Rng item_rng(derive_stream({cfg.seed, fnv1a("aug_sup"),
                                                static_cast<std::uint64_t>(generation),
                                                static_cast<std::uint64_t>(epoch),
                                                static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(b)}));
                    Image src = to_float(ds.image(ann.src_id));
                    Image tgt = to_float(ds.image(ann.tgt_id));
                    AugmentationDraws draws =
                        sample_augmentations(preset.photo, preset.geo, item_rng, tgt.grid());
                    AugmentedPair aug =
                        augment_pair(src, tgt, std::nullopt, ann.keypoints, draws);
                    SparseSupervision sup;
                    sup.entries = aug.sparse_keypoints;
                    try {
                        LossResult r = loss_and_grad(student, aug.src, aug.tgt, sup);
                        slots[b].loss = r.loss;
                        slots[b].grad = std::move(r.grad);
                        slots[b].used = true;
                    } catch (const EmptySupervision&) {
                        slots[b].used = false;
                    }
                });
                int used = 0;
                for (const auto& slot : slots) {
                    if (!slot.used) continue;
                    loss_sup += slot.loss;
                    grad_sup += slot.grad;
                    ++used;
                }
                if (used > 0) {
                    loss_sup /= used;
                    grad_sup /= used;
                }
                if (log != nullptr) {
                    for (const auto& slot : slots)
                        if (!slot.used) ++log->skipped_empty_pairs;
                }
            }

            // ---- unlabeled term ----
            double loss_unsup = 0.0;
            double retained_sum = 0.0;
            int retained_count = 0;
            Eigen::MatrixXd grad_unsup =
                Eigen::MatrixXd::Zero(student.projection.rows(), student.projection.cols());
            if (with_unlabeled && !inputs.unlabeled.empty()) {
                const int take = std::min<int>(cfg.batch_unlabeled,
                                               static_cast<int>(inputs.unlabeled.size()));
                std::vector<ItemResult> slots(static_cast<std::size_t>(take));
                std::vector<std::size_t> batch;
                for (int b = 0; b < take; ++b) {
                    batch.push_back(unsup_order[unsup_cursor % unsup_order.size()]);
                    ++unsup_cursor;
                }
                parallel_for(static_cast<std::size_t>(take), cfg.workers, [&](std::size_t b) {
                    const std::size_t idx = batch[b];
                    const PairRef& ref = *inputs.unlabeled[idx];
                    const PseudoLabel& label = inputs.pseudo_labels[idx];
                    Rng item_rng(derive_stream({cfg.seed, fnv1a("aug_unsup"),
                                                static_cast<std::uint64_t>(generation),
                                                static_cast<std::uint64_t>(epoch),
                                                static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(b)}));
                    Image src = to_float(ds.image(ref.src_id));
                    Image tgt = to_float(ds.image(ref.tgt_id));
                    AugmentationDraws draws =
                        sample_augmentations(preset.photo, preset.geo, item_rng, tgt.grid());
                    AugmentedPair aug = augment_pair(src, tgt, label, {}, draws);
                    const PseudoLabel& effective = *aug.dense_label;
                    slots[b].retained =
                        effective.mask.empty()
                            ? 0.0
                            : static_cast<double>(effective.retained()) /
                                  static_cast<double>(effective.mask.size());
                    DenseSupervision sup;
                    sup.coords = effective.field.coords;
                    sup.mask = effective.mask;
                    try {
                        LossResult r = loss_and_grad(student, aug.src, aug.tgt, sup);
                        slots[b].loss = r.loss;
                        slots[b].grad = std::move(r.grad);
                        slots[b].used = true;
                    } catch (const EmptySupervision&) {
                        slots[b].used = false;
                    }
                });
                int used = 0;
                for (const auto& slot : slots) {
                    retained_sum += slot.retained;
                    ++retained_count;
                    if (!slot.used) continue;
                    loss_unsup += slot.loss;
                    grad_unsup += slot.grad;
                    ++used;
                }
                if (used > 0) {
                    loss_unsup /= used;
                    grad_unsup /= used;
                }
                if (log != nullptr) {
                    for (const auto& slot : slots)
                        if (!slot.used) ++log->skipped_empty_pairs;
                }
            }

            const double loss_total = loss_unsup + cfg.lambda * loss_sup;
            Eigen::MatrixXd grad_total = grad_unsup + cfg.lambda * grad_sup;
            opt.step(student.projection, grad_total, lr);

            if (log != nullptr) {
                StepMetrics row;
                row.step = global_step++;
                row.epoch = epoch;
                row.generation = generation;
                row.loss_sup = loss_sup;
                row.loss_unsup = loss_unsup;
                row.loss_total = loss_total;
                row.retained_fraction =
                    retained_count > 0 ? retained_sum / retained_count : 0.0;
                log->rows.push_back(row);
            }
        }

        const double val = validation_pck(ds, student, cfg);
        if (log != nullptr && !log->rows.empty()) log->rows.back().val_pck = val;
        if (val > best.val_pck) {
            best.params = student;
            best.epoch = epoch + 1;
            best.val_pck = val;
        }
    }
    return best;
}

}  // namespace

Checkpoint train_supervised(const LoadedDataset& ds, const PairSet& labeled,
                            const TrainConfig& cfg, TrainLog* log) {
    if (labeled.empty()) throw EmptyPairSet("train_supervised: empty labeled pair set");
    MatcherParams init = fresh_params(cfg);
    return run_stage(ds, labeled, nullptr, init, 0, cfg.epochs_per_iteration, cfg, log);
}

Checkpoint self_train_stage(const Checkpoint& teacher, const LoadedDataset& ds,
                            const PairSet& labeled, const TrainConfig& cfg, int generation,
                            TrainLog* log, int epochs_override, bool warm_start) {
    const int epochs = epochs_override > 0 ? epochs_override : cfg.epochs_per_iteration;
    return run_stage(ds, labeled, cfg.use_unlabeled ? &teacher.params : nullptr,
                     warm_start ? teacher.params : fresh_params(cfg), generation, epochs, cfg,
                     log);
}

std::vector<Checkpoint> iterative_train(const LoadedDataset& ds, const TrainConfig& cfg,
                                        TrainLog* log) {
    cfg.validate();
    PairSet labeled = labeled_pairs(ds.manifest);
    if (cfg.labeled_fraction < 1.0) {
        labeled = subsample_labeled_by_image(ds.manifest, labeled, cfg.labeled_fraction, cfg.seed);
    }

    std::vector<Checkpoint> checkpoints;
    checkpoints.push_back(train_supervised(ds, labeled, cfg, log));

    if (cfg.num_iterations == 1) return checkpoints;

    if (!cfg.use_iterative) {
        // one stage, same total epoch budget, teacher fixed at generation 0
        const int epochs = (cfg.num_iterations - 1) * cfg.epochs_per_iteration;
        checkpoints.push_back(
            self_train_stage(checkpoints.front(), ds, labeled, cfg, 1, log, epochs));
        return checkpoints;
    }

    for (int gen = 1; gen < cfg.num_iterations; ++gen) {
        const Checkpoint& teacher = checkpoints.back();
        checkpoints.push_back(self_train_stage(teacher, ds, labeled, cfg, gen, log));
    }
    return checkpoints;
}

double grad_check(const MatcherParams& params, const Image& src, const Image& tgt,
                  const Supervision& supervision, double epsilon, std::uint64_t subset_seed) {
    if (epsilon <= 0) throw InvalidSpec("grad_check: epsilon must be > 0");
    LossResult analytic = loss_and_grad(params, src, tgt, supervision);

    const Eigen::Index rows = params.projection.rows();
    const Eigen::Index cols = params.projection.cols();
    const Eigen::Index total = rows * cols;

    std::vector<Eigen::Index> entries;
    if (total <= 256) {
        entries.resize(static_cast<std::size_t>(total));
        for (Eigen::Index i = 0; i < total; ++i) entries[static_cast<std::size_t>(i)] = i;
    } else {
        Rng rng(derive_stream({subset_seed, fnv1a("grad_check")}));
        std::vector<Eigen::Index> all(static_cast<std::size_t>(total));
        for (Eigen::Index i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;
        rng.shuffle(all);
        entries.assign(all.begin(), all.begin() + std::max<Eigen::Index>(50, total / 8));
    }

    double max_rel = 0.0;
    MatcherParams probe = params;
    for (Eigen::Index flat : entries) {
        const Eigen::Index i = flat / cols;
        const Eigen::Index j = flat % cols;
        const double saved = probe.projection(i, j);
        probe.projection(i, j) = saved + epsilon;
        const double up = loss_and_grad(probe, src, tgt, supervision).loss;
        probe.projection(i, j) = saved - epsilon;
        const double down = loss_and_grad(probe, src, tgt, supervision).loss;
        probe.projection(i, j) = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double an = analytic.grad(i, j);
        const double scale = std::max(std::abs(fd), std::abs(an));
        // noise floor: central differences carry an O(eps^2) truncation term,
        // so entries this small are below what the probe can resolve
        if (scale < std::max(1e-8, 100.0 * epsilon * epsilon)) continue;
        max_rel = std::max(max_rel, std::abs(fd - an) / scale);
    }
    return max_rel;
}

}  // namespace matchlab
