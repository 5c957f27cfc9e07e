#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matchlab/augment.hpp"
#include "matchlab/eval.hpp"
#include "matchlab/manifest.hpp"
#include "matchlab/matcher.hpp"
#include "matchlab/pair_engine.hpp"

namespace matchlab {

enum class OptimizerKind { sgd, sgd_momentum, adam };

OptimizerKind optimizer_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct AugmentPreset {
    PhotometricSpec photo;
    GeometricSpec geo;
};

struct TrainConfig {
    double lambda = 1.0;
    double tau = 0.7;
    double learning_rate = 0.05;
    int epochs_per_iteration = 50;
    int num_iterations = 3;
    int batch_labeled = 4;
    int batch_unlabeled = 8;
    int steps_per_epoch = 12;
    int unlabeled_budget_per_class = 40;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    double momentum = 0.9;
    bool cosine_decay = true;
    std::uint64_t seed = 0;
    double labeled_fraction = 1.0;  // subsamples S by image

    // ablation toggles
    bool use_unlabeled = true;
    bool use_augmentation_noise = true;
    bool use_iterative = true;
    bool regenerate_labels_each_epoch = false;

    // matcher hyperparameters
    int proj_dim = DescriptorConfig::kRawDim;
    double temperature = 0.02;
    int stride = 4;
    double init_noise = 0.05;  // stddev of seeded noise added to the identity init

    AugmentPreset weak{weak_photometric(), weak_geometric()};
    AugmentPreset strong{strong_photometric(), strong_geometric()};

    double val_alpha = 0.1;  // checkpoint selection: PCK@val_alpha, bbox norm
    int workers = 1;

    void validate() const;
};

struct Checkpoint {
    MatcherParams params;
    int generation = 0;
    int epoch = 0;  // epoch within the stage at which this snapshot was taken
    double val_pck = 0.0;
    std::uint64_t rng_state = 0;  // derivation basis for the run's rng streams
};

struct StepMetrics {
    long step = 0;
    int epoch = 0;
    int generation = 0;
    double loss_sup = 0.0;
    double loss_unsup = 0.0;
    double loss_total = 0.0;
    double retained_fraction = 0.0;  // pseudo-label cells surviving the gate
    double val_pck = -1.0;           // filled on epoch-end rows
};

struct TrainLog {
    std::vector<StepMetrics> rows;
    long skipped_empty_pairs = 0;

    void save_csv(const std::filesystem::path& path) const;
};

// Gradient descent on the supervised loss with weak augmentation; returns the
// best-validation-PCK checkpoint. Deterministic given cfg.seed.
Checkpoint train_supervised(const LoadedDataset& ds, const PairSet& labeled,
                            const TrainConfig& cfg, TrainLog* log = nullptr);

// One self-training stage: frozen teacher annotates a fresh class-balanced
// unlabeled batch at tau, the student descends grad(L_U + lambda * L_S) under
// the strong augmentation preset. The teacher is never updated here.
Checkpoint self_train_stage(const Checkpoint& teacher, const LoadedDataset& ds,
                            const PairSet& labeled, const TrainConfig& cfg, int generation,
                            TrainLog* log = nullptr, int epochs_override = -1,
                            bool warm_start = true);

// Generation 0 = supervised baseline; generation l >= 1 promotes the best
// checkpoint of generation l-1 to teacher. Returns one checkpoint per
// generation. use_iterative = false collapses generations 1.. into a single
// equal-epoch stage with the generation-0 teacher.
std::vector<Checkpoint> iterative_train(const LoadedDataset& ds, const TrainConfig& cfg,
                                        TrainLog* log = nullptr);

// Central finite differences over the projection entries (all of them, or a
// seeded subset of at least 50 when the matrix is large) against the analytic
// gradient. Returns the max relative error; entries below the probe's
// O(epsilon^2) noise floor (absolute tolerance, at least 1e-8) pass vacuously.
double grad_check(const MatcherParams& params, const Image& src, const Image& tgt,
                  const Supervision& supervision, double epsilon, std::uint64_t subset_seed = 0);

}  // namespace matchlab
