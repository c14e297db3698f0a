#pragma once

#include <set>
#include <string>
#include <vector>

#include "impact/influence.hpp"
#include "impact/radg.hpp"
#include "impact/types.hpp"

namespace impact {

enum class Ablation {
    None,
    NoFlip,             // drop identified contaminants instead of relabeling
    KeepConUnflipped,   // leave identified contaminants labeled 0
    NoUnseenHead,       // skip the unseen-risk term and the unseen head at scoring
    NoFeatureScore,     // score without the feature-distance term
    RandomRef,          // reference set picked at random
    RandomFlip,         // flip a random subset of matching size
    RandomPerturb,      // random unit perturbation directions
};

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct TrainConfig {
    Arch arch;
    int epochs_total = 10;
    int epochs_initial = 9;
    int batch_size = 64;
    double lr = 3e-4;
    double lambda_unseen = 1.0;
    int k = 5;
    double alpha = 0.02;
    double margin = 5.0;
    InfluenceConfig influence;
    uint64_t seed = 0;
    uint64_t prior_seed = 1234;
    Ablation ablation = Ablation::None;
    // Signed hinge for labeled anomalies: pushes their scores to the positive
    // side of the prior so raw head outputs rank anomalies above normals.
    bool signed_dev = true;
    bool zscore_combine = false;
    bool refresh_per_batch = false;   // refresh s_test every mini-batch
    bool unseen_both_heads = true;    // route helpful samples through both heads
    // Oversample the scarce labeled anomalies to half of each mini-batch,
    // cycling through them, so the margin term is not swamped by normals.
    bool balanced_batches = true;
    // Initialize the unseen head from the trained seen head at the retrain
    // boundary instead of from its random init.
    bool warm_start_unseen = true;

    void validate() const;
};

struct TrainAudit {
    std::vector<int64_t> flipped_ids;
    std::vector<int64_t> dropped_ids;     // NoFlip ablation only
    std::vector<int64_t> reference_ids;   // cumulative D_ref
    int perturbed_count = 0;
    double predicted_flip_delta = 0.0;    // last retrain epoch
    double predicted_perturb_delta = 0.0;
    double final_stest_residual = 0.0;
    bool cg_converged = true;
    bool reference_fallback = false;      // D_ref empty, mean taken from validation
    std::vector<double> epoch_val_risk;
    InfluenceReport last_report;
};

struct ScoreStats {
    double mean_sm = 0.0, sd_sm = 1.0;
    double mean_sf = 0.0, sd_sf = 1.0;
};

struct TrainedModel {
    ModelState model;
    LossConfig loss;
    TrainConfig config;
    std::vector<double> ref_feature_mean;  // mean feature of D_ref
    ScoreStats score_stats;                // validation stats for z-score combining
    TrainAudit audit;
};

// Warm-up phase: plain minibatch SGD on the deviation loss over d_n and d_a,
// touching only the extractor and the seen head.
ModelState train_initial(const OpenSetSplit& split, const TrainConfig& cfg,
                         const LossConfig& loss);

// Full pipeline: warm-up epochs, then influence-guided retraining epochs with
// label flipping, reference accumulation, and feature perturbation.
TrainedModel impact_train(const OpenSetSplit& split, const TrainConfig& cfg);

struct SampleScore {
    double s_m = 0.0;  // model deviation score
    double s_f = 0.0;  // feature distance to the reference mean
    double s = 0.0;    // combined
};

SampleScore score_sample(const TrainedModel& tm, const SeriesWindow& x);
std::vector<double> score_windows(const TrainedModel& tm,
                                  const std::vector<SeriesWindow>& windows);

// Per-timestep scores for a long series: stride-1 windows, each window score
// assigned to its last timestep, leading timesteps backfilled.
std::vector<double> point_scores(const TrainedModel& tm,
                                 const std::vector<std::vector<double>>& series);

void save_trained(const TrainedModel& tm, const std::string& path);
TrainedModel load_trained(const std::string& path);

}  // namespace impact
