#pragma once

#include <functional>
#include <vector>

#include "impact/objective.hpp"

namespace impact {

enum class PartitionTag {
    Contaminated,
    Reference,
    Clean,
    PerturbCandidate,
    LabeledAnomaly,
};

std::string partition_name(PartitionTag tag);

struct InfluenceEntry {
    int64_t id = 0;
    double influence = 0.0;
    PartitionTag partition = PartitionTag::Clean;
    Provenance provenance = Provenance::Original;
};

struct InfluenceReport {
    std::vector<InfluenceEntry> entries;
    double stest_residual = 0.0;
    bool cg_converged = true;
    double damping = 0.0;
    int validation_size = 0;
    bool reference_shortfall = false;  // fewer than k negative-influence samples
};

struct InfluenceConfig {
    double damping = 0.01;
    double cg_tol = 1e-6;
    int cg_max_iter = 200;
    int hessian_sample_cap = 512;
    // Interpolates the label-1 validation gradient weight between natural
    // composition (0.0) and full class balance (1.0, anomalies weighted by
    // #normals/#anomalies). With a natural-composition validation set the
    // unanimous pull of the normal majority adds a label-aligned offset to
    // every influence score that can swamp the per-sample signal; balancing
    // removes that offset at the cost of more aggressive flagging.
    double validation_balance = 0.0;
};

struct CgResult {
    std::vector<double> x;
    double residual = 0.0;  // ||Ax - b|| / ||b||
    int iterations = 0;
    bool converged = false;
};

// Matrix-free conjugate gradient on Ax = b. Stops on NaN or loss of
// positive curvature, reporting the residual reached either way.
CgResult conjugate_gradient(const std::function<std::vector<double>(const std::vector<double>&)>& matvec,
                            const std::vector<double>& b, double tol, int max_iter);

// Generic damped inverse-HVP entry point (spec surface): solves
// (H + damping I) x = b with H the mean Hessian over hessian_samples.
CgResult inverse_hvp(const ModelState& m, const std::vector<SeriesWindow>& hessian_samples,
                     const std::vector<double>& b, const LossConfig& cfg,
                     const InfluenceConfig& icfg, Segment segment, Head head = Head::Seen);

// Cached s_test = (H + damping I)^-1 sum_{z_t in V} grad L(z_t), computed
// once per scoring pass and reused for every training sample.
struct STest {
    std::vector<double> v;
    double residual = 0.0;
    bool converged = false;
};

STest compute_stest(const ModelState& m, const std::vector<SeriesWindow>& hessian_samples,
                    const std::vector<SeriesWindow>& validation, const LossConfig& cfg,
                    const InfluenceConfig& icfg, Head head = Head::Seen);

// Head-segment variant over feature-space samples.
STest compute_stest_head(const ModelState& m, const std::vector<FeatureSample>& hessian_samples,
                         const std::vector<FeatureSample>& validation, const LossConfig& cfg,
                         const InfluenceConfig& icfg, Head head = Head::Seen);

// I_L(z_i) = -s_test . grad L(z_i); positive means discarding z_i would
// lower the validation risk.
double influence_score(const ModelState& m, const SeriesWindow& z, const LossConfig& cfg,
                       const STest& stest, Head head = Head::Seen);

// Influence of flipping the label of a sample whose influence is i_l.
inline double flip_influence(double i_l) { return -2.0 * i_l; }

// Partition rule over non-anomaly entries: positive influence is
// contaminated; the k most negative become references; the k least negative
// of the remaining negatives become perturbation candidates; everything else
// is clean. Boundary ties break by ascending id. Returns true when fewer
// than k negative entries were available for the reference set.
bool partition_entries(std::vector<InfluenceEntry>& entries, int k);

InfluenceReport batch_influence(const ModelState& m, const std::vector<SeriesWindow>& d_n,
                                const std::vector<SeriesWindow>& d_a,
                                const std::vector<SeriesWindow>& validation,
                                const LossConfig& cfg, const InfluenceConfig& icfg, int k);

struct PerturbDirection {
    int64_t id = 0;
    std::vector<double> direction;  // length feature_dim
    double norm_sq = 0.0;
    bool degenerate = false;
};

PerturbDirection perturb_direction(const ModelState& m, const FeatureSample& w,
                                   const STest& stest_head, const LossConfig& cfg,
                                   Head head = Head::Seen);

// ---------------------------------------------------------------------------
// Ground-truth retraining oracle on a ridge-regularized linear scorer in
// feature space. Used to validate the influence estimates.
// ---------------------------------------------------------------------------

struct LinearTrainSpec {
    int feature_dim = 4;
    int channels = 1;
    double ridge = 0.1;    // also the damping used by the matching influence
    double lr = 0.05;
    int iters = 2000;
    uint64_t seed = 0;
    LossConfig loss;
};

// theta layout: [W (r x d) | b (r)]
std::vector<double> linear_init(const LinearTrainSpec& spec);
std::vector<double> linear_scores(const LinearTrainSpec& spec, const std::vector<double>& theta,
                                  const std::vector<double>& phi);
double linear_loss(const LinearTrainSpec& spec, const std::vector<double>& theta,
                   const FeatureSample& w);
std::vector<double> linear_grad(const LinearTrainSpec& spec, const std::vector<double>& theta,
                                const FeatureSample& w);
double linear_risk(const LinearTrainSpec& spec, const std::vector<double>& theta,
                   const std::vector<FeatureSample>& samples);
// Full-batch GD on mean loss + ridge/2 ||theta||^2, from linear_init.
std::vector<double> linear_train(const LinearTrainSpec& spec,
                                 const std::vector<FeatureSample>& dataset);
// Influence of z_i on validation risk for the ridge linear model, where the
// damped Hessian is ridge * I almost everywhere.
double linear_influence(const LinearTrainSpec& spec, const std::vector<double>& theta,
                        const std::vector<FeatureSample>& dataset_sample,
                        const std::vector<FeatureSample>& validation);

enum class LooMode { Discard, Flip };

// Retrains with the target sample discarded or label-flipped and returns the
// actual validation-risk delta versus the baseline run.
double loo_oracle(const LinearTrainSpec& spec, const std::vector<FeatureSample>& dataset,
                  int64_t target_id, const std::vector<FeatureSample>& validation,
                  LooMode mode);

}  // namespace impact
