#pragma once

#include "impact/influence.hpp"

namespace impact {

// Pseudo unseen anomaly built in feature space: phi + alpha * direction,
// always labeled 1.
struct PerturbedFeature {
    int64_t source_id = 0;
    std::vector<double> values;
    int label = 1;
    double alpha = 0.0;
    double direction_norm_sq = 0.0;
};

// Relabel identified contaminated samples from 0 to 1. Provenance is kept
// so decontamination quality stays measurable.
std::vector<SeriesWindow> flip_labels(const std::vector<SeriesWindow>& d_con);

std::vector<PerturbedFeature> perturb_features(const ModelState& m,
                                               const std::vector<FeatureSample>& candidates,
                                               const STest& stest_head, double alpha,
                                               const LossConfig& cfg, Head head = Head::Seen);

// First-order predicted validation-risk deltas.
double predicted_risk_delta_flip(const InfluenceReport& report, int n_total);
double predicted_risk_delta_perturb(const std::vector<PerturbDirection>& directions,
                                    double alpha, int n_total);
double predicted_risk_delta_perturb(const std::vector<PerturbedFeature>& perturbed,
                                    double alpha, int n_total);

}  // namespace impact
