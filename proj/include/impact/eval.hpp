#pragma once

#include <optional>
#include <string>
#include <vector>

#include "impact/influence.hpp"
#include "impact/types.hpp"

namespace impact {

// Area under the ROC curve via the rank statistic, with midranks for ties.
// Throws if either class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct SeenUnseenAuc {
    double overall = 0.0;
    std::optional<double> seen;    // normals vs seen-class anomalies
    std::optional<double> unseen;  // normals vs unseen-class anomalies
};

SeenUnseenAuc seen_unseen_auc(const std::vector<double>& scores,
                              const std::vector<SeriesWindow>& windows,
                              const std::set<int>& seen_classes);

// KL divergence between diagonal Gaussians fitted to the two sample sets.
// Variances are floored at 1e-6; each set needs at least dim + 2 samples.
double gaussian_kld(const std::vector<std::vector<double>>& from_samples,
                    const std::vector<std::vector<double>>& to_samples);

struct DeconMetrics {
    int true_contaminants = 0;
    int flagged = 0;       // |D_con|: positive-influence members of d_n
    int flagged_true = 0;  // flagged samples that really are contaminants
    double precision = 0.0;
    double recall = 0.0;
    double mean_influence_contaminant = 0.0;
    double mean_influence_normal = 0.0;
};

DeconMetrics decon_metrics(const InfluenceReport& report);

struct EvalReport {
    SeenUnseenAuc auc;
    std::optional<DeconMetrics> decon;
    std::string setting;
    uint64_t seed = 0;
    std::string ablation = "none";

    std::string to_json() const;
    std::string to_csv_row() const;
    static std::string csv_header();
};

}  // namespace impact
