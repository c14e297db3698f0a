#include "impact/radg.hpp"

#include <stdexcept>

namespace impact {

std::vector<SeriesWindow> flip_labels(const std::vector<SeriesWindow>& d_con) {
    std::vector<SeriesWindow> flipped;
    flipped.reserve(d_con.size());
    for (const auto& z : d_con) {
        if (z.label != 0)
            throw std::invalid_argument("flip_labels input must be labeled 0 (no double flips)");
        SeriesWindow f = z;
        f.label = 1;
        flipped.push_back(std::move(f));
    }
    return flipped;
}

std::vector<PerturbedFeature> perturb_features(const ModelState& m,
                                               const std::vector<FeatureSample>& candidates,
                                               const STest& stest_head, double alpha,
                                               const LossConfig& cfg, Head head) {
    if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    std::vector<PerturbedFeature> out;
    for (const auto& w : candidates) {
        auto dir = perturb_direction(m, w, stest_head, cfg, head);
        if (dir.degenerate) continue;  // zero direction carries no risk signal
        PerturbedFeature pf;
        pf.source_id = w.id;
        pf.alpha = alpha;
        pf.direction_norm_sq = dir.norm_sq;
        pf.values = w.values;
        for (size_t j = 0; j < pf.values.size(); ++j) pf.values[j] += alpha * dir.direction[j];
        out.push_back(std::move(pf));
    }
    return out;
}

double predicted_risk_delta_flip(const InfluenceReport& report, int n_total) {
    double sum = 0.0;
    int n_con = 0;
    for (const auto& e : report.entries) {
        if (e.partition == PartitionTag::Contaminated) {
            sum += e.influence;
            ++n_con;
        }
    }
    if (n_con == 0) return 0.0;
    return -2.0 * sum / (static_cast<double>(n_total) * n_con);
}

double predicted_risk_delta_perturb(const std::vector<PerturbDirection>& directions,
                                    double alpha, int n_total) {
    if (directions.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& d : directions) sum += d.norm_sq;
    return -alpha * sum / (static_cast<double>(n_total) * directions.size());
}

double predicted_risk_delta_perturb(const std::vector<PerturbedFeature>& perturbed,
                                    double alpha, int n_total) {
    if (perturbed.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& p : perturbed) sum += p.direction_norm_sq;
    return -alpha * sum / (static_cast<double>(n_total) * perturbed.size());
}

}  // namespace impact
