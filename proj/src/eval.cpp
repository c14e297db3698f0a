#include "impact/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace impact {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels differ in length");
    size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
        n_pos += static_cast<size_t>(y);
    }
    size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUC needs both a positive and a negative sample");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups, then the Mann-Whitney identity.
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (size_t k = 0; k < n; ++k)
        if (labels[k] == 1) rank_sum_pos += rank[k];
    double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

SeenUnseenAuc seen_unseen_auc(const std::vector<double>& scores,
                              const std::vector<SeriesWindow>& windows,
                              const std::set<int>& seen_classes) {
    if (scores.size() != windows.size())
        throw std::invalid_argument("scores and windows differ in length");
    std::vector<double> s_all, s_seen, s_unseen;
    std::vector<int> y_all, y_seen, y_unseen;
    for (size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        s_all.push_back(scores[i]);
        y_all.push_back(w.label);
        if (w.label == 0) {
            s_seen.push_back(scores[i]);
            y_seen.push_back(0);
            s_unseen.push_back(scores[i]);
            y_unseen.push_back(0);
        } else {
            bool seen = w.class_id && seen_classes.count(*w.class_id) > 0;
            if (seen) {
                s_seen.push_back(scores[i]);
                y_seen.push_back(1);
            } else {
                s_unseen.push_back(scores[i]);
                y_unseen.push_back(1);
            }
        }
    }
    SeenUnseenAuc out;
    out.overall = auc(s_all, y_all);
    if (std::count(y_seen.begin(), y_seen.end(), 1) > 0) out.seen = auc(s_seen, y_seen);
    if (std::count(y_unseen.begin(), y_unseen.end(), 1) > 0) out.unseen = auc(s_unseen, y_unseen);
    return out;
}

double gaussian_kld(const std::vector<std::vector<double>>& from_samples,
                    const std::vector<std::vector<double>>& to_samples) {
    if (from_samples.empty() || to_samples.empty())
        throw std::invalid_argument("empty sample set");
    size_t d = from_samples.front().size();
    if (d == 0) throw std::invalid_argument("zero-dimensional samples");
    if (from_samples.size() < d + 2 || to_samples.size() < d + 2)
        throw std::invalid_argument("need at least dim + 2 samples per set, got " +
                                    std::to_string(from_samples.size()) + " and " +
                                    std::to_string(to_samples.size()) + " for dim " +
                                    std::to_string(d));
    auto fit = [d](const std::vector<std::vector<double>>& xs) {
        std::vector<double> mu(d, 0.0), var(d, 0.0);
        for (const auto& x : xs) {
            if (x.size() != d) throw std::invalid_argument("inconsistent sample dimension");
            for (size_t j = 0; j < d; ++j) mu[j] += x[j];
        }
        for (size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(xs.size());
        for (const auto& x : xs)
            for (size_t j = 0; j < d; ++j) var[j] += (x[j] - mu[j]) * (x[j] - mu[j]);
        for (size_t j = 0; j < d; ++j)
            var[j] = std::max(var[j] / (static_cast<double>(xs.size()) - 1.0), 1e-6);
        return std::pair(mu, var);
    };
    auto [mu_p, var_p] = fit(from_samples);
    auto [mu_q, var_q] = fit(to_samples);
    double kl = 0.0;
    for (size_t j = 0; j < d; ++j) {
        double dm = mu_p[j] - mu_q[j];
        kl += 0.5 * (std::log(var_q[j] / var_p[j]) + (var_p[j] + dm * dm) / var_q[j] - 1.0);
    }
    return kl;
}

DeconMetrics decon_metrics(const InfluenceReport& report) {
    DeconMetrics m;
    double sum_con = 0.0, sum_norm = 0.0;
    int n_con = 0, n_norm = 0;
    for (const auto& e : report.entries) {
        if (e.partition == PartitionTag::LabeledAnomaly) continue;
        bool truly = e.provenance == Provenance::InjectedContaminant;
        bool flagged = e.partition == PartitionTag::Contaminated;
        if (truly) {
            ++m.true_contaminants;
            sum_con += e.influence;
            ++n_con;
        } else {
            sum_norm += e.influence;
            ++n_norm;
        }
        if (flagged) {
            ++m.flagged;
            if (truly) ++m.flagged_true;
        }
    }
    m.precision = m.flagged > 0 ? static_cast<double>(m.flagged_true) / m.flagged : 0.0;
    m.recall = m.true_contaminants > 0
                   ? static_cast<double>(m.flagged_true) / m.true_contaminants
                   : 0.0;
    m.mean_influence_contaminant = n_con > 0 ? sum_con / n_con : 0.0;
    m.mean_influence_normal = n_norm > 0 ? sum_norm / n_norm : 0.0;
    return m;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["auc"]["overall"] = auc.overall;
    if (auc.seen) j["auc"]["seen"] = *auc.seen;
    if (auc.unseen) j["auc"]["unseen"] = *auc.unseen;
    if (decon) {
        nlohmann::json d;
        d["true_contaminants"] = decon->true_contaminants;
        d["flagged"] = decon->flagged;
        d["flagged_true"] = decon->flagged_true;
        d["precision"] = decon->precision;
        d["recall"] = decon->recall;
        d["mean_influence_contaminant"] = decon->mean_influence_contaminant;
        d["mean_influence_normal"] = decon->mean_influence_normal;
        j["decontamination"] = d;
    }
    j["setting"] = setting;
    j["seed"] = seed;
    j["ablation"] = ablation;
    return j.dump(2);
}

std::string EvalReport::csv_header() {
    return "setting,seed,ablation,auc_overall,auc_seen,auc_unseen,decon_precision,decon_recall";
}

std::string EvalReport::to_csv_row() const {
    std::ostringstream ss;
    ss << setting << ',' << seed << ',' << ablation << ',' << auc.overall << ',';
    if (auc.seen) ss << *auc.seen;
    ss << ',';
    if (auc.unseen) ss << *auc.unseen;
    ss << ',';
    if (decon) ss << decon->precision;
    ss << ',';
    if (decon) ss << decon->recall;
    return ss.str();
}

}  // namespace impact
