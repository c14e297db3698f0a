#include "impact/influence.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace impact {

std::string partition_name(PartitionTag tag) {
    switch (tag) {
        case PartitionTag::Contaminated: return "contaminated";
        case PartitionTag::Reference: return "reference";
        case PartitionTag::Clean: return "clean";
        case PartitionTag::PerturbCandidate: return "perturb_candidate";
        case PartitionTag::LabeledAnomaly: return "labeled_anomaly";
    }
    return "unknown";
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

CgResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& matvec,
    const std::vector<double>& b, double tol, int max_iter) {
    if (tol <= 0.0) throw std::invalid_argument("cg tolerance must be positive");
    const size_t n = b.size();
    CgResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm(b);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    std::vector<double> r = b;  // r = b - A*0
    std::vector<double> p = b;
    double rr = dot(r, r);
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> ap = matvec(p);
        for (double v : ap)
            if (!std::isfinite(v)) throw std::runtime_error("NaN during conjugate gradient");
        const double pap = dot(p, ap);
        if (pap <= 0.0) break;  // lost positive curvature; keep current iterate
        const double alpha = rr / pap;
        for (size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res.iterations = it + 1;
        const double rr_new = dot(r, r);
        if (std::sqrt(rr_new) / bnorm <= tol) {
            rr = rr_new;
            break;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    res.residual = std::sqrt(rr) / bnorm;
    res.converged = res.residual <= tol;
    return res;
}

CgResult inverse_hvp(const ModelState& m, const std::vector<SeriesWindow>& hessian_samples,
                     const std::vector<double>& b, const LossConfig& cfg,
                     const InfluenceConfig& icfg, Segment segment, Head head) {
    auto matvec = [&](const std::vector<double>& v) {
        return hvp(m, hessian_samples, v, cfg, icfg.damping, segment, head);
    };
    return conjugate_gradient(matvec, b, icfg.cg_tol, icfg.cg_max_iter);
}

namespace {

template <typename Sample>
std::vector<const Sample*> cap_subsample(const std::vector<Sample>& samples, int cap) {
    std::vector<const Sample*> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(&s);
    if (cap > 0 && static_cast<int>(out.size()) > cap) out.resize(cap);
    return out;
}

}  // namespace

STest compute_stest(const ModelState& m, const std::vector<SeriesWindow>& hessian_samples,
                    const std::vector<SeriesWindow>& validation, const LossConfig& cfg,
                    const InfluenceConfig& icfg, Head head) {
    if (validation.empty()) throw std::invalid_argument("influence scoring needs a validation set");
    const int n = m.arch.extractor_params() + m.arch.head_params();
    double w1 = 1.0;
    if (icfg.validation_balance > 0.0) {
        int n0 = 0, n1 = 0;
        for (const auto& z : validation) (z.label == 0 ? n0 : n1)++;
        if (n0 > 0 && n1 > 0)
            w1 = 1.0 + icfg.validation_balance * (static_cast<double>(n0) / n1 - 1.0);
    }
    std::vector<double> b(n, 0.0);
    for (const auto& z : validation) {
        auto g = grad_params(m, z, cfg, Segment::All, head);
        const double w = z.label == 0 ? 1.0 : w1;
        for (int i = 0; i < n; ++i) b[i] += w * g[i];
    }
    std::vector<SeriesWindow> hess(hessian_samples);
    if (icfg.hessian_sample_cap > 0 &&
        static_cast<int>(hess.size()) > icfg.hessian_sample_cap)
        hess.resize(icfg.hessian_sample_cap);
    auto cg = inverse_hvp(m, hess, b, cfg, icfg, Segment::All, head);
    return {std::move(cg.x), cg.residual, cg.converged};
}

STest compute_stest_head(const ModelState& m, const std::vector<FeatureSample>& hessian_samples,
                         const std::vector<FeatureSample>& validation, const LossConfig& cfg,
                         const InfluenceConfig& icfg, Head head) {
    if (validation.empty()) throw std::invalid_argument("influence scoring needs a validation set");
    const int n = m.arch.head_params();
    double w1 = 1.0;
    if (icfg.validation_balance > 0.0) {
        int n0 = 0, n1 = 0;
        for (const auto& w : validation) (w.label == 0 ? n0 : n1)++;
        if (n0 > 0 && n1 > 0)
            w1 = 1.0 + icfg.validation_balance * (static_cast<double>(n0) / n1 - 1.0);
    }
    std::vector<double> b(n, 0.0);
    for (const auto& w : validation) {
        auto g = grad_head_params(m, w, cfg, head);
        const double wt = w.label == 0 ? 1.0 : w1;
        for (int i = 0; i < n; ++i) b[i] += wt * g[i];
    }
    std::vector<FeatureSample> hess(hessian_samples);
    if (icfg.hessian_sample_cap > 0 &&
        static_cast<int>(hess.size()) > icfg.hessian_sample_cap)
        hess.resize(icfg.hessian_sample_cap);
    auto matvec = [&](const std::vector<double>& v) {
        return hvp_head(m, hess, v, cfg, icfg.damping, head);
    };
    auto cg = conjugate_gradient(matvec, b, icfg.cg_tol, icfg.cg_max_iter);
    return {std::move(cg.x), cg.residual, cg.converged};
}

double influence_score(const ModelState& m, const SeriesWindow& z, const LossConfig& cfg,
                       const STest& stest, Head head) {
    if (stest.v.empty()) throw std::invalid_argument("influence_score requires a computed s_test");
    auto g = grad_params(m, z, cfg, Segment::All, head);
    return -dot(stest.v, g);
}

InfluenceReport batch_influence(const ModelState& m, const std::vector<SeriesWindow>& d_n,
                                const std::vector<SeriesWindow>& d_a,
                                const std::vector<SeriesWindow>& validation,
                                const LossConfig& cfg, const InfluenceConfig& icfg, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    auto stest = compute_stest(m, validation, validation, cfg, icfg);

    InfluenceReport report;
    report.stest_residual = stest.residual;
    report.cg_converged = stest.converged;
    report.damping = icfg.damping;
    report.validation_size = static_cast<int>(validation.size());

    for (const auto& z : d_n) {
        InfluenceEntry e;
        e.id = z.id;
        e.influence = influence_score(m, z, cfg, stest);
        e.provenance = z.provenance;
        e.partition = e.influence > 0.0 ? PartitionTag::Contaminated : PartitionTag::Clean;
        report.entries.push_back(e);
    }
    for (const auto& z : d_a) {
        InfluenceEntry e;
        e.id = z.id;
        e.influence = influence_score(m, z, cfg, stest);
        e.provenance = z.provenance;
        e.partition = PartitionTag::LabeledAnomaly;
        report.entries.push_back(e);
    }
    report.reference_shortfall = partition_entries(report.entries, k);
    return report;
}

bool partition_entries(std::vector<InfluenceEntry>& entries, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    std::vector<InfluenceEntry*> negatives;
    for (auto& e : entries) {
        if (e.partition == PartitionTag::LabeledAnomaly) continue;
        e.partition = e.influence > 0.0 ? PartitionTag::Contaminated : PartitionTag::Clean;
        if (e.influence < 0.0) negatives.push_back(&e);
    }
    auto by_influence_then_id = [](const InfluenceEntry* a, const InfluenceEntry* b) {
        if (a->influence != b->influence) return a->influence < b->influence;
        return a->id < b->id;
    };
    std::sort(negatives.begin(), negatives.end(), by_influence_then_id);

    const int n_ref = std::min<int>(k, static_cast<int>(negatives.size()));
    for (int i = 0; i < n_ref; ++i) negatives[i]->partition = PartitionTag::Reference;
    // Perturb candidates: the least negative among the rest.
    const int remaining = static_cast<int>(negatives.size()) - n_ref;
    const int n_per = std::min(k, remaining);
    for (int i = 0; i < n_per; ++i)
        negatives[negatives.size() - 1 - i]->partition = PartitionTag::PerturbCandidate;
    return n_ref < k;
}

PerturbDirection perturb_direction(const ModelState& m, const FeatureSample& w,
                                   const STest& stest_head, const LossConfig& cfg, Head head) {
    if (w.label != 0) throw std::invalid_argument("perturbation candidates must be labeled normal");
    const int nh = m.arch.head_params();
    const int d = m.arch.feature_dim;
    if (static_cast<int>(stest_head.v.size()) != nh)
        throw std::invalid_argument("s_test length does not match head segment");

    auto cross = grad_feat_cross(m, w, cfg, head);  // [nh x d]
    PerturbDirection out;
    out.id = w.id;
    out.direction.assign(d, 0.0);
    for (int i = 0; i < nh; ++i) {
        const double s = stest_head.v[i];
        if (s == 0.0) continue;
        const double* row = cross.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) out.direction[j] -= s * row[j];
    }
    out.norm_sq = dot(out.direction, out.direction);
    out.degenerate = out.norm_sq < 1e-20;
    return out;
}

// ---------------------------------------------------------------------------
// Linear retraining oracle
// ---------------------------------------------------------------------------

std::vector<double> linear_init(const LinearTrainSpec& spec) {
    std::vector<double> theta(static_cast<size_t>(spec.channels) * spec.feature_dim +
                              spec.channels);
    std::mt19937_64 rng(spec.seed ^ 0x51ed2701ULL);
    std::normal_distribution<double> normal(0.0, 0.1);
    for (auto& t : theta) t = normal(rng);
    return theta;
}

std::vector<double> linear_scores(const LinearTrainSpec& spec, const std::vector<double>& theta,
                                  const std::vector<double>& phi) {
    const int d = spec.feature_dim;
    std::vector<double> s(spec.channels);
    for (int q = 0; q < spec.channels; ++q) {
        double a = theta[static_cast<size_t>(spec.channels) * d + q];
        const double* w = theta.data() + static_cast<size_t>(q) * d;
        for (int i = 0; i < d; ++i) a += w[i] * phi[i];
        s[q] = a;
    }
    return s;
}

double linear_loss(const LinearTrainSpec& spec, const std::vector<double>& theta,
                   const FeatureSample& w) {
    auto s = linear_scores(spec, theta, w.values);
    return deviation_loss(s, w.label, spec.loss);
}

std::vector<double> linear_grad(const LinearTrainSpec& spec, const std::vector<double>& theta,
                                const FeatureSample& w) {
    auto s = linear_scores(spec, theta, w.values);
    std::vector<double> gs;
    deviation_loss_score_grad(s, w.label, spec.loss, gs);
    const int d = spec.feature_dim;
    std::vector<double> g(theta.size(), 0.0);
    for (int q = 0; q < spec.channels; ++q) {
        if (gs[q] == 0.0) continue;
        double* gw = g.data() + static_cast<size_t>(q) * d;
        for (int i = 0; i < d; ++i) gw[i] += gs[q] * w.values[i];
        g[static_cast<size_t>(spec.channels) * d + q] += gs[q];
    }
    return g;
}

double linear_risk(const LinearTrainSpec& spec, const std::vector<double>& theta,
                   const std::vector<FeatureSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("risk over empty sample set");
    double total = 0.0;
    for (const auto& w : samples) total += linear_loss(spec, theta, w);
    return total / samples.size();
}

std::vector<double> linear_train(const LinearTrainSpec& spec,
                                 const std::vector<FeatureSample>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("empty training set");
    auto theta = linear_init(spec);
    const double inv_n = 1.0 / dataset.size();
    // The objective is nonsmooth, so a fixed-step subgradient method orbits
    // the optimum instead of settling on it. Average the final quarter of the
    // iterates, which converges where the last iterate merely oscillates.
    const int tail_start = spec.iters - std::max(1, spec.iters / 4);
    std::vector<double> tail_sum(theta.size(), 0.0);
    int tail_count = 0;
    for (int it = 0; it < spec.iters; ++it) {
        std::vector<double> g(theta.size(), 0.0);
        for (const auto& w : dataset) {
            auto gi = linear_grad(spec, theta, w);
            for (size_t i = 0; i < g.size(); ++i) g[i] += gi[i] * inv_n;
        }
        for (size_t i = 0; i < theta.size(); ++i) {
            g[i] += spec.ridge * theta[i];
            theta[i] -= spec.lr * g[i];
            if (!std::isfinite(theta[i])) throw std::runtime_error("non-convergent retrain (NaN)");
        }
        if (it >= tail_start) {
            for (size_t i = 0; i < theta.size(); ++i) tail_sum[i] += theta[i];
            ++tail_count;
        }
    }
    for (size_t i = 0; i < theta.size(); ++i) theta[i] = tail_sum[i] / tail_count;
    return theta;
}

double linear_influence(const LinearTrainSpec& spec, const std::vector<double>& theta,
                        const std::vector<FeatureSample>& dataset_sample,
                        const std::vector<FeatureSample>& validation) {
    // Damped Hessian of the ridge objective is ridge * I almost everywhere
    // (the deviation loss is piecewise linear in a linear model's scores).
    std::vector<double> gv(theta.size(), 0.0);
    for (const auto& w : validation) {
        auto g = linear_grad(spec, theta, w);
        for (size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
    double total = 0.0;
    for (const auto& w : dataset_sample) {
        auto g = linear_grad(spec, theta, w);
        for (size_t i = 0; i < g.size(); ++i) total -= gv[i] * g[i];
    }
    return total / spec.ridge;
}

double loo_oracle(const LinearTrainSpec& spec, const std::vector<FeatureSample>& dataset,
                  int64_t target_id, const std::vector<FeatureSample>& validation,
                  LooMode mode) {
    if (dataset.size() > 500 || spec.feature_dim * spec.channels > 1000)
        throw std::invalid_argument("loo_oracle fixture is limited to small problems");
    auto baseline = linear_train(spec, dataset);
    const double base_risk = linear_risk(spec, baseline, validation);

    std::vector<FeatureSample> variant;
    bool found = false;
    for (const auto& w : dataset) {
        if (w.id == target_id) {
            found = true;
            if (mode == LooMode::Discard) continue;
            FeatureSample flipped = w;
            flipped.label = 1 - flipped.label;
            variant.push_back(flipped);
            continue;
        }
        variant.push_back(w);
    }
    if (!found) throw std::invalid_argument("target id not in dataset");
    auto retrained = linear_train(spec, variant);
    return linear_risk(spec, retrained, validation) - base_risk;
}

}  // namespace impact
