#include "impact/objective.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace impact {

PriorStats prior_stats(int r, int l, double sigma, uint64_t seed) {
    if (l < 100) throw std::invalid_argument("prior sample count must be >= 100");
    if (sigma <= 0.0) throw std::invalid_argument("prior sigma must be positive");
    PriorStats ps;
    ps.sample_count = l;
    ps.source_sigma = sigma;
    ps.mu.assign(r, 0.0);
    ps.sigma.assign(r, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (int q = 0; q < r; ++q) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < l; ++i) {
            const double s = normal(rng);
            sum += s;
            sumsq += s * s;
        }
        const double mean = sum / l;
        ps.mu[q] = mean;
        ps.sigma[q] = std::sqrt((sumsq - l * mean * mean) / (l - 1));
    }
    return ps;
}

LossConfig default_loss_config(int r, uint64_t prior_seed) {
    LossConfig cfg;
    cfg.channels = r;
    cfg.prior = prior_stats(r, 5000, 1.0, prior_seed);
    return cfg;
}

std::vector<double> deviation(const std::vector<double>& scores, const PriorStats& prior,
                              bool signed_dev) {
    if (scores.size() != prior.mu.size())
        throw std::invalid_argument("score / prior length mismatch");
    std::vector<double> dev(scores.size());
    for (size_t q = 0; q < scores.size(); ++q) {
        const double z = (scores[q] - prior.mu[q]) / prior.sigma[q];
        dev[q] = signed_dev ? z : std::abs(z);
    }
    return dev;
}

double gaussian_entropy(int r, double sigma_sq) {
    if (sigma_sq <= 0.0) throw std::invalid_argument("sigma^2 must be positive");
    return 0.5 * r * (1.0 + std::log(2.0 * std::numbers::pi * sigma_sq));
}

double sample_loss(const ModelState& m, const SeriesWindow& z, const LossConfig& cfg,
                   Head head) {
    return loss_grad_t<double>(m.arch, m.phi_params(), m.head_params(head), z, z.label, cfg,
                               nullptr, nullptr);
}

double head_sample_loss(const ModelState& m, const FeatureSample& w, const LossConfig& cfg,
                        Head head) {
    std::span<const double> hp = m.head_params(head);
    return head_loss_grad_t<double>(m.arch, hp, w.values, w.label, cfg, nullptr);
}

double risk(const ModelState& m, const std::vector<SeriesWindow>& samples,
            const LossConfig& cfg, Head head) {
    if (samples.empty()) throw std::invalid_argument("risk over empty sample set");
    double total = 0.0;
    for (const auto& z : samples) total += sample_loss(m, z, cfg, head);
    return total / samples.size();
}

double head_risk(const ModelState& m, const std::vector<FeatureSample>& samples,
                 const LossConfig& cfg, Head head) {
    if (samples.empty()) throw std::invalid_argument("risk over empty sample set");
    double total = 0.0;
    for (const auto& w : samples) total += head_sample_loss(m, w, cfg, head);
    return total / samples.size();
}

std::vector<double> grad_params(const ModelState& m, const SeriesWindow& z,
                                const LossConfig& cfg, Segment segment, Head head) {
    const int np = m.arch.extractor_params();
    const int nh = m.arch.head_params();
    if (segment == Segment::All) {
        std::vector<double> g(static_cast<size_t>(np) + nh, 0.0);
        loss_grad_t<double>(m.arch, m.phi_params(), m.head_params(head), z, z.label, cfg,
                            g.data(), g.data() + np);
        return g;
    }
    std::vector<double> g(nh, 0.0);
    loss_grad_t<double>(m.arch, m.phi_params(), m.head_params(head), z, z.label, cfg, nullptr,
                        g.data());
    return g;
}

std::vector<double> grad_head_params(const ModelState& m, const FeatureSample& w,
                                     const LossConfig& cfg, Head head) {
    std::vector<double> g(m.arch.head_params(), 0.0);
    std::span<const double> hp = m.head_params(head);
    head_loss_grad_t<double>(m.arch, hp, w.values, w.label, cfg, g.data());
    return g;
}

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("non-finite ") + what +
                                     " (try lowering learning rate or raising damping)");
}

}  // namespace

std::vector<double> hvp(const ModelState& m, const std::vector<SeriesWindow>& samples,
                        const std::vector<double>& v, const LossConfig& cfg, double damping,
                        Segment segment, Head head) {
    const int np = m.arch.extractor_params();
    const int nh = m.arch.head_params();
    const int n = segment == Segment::All ? np + nh : nh;
    if (static_cast<int>(v.size()) != n)
        throw std::invalid_argument("hvp vector length does not match segment");
    if (samples.empty()) throw std::invalid_argument("hvp over empty sample set");

    // Seed parameters of the differentiated segment with the tangent v.
    std::vector<Dual> phi(np), hp(nh);
    auto phi_src = m.phi_params();
    auto head_src = m.head_params(head);
    for (int i = 0; i < np; ++i)
        phi[i] = {phi_src[i], segment == Segment::All ? v[i] : 0.0};
    const int hoff = segment == Segment::All ? np : 0;
    for (int i = 0; i < nh; ++i) hp[i] = {head_src[i], v[hoff + i]};

    std::vector<Dual> g(n, Dual{});
    Dual* gphi = segment == Segment::All ? g.data() : nullptr;
    Dual* ghead = segment == Segment::All ? g.data() + np : g.data();
    for (const auto& z : samples)
        loss_grad_t<Dual>(m.arch, std::span<const Dual>(phi), std::span<const Dual>(hp), z,
                          z.label, cfg, gphi, ghead);

    std::vector<double> out(n);
    const double inv = 1.0 / samples.size();
    for (int i = 0; i < n; ++i) out[i] = g[i].d * inv + damping * v[i];
    check_finite(out, "hessian-vector product");
    return out;
}

std::vector<double> hvp_head(const ModelState& m, const std::vector<FeatureSample>& samples,
                             const std::vector<double>& v, const LossConfig& cfg,
                             double damping, Head head) {
    const int nh = m.arch.head_params();
    if (static_cast<int>(v.size()) != nh)
        throw std::invalid_argument("hvp vector length does not match head segment");
    if (samples.empty()) throw std::invalid_argument("hvp over empty sample set");

    std::vector<Dual> hp(nh);
    auto head_src = m.head_params(head);
    for (int i = 0; i < nh; ++i) hp[i] = {head_src[i], v[i]};

    std::vector<Dual> g(nh, Dual{});
    std::vector<Dual> feat;
    for (const auto& w : samples) {
        feat.assign(w.values.begin(), w.values.end());
        head_loss_grad_t<Dual>(m.arch, std::span<const Dual>(hp), feat, w.label, cfg, g.data());
    }
    std::vector<double> out(nh);
    const double inv = 1.0 / samples.size();
    for (int i = 0; i < nh; ++i) out[i] = g[i].d * inv + damping * v[i];
    check_finite(out, "hessian-vector product");
    return out;
}

std::vector<double> grad_feat_cross(const ModelState& m, const FeatureSample& w,
                                    const LossConfig& cfg, Head head) {
    const int nh = m.arch.head_params();
    const int d = m.arch.feature_dim;
    std::vector<double> cross(static_cast<size_t>(nh) * d, 0.0);

    std::vector<Dual> hp(nh);
    auto head_src = m.head_params(head);
    for (int i = 0; i < nh; ++i) hp[i] = {head_src[i], 0.0};

    std::vector<Dual> feat(w.values.begin(), w.values.end());
    std::vector<Dual> g(nh);
    for (int j = 0; j < d; ++j) {
        feat[j].d = 1.0;
        std::fill(g.begin(), g.end(), Dual{});
        head_loss_grad_t<Dual>(m.arch, std::span<const Dual>(hp), feat, w.label, cfg, g.data());
        for (int i = 0; i < nh; ++i) cross[static_cast<size_t>(i) * d + j] = g[i].d;
        feat[j].d = 0.0;
    }
    return cross;
}

}  // namespace impact
