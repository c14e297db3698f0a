#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "impact/objective.hpp"

using namespace impact;

namespace {

Arch tiny_arch() {
    Arch a;
    a.input_dims = 1;
    a.window_len = 16;
    a.hidden_width = 6;
    a.feature_dim = 5;
    a.head_hidden = 4;
    a.channels = 3;
    a.dilations = {1, 2};
    return a;
}

SeriesWindow random_window(const Arch& a, uint64_t seed, int label = 0) {
    SeriesWindow w;
    w.dims = a.input_dims;
    w.length = a.window_len;
    w.label = label;
    w.values.resize(static_cast<size_t>(a.input_dims) * a.window_len);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : w.values) v = nd(rng);
    return w;
}

LossConfig unit_loss(int r) {
    LossConfig cfg;
    cfg.channels = r;
    cfg.prior.mu.assign(r, 0.0);
    cfg.prior.sigma.assign(r, 1.0);
    cfg.prior.sample_count = r;
    return cfg;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& f) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - f[i]));
        den = std::max(den, std::abs(a[i]));
    }
    return num / (den + 1e-12);
}

}  // namespace

TEST_CASE("prior statistics are deterministic and near the source Gaussian") {
    auto p1 = prior_stats(3, 5000, 1.0, 1234);
    auto p2 = prior_stats(3, 5000, 1.0, 1234);
    CHECK(p1.mu == p2.mu);
    CHECK(p1.sigma == p2.sigma);
    CHECK(p1.sample_count == 5000);
    for (int q = 0; q < 3; ++q) {
        CHECK(std::abs(p1.mu[q]) < 0.1);
        CHECK(p1.sigma[q] == doctest::Approx(1.0).epsilon(0.1));
        CHECK(p1.sigma[q] > 0.0);
    }
    CHECK_THROWS_AS(prior_stats(3, 50, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(prior_stats(3, 5000, 0.0, 0), std::invalid_argument);
}

TEST_CASE("per-channel deviation is the absolute z-score") {
    PriorStats prior;
    prior.mu = {0.0, 1.0};
    prior.sigma = {1.0, 2.0};
    auto dev = deviation({2.0, 0.0}, prior);
    CHECK(dev[0] == doctest::Approx(2.0));
    CHECK(dev[1] == doctest::Approx(0.5));
    auto sdev = deviation({2.0, 0.0}, prior, true);
    CHECK(sdev[1] == doctest::Approx(-0.5));
}

TEST_CASE("deviation norm equals the Mahalanobis distance to the prior") {
    PriorStats prior;
    prior.mu = {0.3, -1.0, 2.0};
    prior.sigma = {0.5, 1.5, 2.0};
    std::vector<double> s{1.0, 0.25, -0.75};
    auto dev = deviation(s, prior);
    double norm_sq = 0.0;
    for (double d : dev) norm_sq += d * d;
    double maha_sq = 0.0;
    for (int q = 0; q < 3; ++q) {
        const double z = s[q] - prior.mu[q];
        maha_sq += z * z / (prior.sigma[q] * prior.sigma[q]);
    }
    CHECK(std::sqrt(norm_sq) == doctest::Approx(std::sqrt(maha_sq)).epsilon(1e-12));
}

TEST_CASE("loss averages deviations for normals and margin hinges for anomalies") {
    LossConfig cfg = unit_loss(2);
    cfg.margin = 5.0;
    std::vector<double> scores{2.0, -6.0};  // devs 2 and 6
    CHECK(deviation_loss(scores, 0, cfg) == doctest::Approx(4.0));        // (2+6)/2
    CHECK(deviation_loss(scores, 1, cfg) == doctest::Approx(1.5));        // (3+0)/2
    std::vector<double> at_margin{5.0, 5.0};
    CHECK(deviation_loss(at_margin, 1, cfg) == doctest::Approx(0.0));     // hinge closed
}

TEST_CASE("closed-form Gaussian entropy matches a Monte Carlo estimate") {
    std::mt19937_64 rng(99);
    for (double sigma_sq : {0.5, 1.0, 2.0}) {
        for (int r : {1, 2, 4}) {
            const double closed = gaussian_entropy(r, sigma_sq);
            CHECK(closed ==
                  doctest::Approx(0.5 * r * (1.0 + std::log(2.0 * std::numbers::pi * sigma_sq)))
                      .epsilon(1e-12));
            // MC: E[-log p(x)] over samples from the isotropic Gaussian.
            std::normal_distribution<double> nd(0.0, std::sqrt(sigma_sq));
            const int n = 200000;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                double logp = 0.0;
                for (int q = 0; q < r; ++q) {
                    const double x = nd(rng);
                    logp += -0.5 * std::log(2.0 * std::numbers::pi * sigma_sq) -
                            x * x / (2.0 * sigma_sq);
                }
                acc += -logp;
            }
            CHECK(acc / n == doctest::Approx(closed).epsilon(0.02));
        }
    }
}

TEST_CASE("score gradient matches finite differences away from kinks") {
    LossConfig cfg = unit_loss(3);
    std::vector<double> scores{1.7, -2.3, 0.4};
    for (int y : {0, 1}) {
        std::vector<double> g;
        deviation_loss_score_grad(scores, y, cfg, g);
        for (int q = 0; q < 3; ++q) {
            const double eps = 1e-7;
            auto sp = scores, sm = scores;
            sp[q] += eps;
            sm[q] -= eps;
            const double fd = (deviation_loss(sp, y, cfg) - deviation_loss(sm, y, cfg)) / (2 * eps);
            CHECK(g[q] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("subgradient conventions: zero at both kinks") {
    LossConfig cfg = unit_loss(2);
    cfg.margin = 5.0;
    std::vector<double> g;
    deviation_loss_score_grad({0.0, 1.0}, 0, cfg, g);  // score at prior mean
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(0.5));
    deviation_loss_score_grad({5.0, 1.0}, 1, cfg, g);  // deviation exactly at margin
    CHECK(g[0] == 0.0);
}

TEST_CASE("parameter gradient matches finite differences of the loss") {
    Arch a = tiny_arch();
    auto m = init_model(a, 31);
    LossConfig cfg = unit_loss(a.channels);
    std::mt19937_64 rng(32);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        auto w = random_window(a, 100 + trial, trial % 2);
        for (Head head : {Head::Seen, Head::Unseen}) {
            auto g = grad_params(m, w, cfg, Segment::All, head);
            const int n = static_cast<int>(g.size());
            REQUIRE(n == a.extractor_params() + a.head_params());
            std::vector<double> fd(n);
            const double eps = 1e-6;
            for (int i = 0; i < n; ++i) {
                ModelState mp = m, mm = m;
                const int idx = i < a.extractor_params()
                                    ? i
                                    : m.head_offset(head) + (i - a.extractor_params());
                mp.params[idx] += eps;
                mm.params[idx] -= eps;
                fd[i] = (sample_loss(mp, w, cfg, head) - sample_loss(mm, w, cfg, head)) /
                        (2 * eps);
            }
            CHECK(rel_err(fd, g) < 1e-5);
        }
    }
}

TEST_CASE("head-only gradient equals the tail of the full gradient") {
    Arch a = tiny_arch();
    auto m = init_model(a, 41);
    LossConfig cfg = unit_loss(a.channels);
    auto w = random_window(a, 42, 1);
    auto g_all = grad_params(m, w, cfg, Segment::All);
    auto g_head = grad_params(m, w, cfg, Segment::HeadOnly);
    REQUIRE(static_cast<int>(g_head.size()) == a.head_params());
    for (int i = 0; i < a.head_params(); ++i)
        CHECK(g_head[i] == doctest::Approx(g_all[a.extractor_params() + i]).epsilon(1e-12));
}

TEST_CASE("feature-space gradient matches finite differences") {
    Arch a = tiny_arch();
    auto m = init_model(a, 51);
    LossConfig cfg = unit_loss(a.channels);
    std::mt19937_64 rng(52);
    std::normal_distribution<double> nd(0.0, 1.0);
    FeatureSample w;
    w.values.resize(a.feature_dim);
    for (auto& v : w.values) v = nd(rng);
    w.label = 1;
    auto g = grad_head_params(m, w, cfg);
    std::vector<double> fd(g.size());
    const double eps = 1e-6;
    for (size_t i = 0; i < g.size(); ++i) {
        ModelState mp = m, mm = m;
        mp.params[m.head_offset(Head::Seen) + i] += eps;
        mm.params[m.head_offset(Head::Seen) + i] -= eps;
        fd[i] = (head_sample_loss(mp, w, cfg) - head_sample_loss(mm, w, cfg)) / (2 * eps);
    }
    CHECK(rel_err(fd, g) < 1e-5);
}

TEST_CASE("Hessian-vector product matches differentiated gradients and is symmetric") {
    Arch a = tiny_arch();
    auto m = init_model(a, 61);
    LossConfig cfg = unit_loss(a.channels);
    std::vector<SeriesWindow> samples;
    for (int i = 0; i < 6; ++i) samples.push_back(random_window(a, 200 + i, i % 2));
    const int n = a.extractor_params() + a.head_params();
    const double damping = 0.05;
    std::mt19937_64 rng(62);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n), u(n);
    for (auto& x : v) x = nd(rng);
    for (auto& x : u) x = nd(rng);

    auto hv = hvp(m, samples, v, cfg, damping, Segment::All);
    // central difference of the mean gradient along v
    const double eps = 1e-5;
    std::vector<double> fd(n, 0.0);
    ModelState mp = m, mm = m;
    for (int i = 0; i < n; ++i) {
        mp.params[i] += eps * v[i];
        mm.params[i] -= eps * v[i];
    }
    for (const auto& z : samples) {
        auto gp = grad_params(mp, z, cfg, Segment::All);
        auto gm = grad_params(mm, z, cfg, Segment::All);
        for (int i = 0; i < n; ++i) fd[i] += (gp[i] - gm[i]) / (2 * eps * samples.size());
    }
    for (int i = 0; i < n; ++i) fd[i] += damping * v[i];
    CHECK(rel_err(fd, hv) < 1e-3);

    auto hu = hvp(m, samples, u, cfg, damping, Segment::All);
    double vhu = 0.0, uhv = 0.0;
    for (int i = 0; i < n; ++i) {
        vhu += v[i] * hu[i];
        uhv += u[i] * hv[i];
    }
    CHECK(vhu == doctest::Approx(uhv).epsilon(1e-8));
}

TEST_CASE("head-segment HVP matches finite differences on feature samples") {
    Arch a = tiny_arch();
    auto m = init_model(a, 71);
    LossConfig cfg = unit_loss(a.channels);
    std::mt19937_64 rng(72);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<FeatureSample> samples;
    for (int i = 0; i < 5; ++i) {
        FeatureSample w;
        w.values.resize(a.feature_dim);
        for (auto& x : w.values) x = nd(rng);
        w.label = i % 2;
        w.id = i;
        samples.push_back(w);
    }
    const int n = a.head_params();
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    auto hv = hvp_head(m, samples, v, cfg, 0.01);

    const double eps = 1e-5;
    std::vector<double> fd(n, 0.0);
    ModelState mp = m, mm = m;
    for (int i = 0; i < n; ++i) {
        mp.params[m.head_offset(Head::Seen) + i] += eps * v[i];
        mm.params[m.head_offset(Head::Seen) + i] -= eps * v[i];
    }
    for (const auto& w : samples) {
        auto gp = grad_head_params(mp, w, cfg);
        auto gm = grad_head_params(mm, w, cfg);
        for (int i = 0; i < n; ++i) fd[i] += (gp[i] - gm[i]) / (2 * eps * samples.size());
    }
    for (int i = 0; i < n; ++i) fd[i] += 0.01 * v[i];
    CHECK(rel_err(fd, hv) < 1e-3);
}

TEST_CASE("mixed feature-parameter derivative matches finite differences") {
    Arch a = tiny_arch();
    auto m = init_model(a, 81);
    LossConfig cfg = unit_loss(a.channels);
    std::mt19937_64 rng(82);
    std::normal_distribution<double> nd(0.0, 1.0);
    FeatureSample w;
    w.values.resize(a.feature_dim);
    for (auto& x : w.values) x = nd(rng);
    w.label = 0;

    auto cross = grad_feat_cross(m, w, cfg);  // [head_params x feature_dim]
    const int nh = a.head_params();
    const int d = a.feature_dim;
    REQUIRE(static_cast<int>(cross.size()) == nh * d);
    const double eps = 1e-6;
    for (int j = 0; j < d; ++j) {
        auto wp = w, wm = w;
        wp.values[j] += eps;
        wm.values[j] -= eps;
        auto gp = grad_head_params(m, wp, cfg);
        auto gm = grad_head_params(m, wm, cfg);
        for (int i = 0; i < nh; ++i) {
            const double fd = (gp[i] - gm[i]) / (2 * eps);
            CHECK(cross[static_cast<size_t>(i) * d + j] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("risk rejects empty sample sets") {
    Arch a = tiny_arch();
    auto m = init_model(a, 91);
    LossConfig cfg = unit_loss(a.channels);
    CHECK_THROWS_AS(risk(m, {}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(head_risk(m, {}, cfg), std::invalid_argument);
}
