// Acceptance gate: one pass/fail line per release criterion. Each criterion
// re-derives its expectation from an independent oracle (finite differences,
// dense solves, brute-force determinants, retraining) rather than trusting
// the library's own output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "impact/data.hpp"
#include "impact/eval.hpp"
#include "impact/influence.hpp"
#include "impact/model.hpp"
#include "impact/objective.hpp"
#include "impact/trainer.hpp"

using namespace impact;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const std::string& desc, bool ok) {
    std::printf("[%2d] %-70s %s\n", id, desc.c_str(), ok ? "PASS" : "FAIL");
    if (!ok) ++g_failures;
}

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

SeriesWindow random_window(const Arch& a, uint64_t seed, int label) {
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

double rel_err(const std::vector<double>& oracle, const std::vector<double>& got) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < oracle.size(); ++i) {
        num = std::max(num, std::abs(oracle[i] - got[i]));
        den = std::max(den, std::abs(oracle[i]));
    }
    return num / (den + 1e-12);
}

// Dense Gaussian elimination with partial pivoting, for oracle solves.
std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < n; ++r) {
            const double f = A[r][col] / A[col][col];
            for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= A[r][c] * x[c];
        x[r] = acc / A[r][r];
    }
    return x;
}

// Brute-force determinant by cofactor expansion, for d <= 8 oracles.
double det_bruteforce(const std::vector<std::vector<double>>& A) {
    const size_t n = A.size();
    if (n == 1) return A[0][0];
    double total = 0.0;
    for (size_t col = 0; col < n; ++col) {
        std::vector<std::vector<double>> minor;
        for (size_t r = 1; r < n; ++r) {
            std::vector<double> row;
            for (size_t c = 0; c < n; ++c)
                if (c != col) row.push_back(A[r][c]);
            minor.push_back(row);
        }
        total += (col % 2 == 0 ? 1.0 : -1.0) * A[0][col] * det_bruteforce(minor);
    }
    return total;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> order(v.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](size_t x, size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        size_t i = 0;
        while (i < order.size()) {  // midranks over tie groups
            size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            for (size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * (i + j);
            i = j + 1;
        }
        return r;
    };
    auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n - 1) / 2.0;
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - mean) * (rb[i] - mean);
        da += (ra[i] - mean) * (ra[i] - mean);
        db += (rb[i] - mean) * (rb[i] - mean);
    }
    return num / std::sqrt(da * db);
}

// ---------------------------------------------------------------------------
// Shared ridge-linear fixture for the retraining-oracle criteria.
// ---------------------------------------------------------------------------

struct LinearFixture {
    LinearTrainSpec spec;
    std::vector<FeatureSample> train, val;
};

LinearFixture make_linear_fixture(uint64_t seed) {
    LinearFixture f;
    f.spec.feature_dim = 4;
    f.spec.channels = 1;
    f.spec.ridge = 0.5;
    f.spec.lr = 0.05;
    f.spec.iters = 3000;
    f.spec.seed = seed;
    f.spec.loss = unit_loss(1);
    f.spec.loss.margin = 3.0;

    std::mt19937_64 rng(seed * 977 + 5);
    std::normal_distribution<double> nd(0.0, 1.0);
    int64_t id = 0;
    auto make = [&](int label, double shift) {
        FeatureSample w;
        w.values.resize(f.spec.feature_dim);
        for (auto& v : w.values) v = nd(rng) + shift;
        w.label = label;
        w.id = id++;
        return w;
    };
    for (int i = 0; i < 60; ++i) f.train.push_back(make(0, 0.0));
    for (int i = 0; i < 15; ++i) f.train.push_back(make(1, 2.5));
    for (int i = 0; i < 5; ++i) f.train.push_back(make(0, 2.5));  // mislabeled
    for (int i = 0; i < 12; ++i) f.val.push_back(make(0, 0.0));
    for (int i = 0; i < 5; ++i) f.val.push_back(make(1, 2.5));
    return f;
}

// ---------------------------------------------------------------------------
// Shared synthetic-pipeline runner for the end-to-end criteria.
// ---------------------------------------------------------------------------

struct PipelineRun {
    TrainedModel tm;
    double test_auc = 0.0;
};

PipelineRun run_pipeline(Setting setting, double severity, double contamination, int n_labeled,
                         double validation_balance, int epochs_total, int epochs_initial,
                         Ablation ablation, uint64_t seed) {
    SynthSpec sp;
    sp.n_normal = 400;
    sp.n_per_class = 60;
    sp.length = 64;
    sp.seed = seed;
    sp.severity = severity;
    sp.anomaly_classes = {0, 1, 2, 3, 4};

    SplitOptions so;
    so.setting = setting;
    so.contamination_rate = contamination;
    so.n_labeled = n_labeled;
    so.seed = seed;
    auto split = make_openset_split(synth_generate(sp), so);

    TrainConfig c;
    c.arch.input_dims = 1;
    c.arch.window_len = 64;
    c.arch.hidden_width = 8;
    c.arch.feature_dim = 8;
    c.arch.head_hidden = 8;
    c.arch.channels = 3;
    c.arch.dilations = {1, 2};
    c.epochs_total = epochs_total;
    c.epochs_initial = epochs_initial;
    c.batch_size = 64;
    c.lr = 0.01;
    c.k = 5;
    c.alpha = 0.02;
    c.lambda_unseen = 3.0;
    c.refresh_per_batch = true;
    c.seed = seed;
    c.ablation = ablation;
    c.influence.validation_balance = validation_balance;

    PipelineRun out{impact_train(split, c), 0.0};
    auto scores = score_windows(out.tm, split.test);
    std::vector<int> labels;
    for (const auto& w : split.test) labels.push_back(w.label);
    out.test_auc = auc(scores, labels);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

void criterion_1_gradient() {
    auto t0 = Clock::now();
    Arch a = tiny_arch();
    LossConfig cfg = unit_loss(a.channels);
    double worst = 0.0;
    int done = 0;
    uint64_t seed = 1000;
    while (done < 20) {
        auto m = init_model(a, seed);
        auto w = random_window(a, seed + 7, static_cast<int>(seed % 2));
        ++seed;
        // Skip fixtures near a hinge kink, where one-sided subgradients and
        // central differences legitimately disagree.
        auto scores = head_scores(m, extract_features(m, w), Head::Seen);
        auto dev = deviation(scores, cfg.prior);
        bool near_kink = false;
        for (double d : dev)
            if (std::abs(d) < 1e-3 || std::abs(d - cfg.margin) < 1e-3) near_kink = true;
        if (near_kink) continue;

        auto g = grad_params(m, w, cfg, Segment::All, Head::Seen);
        const int n = static_cast<int>(g.size());
        std::vector<double> fd(n);
        const double eps = 1e-6;
        for (int i = 0; i < n; ++i) {
            ModelState mp = m, mm = m;
            const int idx = i < a.extractor_params()
                                ? i
                                : m.head_offset(Head::Seen) + (i - a.extractor_params());
            mp.params[idx] += eps;
            mm.params[idx] -= eps;
            fd[i] = (sample_loss(mp, w, cfg, Head::Seen) - sample_loss(mm, w, cfg, Head::Seen)) /
                    (2 * eps);
        }
        worst = std::max(worst, rel_err(fd, g));
        ++done;
    }
    const double elapsed = seconds_since(t0);
    report(1, "analytic gradient matches central finite differences (20 pairs)",
           worst < 1e-4 && elapsed < 10.0);
}

void criterion_2_hvp() {
    auto t0 = Clock::now();
    Arch a = tiny_arch();
    auto m = init_model(a, 61);
    LossConfig cfg = unit_loss(a.channels);
    std::vector<SeriesWindow> samples;
    for (int i = 0; i < 6; ++i) samples.push_back(random_window(a, 200 + i, i % 2));
    const int n = a.extractor_params() + a.head_params();
    bool ok = n <= 200;

    const double damping = 0.05;
    std::mt19937_64 rng(62);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n), u(n);
    for (auto& x : v) x = nd(rng);
    for (auto& x : u) x = nd(rng);

    auto hv = hvp(m, samples, v, cfg, damping, Segment::All);
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
    ok = ok && rel_err(fd, hv) < 1e-3;

    auto hu = hvp(m, samples, u, cfg, damping, Segment::All);
    double vhu = 0.0, uhv = 0.0;
    for (int i = 0; i < n; ++i) {
        vhu += v[i] * hu[i];
        uhv += u[i] * hv[i];
    }
    ok = ok && std::abs(vhu - uhv) <= 1e-8 * std::max(1.0, std::abs(vhu));
    report(2, "Hessian-vector product matches differentiated gradients, symmetric",
           ok && seconds_since(t0) < 10.0);
}

void criterion_3_inverse_hvp() {
    Arch a = tiny_arch();
    auto m = init_model(a, 17);
    LossConfig cfg = unit_loss(a.channels);
    std::vector<SeriesWindow> samples;
    for (int i = 0; i < 5; ++i) samples.push_back(random_window(a, 300 + i, i % 2));
    const int n = a.extractor_params() + a.head_params();

    InfluenceConfig icfg;
    icfg.damping = 0.5;  // dominates any indefinite curvature
    icfg.cg_tol = 1e-10;
    icfg.cg_max_iter = 2000;

    std::vector<std::vector<double>> A(n, std::vector<double>(n));
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        auto col = hvp(m, samples, e, cfg, icfg.damping, Segment::All);
        for (int i = 0; i < n; ++i) A[i][j] = col[i];
    }
    std::mt19937_64 rng(18);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> b(n);
    for (auto& v : b) v = nd(rng);

    auto res = inverse_hvp(m, samples, b, cfg, icfg, Segment::All);
    auto x_star = dense_solve(A, b);
    report(3, "conjugate-gradient solve matches dense damped-Hessian solve",
           rel_err(x_star, res.x) < 1e-3);
}

void criterion_4_loo() {
    auto t0 = Clock::now();
    LinearTrainSpec spec;
    spec.feature_dim = 4;
    spec.channels = 1;
    // A light ridge and a wide class gap keep the trained scorer away from
    // the degenerate all-zero stationary point, where the nonsmooth loss
    // makes leave-one-out deltas vanish and the comparison meaningless.
    spec.ridge = 0.25;
    spec.lr = 0.01;
    spec.iters = 12000;
    spec.seed = 11;
    spec.loss = unit_loss(1);
    spec.loss.margin = 3.0;

    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd(0.0, 1.0);
    int64_t id = 0;
    auto make = [&](int label, double shift) {
        FeatureSample w;
        w.values.resize(spec.feature_dim);
        for (auto& v : w.values) v = nd(rng) + shift;
        w.label = label;
        w.id = id++;
        return w;
    };
    std::vector<FeatureSample> train, val;
    for (int i = 0; i < 38; ++i) train.push_back(make(0, 0.0));
    for (int i = 0; i < 8; ++i) train.push_back(make(1, 3.5));
    for (int i = 0; i < 4; ++i) train.push_back(make(0, 3.5));  // mislabeled
    for (int i = 0; i < 12; ++i) val.push_back(make(0, 0.0));
    for (int i = 0; i < 5; ++i) val.push_back(make(1, 3.5));

    auto theta = linear_train(spec, train);
    std::vector<double> estimated, actual;
    for (const auto& w : train) {
        // Removing a sample is an epsilon = -1/N downweight, so the predicted
        // risk change is -influence / N.
        estimated.push_back(-linear_influence(spec, theta, {w}, val) /
                            static_cast<double>(train.size()));
        actual.push_back(loo_oracle(spec, train, w.id, val, LooMode::Discard));
    }
    const double rho = spearman(estimated, actual);
    report(4, "influence estimates track leave-one-out retraining (Spearman >= 0.8)",
           rho >= 0.8 && seconds_since(t0) < 120.0);
}

void criterion_5_flip_retrain() {
    int ok_lower = 0, ok_sign = 0, seeds = 0;
    for (uint64_t s = 1; s <= 20; ++s) {
        auto f = make_linear_fixture(s);
        auto theta = linear_train(f.spec, f.train);
        const double base = linear_risk(f.spec, theta, f.val);

        std::vector<FeatureSample> variant = f.train;
        double sum_infl = 0.0;
        int n_con = 0;
        for (auto& w : variant) {
            if (w.label != 0) continue;
            const double infl = linear_influence(f.spec, theta, {w}, f.val);
            if (infl > 0.0) {
                w.label = 1;
                sum_infl += infl;
                ++n_con;
            }
        }
        if (n_con == 0) continue;
        ++seeds;
        auto retrained = linear_train(f.spec, variant);
        const double actual = linear_risk(f.spec, retrained, f.val) - base;
        const double predicted = -2.0 * sum_infl / (f.train.size() * n_con);
        if (actual < 0.0) ++ok_lower;
        if ((predicted < 0.0) == (actual < 0.0)) ++ok_sign;
    }
    report(5, "flipping positive-influence labels lowers validation risk (>=90%)",
           seeds == 20 && ok_lower >= 18 && ok_sign >= 18);
}

void criterion_6_rank_one() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ua(0.05, 0.8);
    bool ok = true;
    int kl_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + static_cast<int>(rng() % 7);  // up to 8
        std::vector<double> u(d), phi(d);
        for (auto& v : u) v = nd(rng);
        double phi_nsq = 0.0;
        for (auto& v : phi) {
            v = nd(rng);
            phi_nsq += v * v;
        }
        const double alpha = ua(rng);
        // P = u phi^T / ||phi||^2 maps phi to u, so I + alpha P has a single
        // eigenvalue displaced from 1: det = 1 + alpha * lambda with
        // lambda = phi^T u / ||phi||^2.
        double lambda = 0.0;
        for (int i = 0; i < d; ++i) lambda += phi[i] * u[i];
        lambda /= phi_nsq;
        std::vector<std::vector<double>> A(d, std::vector<double>(d, 0.0));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) A[i][j] = alpha * u[i] * phi[j] / phi_nsq;
            A[i][i] += 1.0;
        }
        const double det = det_bruteforce(A);
        if (std::abs(det - (1.0 + alpha * lambda)) > 1e-10) ok = false;

        // Distribution-shift bound: when the volume contracts, the KL
        // divergence between original and mapped densities is at least the
        // contraction rate |log det| >= -alpha * lambda.
        const double closed = 1.0 + alpha * lambda;
        if (closed > 0.0 && closed < 1.0) {
            ++kl_checked;
            if (std::abs(std::log(closed)) < -alpha * lambda - 1e-12) ok = false;
        }
    }
    report(6, "rank-one update determinant and contraction bound (100 fixtures)",
           ok && kl_checked > 0);
}

void criterion_7_perturb_retrain() {
    const double alpha = 0.05;
    int ok_lower = 0;
    bool pred_nonpositive = true;
    for (uint64_t s = 1; s <= 20; ++s) {
        auto f = make_linear_fixture(s);
        auto theta = linear_train(f.spec, f.train);
        const double base = linear_risk(f.spec, theta, f.val);

        // s_test for the ridge model: damped Hessian is ridge * I a.e.
        std::vector<double> stest(theta.size(), 0.0);
        for (const auto& w : f.val) {
            auto g = linear_grad(f.spec, theta, w);
            for (size_t i = 0; i < g.size(); ++i) stest[i] += g[i] / f.spec.ridge;
        }

        // Perturbation candidates: the least negative influences among the
        // negatively scored normals.
        struct Cand {
            size_t idx;
            double infl;
        };
        std::vector<Cand> negatives;
        for (size_t i = 0; i < f.train.size(); ++i) {
            if (f.train[i].label != 0) continue;
            const double infl = linear_influence(f.spec, theta, {f.train[i]}, f.val);
            if (infl < 0.0) negatives.push_back({i, infl});
        }
        std::sort(negatives.begin(), negatives.end(),
                  [](const Cand& a, const Cand& b) { return a.infl > b.infl; });
        const int k = std::min<size_t>(5, negatives.size());

        std::vector<FeatureSample> variant = f.train;
        double norm_sq_sum = 0.0;
        for (int c = 0; c < k; ++c) {
            auto& w = variant[negatives[c].idx];
            auto scores = linear_scores(f.spec, theta, w.values);
            std::vector<double> gs;
            deviation_loss_score_grad(scores, w.label, f.spec.loss, gs);
            // Feature-space influence direction: -(d_phi d_theta L)^T s_test,
            // which for the linear scorer contracts to the W rows of s_test
            // scaled by the score subgradient.
            std::vector<double> dir(f.spec.feature_dim, 0.0);
            for (int q = 0; q < f.spec.channels; ++q)
                for (int j = 0; j < f.spec.feature_dim; ++j)
                    dir[j] -= stest[static_cast<size_t>(q) * f.spec.feature_dim + j] * gs[q];
            double nsq = 0.0;
            for (double v : dir) nsq += v * v;
            norm_sq_sum += nsq;
            // Pseudo anomaly: step along the risk-increasing direction, then
            // relabel the moved copy as an anomaly.
            for (int j = 0; j < f.spec.feature_dim; ++j) w.values[j] += alpha * dir[j];
            w.label = 1;
        }
        const double predicted = -alpha * norm_sq_sum / (f.train.size() * k);
        if (predicted > 0.0) pred_nonpositive = false;
        auto retrained = linear_train(f.spec, variant);
        if (linear_risk(f.spec, retrained, f.val) - base < 0.0) ++ok_lower;
    }
    report(7, "relabeled influence-direction perturbations lower risk (>=80%)",
           pred_nonpositive && ok_lower >= 16);
}

void criterion_8_entropy() {
    std::mt19937_64 rng(99);
    bool ok = true;
    for (double sigma_sq : {0.5, 1.0, 2.0}) {
        for (int r : {1, 2, 4}) {
            const double closed = gaussian_entropy(r, sigma_sq);
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
            if (std::abs(acc / n - closed) > 0.02 * std::abs(closed)) ok = false;
        }
    }
    report(8, "closed-form Gaussian entropy matches Monte Carlo within 2%", ok);
}

void criterion_9_decontamination() {
    double recall = 0.0, mean_con = 0.0, mean_nor = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        auto run = run_pipeline(Setting::General, 1.0, 0.02, 10, 0.5, 20, 6,
                                Ablation::None, seed);
        auto m = decon_metrics(run.tm.audit.last_report);
        recall += m.recall;
        mean_con += m.mean_influence_contaminant;
        mean_nor += m.mean_influence_normal;
    }
    recall /= 5;
    mean_con /= 5;
    mean_nor /= 5;
    report(9, "contaminant flip recall >= 0.6 with higher mean influence",
           recall >= 0.6 && mean_con > mean_nor);
}

void criterion_10_ablations() {
    // Contaminated general split: flipping identified contaminants should
    // beat dropping them, and beat flipping a random subset.
    double full_gen = 0.0, no_flip = 0.0, rnd_flip = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        full_gen += run_pipeline(Setting::General, 0.6, 0.10, 5, 0.0, 10, 6,
                                 Ablation::None, seed).test_auc;
        no_flip += run_pipeline(Setting::General, 0.6, 0.10, 5, 0.0, 10, 6,
                                Ablation::NoFlip, seed).test_auc;
        rnd_flip += run_pipeline(Setting::General, 0.6, 0.10, 5, 0.0, 10, 6,
                                 Ablation::RandomFlip, seed).test_auc;
    }
    // Hard split: the auxiliary head trained on perturbed pseudo anomalies
    // should beat scoring without it, and beat randomized reference /
    // perturbation choices.
    double full_hard = 0.0, no_unseen = 0.0, rnd_ref = 0.0, rnd_per = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        full_hard += run_pipeline(Setting::Hard, 1.0, 0.02, 5, 0.0, 10, 6,
                                  Ablation::None, seed).test_auc;
        no_unseen += run_pipeline(Setting::Hard, 1.0, 0.02, 5, 0.0, 10, 6,
                                  Ablation::NoUnseenHead, seed).test_auc;
        rnd_ref += run_pipeline(Setting::Hard, 1.0, 0.02, 5, 0.0, 10, 6,
                                Ablation::RandomRef, seed).test_auc;
        rnd_per += run_pipeline(Setting::Hard, 1.0, 0.02, 5, 0.0, 10, 6,
                                Ablation::RandomPerturb, seed).test_auc;
    }
    const bool ok = (full_gen - no_flip) / 5 >= 0.02 && (full_hard - no_unseen) / 5 >= 0.02 &&
                    rnd_flip < full_gen && rnd_ref < full_hard && rnd_per < full_hard;
    report(10, "full pipeline beats no-flip, no-aux-head, and randomized variants", ok);
}

void criterion_11_robustness() {
    double full_lo = 0.0, full_hi = 0.0, keep_lo = 0.0, keep_hi = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        full_lo += run_pipeline(Setting::General, 1.0, 0.02, 5, 0.0, 10, 6,
                                Ablation::None, seed).test_auc;
        full_hi += run_pipeline(Setting::General, 1.0, 0.10, 5, 0.0, 10, 6,
                                Ablation::None, seed).test_auc;
        keep_lo += run_pipeline(Setting::General, 1.0, 0.02, 5, 0.0, 10, 6,
                                Ablation::KeepConUnflipped, seed).test_auc;
        keep_hi += run_pipeline(Setting::General, 1.0, 0.10, 5, 0.0, 10, 6,
                                Ablation::KeepConUnflipped, seed).test_auc;
    }
    report(11, "AUC drop under rising contamination smaller than without flips",
           (full_lo - full_hi) < (keep_lo - keep_hi));
}

void criterion_12_auc_oracle() {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    bool ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            s[i] = std::round(nd(rng) * 4.0) / 4.0;  // quantize to force ties
            y[i] = coin(rng);
            pos += y[i];
        }
        if (pos == 0) y[0] = 1;
        if (pos == n) y[0] = 0;

        double wins = 0.0, pairs = 0.0;
        for (int i = 0; i < n; ++i) {
            if (y[i] != 1) continue;
            for (int j = 0; j < n; ++j) {
                if (y[j] != 0) continue;
                pairs += 1.0;
                if (s[i] > s[j])
                    wins += 1.0;
                else if (s[i] == s[j])
                    wins += 0.5;
            }
        }
        if (std::abs(auc(s, y) - wins / pairs) > 1e-12) ok = false;
    }
    report(12, "rank-based AUC equals quadratic pair counting (50 fixtures)", ok);
}

void criterion_13_end_to_end() {
    auto t0 = Clock::now();
    char tmpl[] = "/tmp/impact_accept_XXXXXX";
    const std::string dir = mkdtemp(tmpl);
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(IMPACT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str())) == 0;
    };
    const std::string ds = dir + "/ds.json";
    bool ok = run("gen-data --out " + ds + " --seed 7");
    for (int pass = 1; pass <= 2 && ok; ++pass) {
        const std::string tag = dir + "/m" + std::to_string(pass);
        ok = ok && run("train --data " + ds + " --out " + tag + ".json --split-out " + tag +
                       ".split.json --seed 7");
        ok = ok && run("evaluate --model " + tag + ".json --split " + tag + ".split.json --out " +
                       tag + ".report.json");
    }
    ok = ok && !slurp(dir + "/m1.json").empty() &&
         slurp(dir + "/m1.json") == slurp(dir + "/m2.json") &&
         slurp(dir + "/m1.report.json") == slurp(dir + "/m2.report.json");
    report(13, "default gen-data/train/evaluate pipeline, deterministic, < 5 min",
           ok && seconds_since(t0) < 300.0);
}

}  // namespace

int main() {
    auto t0 = Clock::now();
    criterion_1_gradient();
    criterion_2_hvp();
    criterion_3_inverse_hvp();
    criterion_4_loo();
    criterion_5_flip_retrain();
    criterion_6_rank_one();
    criterion_7_perturb_retrain();
    criterion_8_entropy();
    criterion_9_decontamination();
    criterion_10_ablations();
    criterion_11_robustness();
    criterion_12_auc_oracle();
    criterion_13_end_to_end();
    std::printf("%d/13 criteria passed (%.1fs)\n", 13 - g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
