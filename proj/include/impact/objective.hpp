#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "impact/model.hpp"

namespace impact {

// Per-channel statistics of the Gaussian-prior reference score set.
struct PriorStats {
    std::vector<double> mu;
    std::vector<double> sigma;  // strictly positive
    int sample_count = 0;
    double source_sigma = 1.0;
};

PriorStats prior_stats(int r, int l, double sigma, uint64_t seed);

struct LossConfig {
    double margin = 5.0;  // a
    int channels = 3;     // r, must match arch
    PriorStats prior;
    bool signed_dev = false;
};

LossConfig default_loss_config(int r, uint64_t prior_seed = 1234);

// Per-channel deviation (absolute z-score by default). The 2-norm of this
// vector is the Mahalanobis distance under the diagonal prior.
std::vector<double> deviation(const std::vector<double>& scores, const PriorStats& prior,
                              bool signed_dev = false);

double gaussian_entropy(int r, double sigma_sq);

// ---------------------------------------------------------------------------
// Templated loss + reverse pass
// ---------------------------------------------------------------------------

// Deviation loss over a score vector. T is double or Dual.
template <typename T>
T deviation_loss(const std::vector<T>& scores, int y, const LossConfig& cfg) {
    const int r = cfg.channels;
    T total{0.0};
    for (int q = 0; q < r; ++q) {
        T z = (scores[q] - T{cfg.prior.mu[q]}) / T{cfg.prior.sigma[q]};
        T abs_z = value_of(z) < 0.0 ? -z : z;
        if (y == 0) {
            // Normal samples are always pulled toward the prior mean.
            total += abs_z;
        } else {
            // Anomalies deviate by at least the margin; in signed mode they
            // are pushed specifically to the positive side, which is what
            // makes the raw scores usable as an anomaly ranking.
            T dev = cfg.signed_dev ? z : abs_z;
            T gap = T{cfg.margin} - dev;
            if (value_of(gap) > 0.0) total += gap;
        }
    }
    return total / T{static_cast<double>(r)};
}

// d(loss)/d(score_q): piecewise-constant in the scores, so plain doubles.
// Subgradient conventions: 0 at the hinge kink (dev == a exactly) and 0 at
// the absolute-value kink (score == prior mean exactly).
inline void deviation_loss_score_grad(const std::vector<double>& scores, int y,
                                      const LossConfig& cfg, std::vector<double>& gs) {
    const int r = cfg.channels;
    gs.assign(r, 0.0);
    for (int q = 0; q < r; ++q) {
        const double z = (scores[q] - cfg.prior.mu[q]) / cfg.prior.sigma[q];
        const double abs_sign = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
        if (y == 0) {
            gs[q] = abs_sign / (r * cfg.prior.sigma[q]);
        } else {
            const double sign = cfg.signed_dev ? 1.0 : abs_sign;
            const double dev = cfg.signed_dev ? z : std::abs(z);
            if (cfg.margin - dev > 0.0) gs[q] = -sign / (r * cfg.prior.sigma[q]);
        }
    }
}

// Head loss + gradient wrt head parameters, over a feature vector that may
// itself carry tangents. ghead (length head_params) is accumulated into when
// non-null.
template <typename T>
T head_loss_grad_t(const Arch& arch, std::span<const T> head, const std::vector<T>& feat,
                   int y, const LossConfig& cfg, T* ghead) {
    const int F = arch.feature_dim;
    const int Hh = arch.head_hidden;
    const int R = arch.channels;

    const T* w1 = head.data();
    const T* b1 = w1 + static_cast<size_t>(Hh) * F;
    const T* w2 = b1 + Hh;
    const T* b2 = w2 + static_cast<size_t>(R) * Hh;

    std::vector<T> hid(Hh);
    std::vector<char> mask(Hh);
    for (int j = 0; j < Hh; ++j) {
        T a = b1[j];
        const T* wrow = w1 + static_cast<size_t>(j) * F;
        for (int i = 0; i < F; ++i) a += wrow[i] * feat[i];
        mask[j] = value_of(a) > 0.0;
        hid[j] = mask[j] ? a : T{0.0};
    }
    std::vector<T> scores(R);
    for (int q = 0; q < R; ++q) {
        T a = b2[q];
        const T* wrow = w2 + static_cast<size_t>(q) * Hh;
        for (int j = 0; j < Hh; ++j) a += wrow[j] * hid[j];
        scores[q] = a;
    }

    std::vector<double> sval(R);
    for (int q = 0; q < R; ++q) sval[q] = value_of(scores[q]);
    std::vector<double> gs;
    deviation_loss_score_grad(sval, y, cfg, gs);

    if (ghead) {
        T* gw1 = ghead;
        T* gb1 = gw1 + static_cast<size_t>(Hh) * F;
        T* gw2 = gb1 + Hh;
        T* gb2 = gw2 + static_cast<size_t>(R) * Hh;

        std::vector<T> dhid(Hh, T{0.0});
        for (int q = 0; q < R; ++q) {
            if (gs[q] == 0.0) continue;
            gb2[q] += T{gs[q]};
            const T* wrow = w2 + static_cast<size_t>(q) * Hh;
            T* gwrow = gw2 + static_cast<size_t>(q) * Hh;
            for (int j = 0; j < Hh; ++j) {
                gwrow[j] += T{gs[q]} * hid[j];
                dhid[j] += T{gs[q]} * wrow[j];
            }
        }
        for (int j = 0; j < Hh; ++j) {
            if (!mask[j]) continue;
            gb1[j] += dhid[j];
            T* gwrow = gw1 + static_cast<size_t>(j) * F;
            for (int i = 0; i < F; ++i) gwrow[i] += dhid[j] * feat[i];
        }
    }
    return deviation_loss(scores, y, cfg);
}

// Full-model loss + gradient. gphi / ghead are accumulated into when
// non-null; pass gphi == nullptr for head-only gradients.
template <typename T>
T loss_grad_t(const Arch& arch, std::span<const T> phi, std::span<const T> head,
              const SeriesWindow& x, int y, const LossConfig& cfg, T* gphi, T* ghead) {
    const int D = arch.input_dims;
    const int L = arch.window_len;
    const int H = arch.hidden_width;
    const int F = arch.feature_dim;
    const int Hh = arch.head_hidden;
    const int R = arch.channels;
    const auto off = arch.tap_offsets();
    const int taps = static_cast<int>(off.size());
    const int t0 = off.back();
    const int tv = L - t0;
    if (tv <= 0) throw std::invalid_argument("window shorter than receptive field");
    if (x.dims != D || x.length != L) throw std::invalid_argument("window shape mismatch");

    const T* convw = phi.data();
    const T* convb = convw + static_cast<size_t>(H) * D * taps;
    const T* projw = convb + H;
    const T* projb = projw + static_cast<size_t>(F) * H;

    // Extractor forward, keeping ReLU masks for the backward pass.
    std::vector<T> preact(static_cast<size_t>(H) * tv);
    std::vector<char> cmask(static_cast<size_t>(H) * tv);
    std::vector<T> pooled(H);
    for (int h = 0; h < H; ++h) {
        T acc{0.0};
        const T* wrow = convw + static_cast<size_t>(h) * D * taps;
        for (int t = t0; t < L; ++t) {
            T a = convb[h];
            for (int c = 0; c < D; ++c)
                for (int k = 0; k < taps; ++k)
                    a += wrow[c * taps + k] * T{x.at(c, t - off[k])};
            const size_t idx = static_cast<size_t>(h) * tv + (t - t0);
            cmask[idx] = value_of(a) > 0.0;
            preact[idx] = a;
            if (cmask[idx]) acc += a;
        }
        pooled[h] = acc / T{static_cast<double>(tv)};
    }
    std::vector<T> feat(F);
    for (int i = 0; i < F; ++i) {
        T a = projb[i];
        const T* wrow = projw + static_cast<size_t>(i) * H;
        for (int h = 0; h < H; ++h) a += wrow[h] * pooled[h];
        feat[i] = a;
    }

    // Head forward.
    const T* w1 = head.data();
    const T* b1 = w1 + static_cast<size_t>(Hh) * F;
    const T* w2 = b1 + Hh;
    const T* b2 = w2 + static_cast<size_t>(R) * Hh;
    std::vector<T> hid(Hh);
    std::vector<char> hmask(Hh);
    for (int j = 0; j < Hh; ++j) {
        T a = b1[j];
        const T* wrow = w1 + static_cast<size_t>(j) * F;
        for (int i = 0; i < F; ++i) a += wrow[i] * feat[i];
        hmask[j] = value_of(a) > 0.0;
        hid[j] = hmask[j] ? a : T{0.0};
    }
    std::vector<T> scores(R);
    for (int q = 0; q < R; ++q) {
        T a = b2[q];
        const T* wrow = w2 + static_cast<size_t>(q) * Hh;
        for (int j = 0; j < Hh; ++j) a += wrow[j] * hid[j];
        scores[q] = a;
    }

    std::vector<double> sval(R);
    for (int q = 0; q < R; ++q) sval[q] = value_of(scores[q]);
    std::vector<double> gs;
    deviation_loss_score_grad(sval, y, cfg, gs);

    if (ghead || gphi) {
        std::vector<T> dhid(Hh, T{0.0});
        for (int q = 0; q < R; ++q) {
            if (gs[q] == 0.0) continue;
            const T* wrow = w2 + static_cast<size_t>(q) * Hh;
            if (ghead) {
                T* gb2 = ghead + static_cast<size_t>(Hh) * F + Hh + static_cast<size_t>(R) * Hh;
                T* gw2 = ghead + static_cast<size_t>(Hh) * F + Hh;
                gb2[q] += T{gs[q]};
                T* gwrow = gw2 + static_cast<size_t>(q) * Hh;
                for (int j = 0; j < Hh; ++j) gwrow[j] += T{gs[q]} * hid[j];
            }
            for (int j = 0; j < Hh; ++j) dhid[j] += T{gs[q]} * wrow[j];
        }
        std::vector<T> dfeat(F, T{0.0});
        for (int j = 0; j < Hh; ++j) {
            if (!hmask[j]) continue;
            const T* wrow = w1 + static_cast<size_t>(j) * F;
            if (ghead) {
                T* gb1 = ghead + static_cast<size_t>(Hh) * F;
                gb1[j] += dhid[j];
                T* gwrow = ghead + static_cast<size_t>(j) * F;
                for (int i = 0; i < F; ++i) gwrow[i] += dhid[j] * feat[i];
            }
            for (int i = 0; i < F; ++i) dfeat[i] += dhid[j] * wrow[i];
        }
        if (gphi) {
            T* gconvw = gphi;
            T* gconvb = gconvw + static_cast<size_t>(H) * D * taps;
            T* gprojw = gconvb + H;
            T* gprojb = gprojw + static_cast<size_t>(F) * H;
            std::vector<T> dpool(H, T{0.0});
            for (int i = 0; i < F; ++i) {
                gprojb[i] += dfeat[i];
                const T* wrow = projw + static_cast<size_t>(i) * H;
                T* gwrow = gprojw + static_cast<size_t>(i) * H;
                for (int h = 0; h < H; ++h) {
                    gwrow[h] += dfeat[i] * pooled[h];
                    dpool[h] += dfeat[i] * wrow[h];
                }
            }
            const T inv_tv{1.0 / static_cast<double>(tv)};
            for (int h = 0; h < H; ++h) {
                const T da_base = dpool[h] * inv_tv;
                T* gwrow = gconvw + static_cast<size_t>(h) * D * taps;
                for (int t = t0; t < L; ++t) {
                    const size_t idx = static_cast<size_t>(h) * tv + (t - t0);
                    if (!cmask[idx]) continue;
                    gconvb[h] += da_base;
                    for (int c = 0; c < D; ++c)
                        for (int k = 0; k < taps; ++k)
                            gwrow[c * taps + k] += da_base * T{x.at(c, t - off[k])};
                }
            }
        }
    }
    return deviation_loss(scores, y, cfg);
}

// ---------------------------------------------------------------------------
// Concrete (double) entry points
// ---------------------------------------------------------------------------

double sample_loss(const ModelState& m, const SeriesWindow& z, const LossConfig& cfg,
                   Head head = Head::Seen);
double head_sample_loss(const ModelState& m, const FeatureSample& w, const LossConfig& cfg,
                        Head head = Head::Seen);

double risk(const ModelState& m, const std::vector<SeriesWindow>& samples,
            const LossConfig& cfg, Head head = Head::Seen);
double head_risk(const ModelState& m, const std::vector<FeatureSample>& samples,
                 const LossConfig& cfg, Head head = Head::Seen);

// Gradient of sample_loss. Segment::All -> [extractor | named head]
// (length extractor_params + head_params); Segment::HeadOnly -> the tail.
std::vector<double> grad_params(const ModelState& m, const SeriesWindow& z,
                                const LossConfig& cfg, Segment segment,
                                Head head = Head::Seen);
std::vector<double> grad_head_params(const ModelState& m, const FeatureSample& w,
                                     const LossConfig& cfg, Head head = Head::Seen);

// (H + damping I) v where H is the mean per-sample Hessian over `samples`.
std::vector<double> hvp(const ModelState& m, const std::vector<SeriesWindow>& samples,
                        const std::vector<double>& v, const LossConfig& cfg, double damping,
                        Segment segment, Head head = Head::Seen);
std::vector<double> hvp_head(const ModelState& m, const std::vector<FeatureSample>& samples,
                             const std::vector<double>& v, const LossConfig& cfg,
                             double damping, Head head = Head::Seen);

// Mixed derivative d/d(phi_j) of grad_{theta_h} L(w), returned row-major
// [head_params x feature_dim].
std::vector<double> grad_feat_cross(const ModelState& m, const FeatureSample& w,
                                    const LossConfig& cfg, Head head = Head::Seen);

}  // namespace impact
