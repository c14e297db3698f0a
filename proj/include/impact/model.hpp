#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "impact/dual.hpp"
#include "impact/types.hpp"

namespace impact {

// Architecture descriptor of the fixed model family:
// dilated temporal convolution extractor (one hidden layer) feeding two
// two-layer MLP heads (seen / unseen) that emit r score channels each.
struct Arch {
    int input_dims = 1;
    int window_len = 100;
    int hidden_width = 64;
    int feature_dim = 64;
    int head_hidden = 64;
    int channels = 3;                   // r
    std::vector<int> dilations = {1, 2, 4};

    // Kernel tap offsets: {0, d0, d0+d1, ...}.
    std::vector<int> tap_offsets() const {
        std::vector<int> off{0};
        for (int d : dilations) off.push_back(off.back() + d);
        return off;
    }
    int receptive_field() const { return tap_offsets().back() + 1; }

    int extractor_params() const {
        const int taps = static_cast<int>(dilations.size()) + 1;
        return hidden_width * input_dims * taps + hidden_width +
               feature_dim * hidden_width + feature_dim;
    }
    int head_params() const {
        return head_hidden * feature_dim + head_hidden + channels * head_hidden + channels;
    }
    int total_params() const { return extractor_params() + 2 * head_params(); }

    void validate() const;
};

enum class Head { Seen, Unseen };
enum class Segment { All, HeadOnly };

struct ModelState {
    Arch arch;
    std::vector<double> params;  // flat: [extractor | seen head | unseen head]
    uint64_t seed = 0;

    int phi_offset() const { return 0; }
    int head_offset(Head h) const {
        return arch.extractor_params() + (h == Head::Seen ? 0 : arch.head_params());
    }
    std::span<const double> phi_params() const {
        return std::span<const double>(params).subspan(0, arch.extractor_params());
    }
    std::span<const double> head_params(Head h) const {
        return std::span<const double>(params).subspan(head_offset(h), arch.head_params());
    }
    std::span<double> head_params_mut(Head h) {
        return std::span<double>(params).subspan(head_offset(h), arch.head_params());
    }
};

ModelState init_model(const Arch& arch, uint64_t seed);

void save_checkpoint(const ModelState& m, const std::string& path);
ModelState load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Templated forward passes. T is double or Dual; the input window stays
// double (data is constant), parameters carry the tangent when T == Dual.
// ---------------------------------------------------------------------------

template <typename T>
void extractor_forward(const Arch& arch, std::span<const T> phi, const SeriesWindow& x,
                       std::vector<T>& feat) {
    const int D = arch.input_dims;
    const int L = arch.window_len;
    const int H = arch.hidden_width;
    const int F = arch.feature_dim;
    const auto off = arch.tap_offsets();
    const int taps = static_cast<int>(off.size());
    const int t0 = off.back();
    const int tv = L - t0;  // valid conv positions

    const T* convw = phi.data();                    // [H][D][taps]
    const T* convb = convw + static_cast<size_t>(H) * D * taps;
    const T* projw = convb + H;                     // [F][H]
    const T* projb = projw + static_cast<size_t>(F) * H;

    std::vector<T> pooled(H);
    for (int h = 0; h < H; ++h) {
        T acc{0.0};
        const T* wrow = convw + static_cast<size_t>(h) * D * taps;
        for (int t = t0; t < L; ++t) {
            T a = convb[h];
            for (int c = 0; c < D; ++c)
                for (int k = 0; k < taps; ++k)
                    a += wrow[c * taps + k] * T{x.at(c, t - off[k])};
            acc += relu(a);
        }
        pooled[h] = acc / T{static_cast<double>(tv)};
    }
    feat.assign(F, T{0.0});
    for (int i = 0; i < F; ++i) {
        T a = projb[i];
        const T* wrow = projw + static_cast<size_t>(i) * H;
        for (int h = 0; h < H; ++h) a += wrow[h] * pooled[h];
        feat[i] = a;
    }
}

// Head forward over a feature vector. Phi may itself carry tangents (Tf),
// which the mixed feature-parameter derivative needs.
template <typename T, typename Tf>
void head_forward(const Arch& arch, std::span<const T> head, const std::vector<Tf>& feat,
                  std::vector<T>& scores) {
    const int F = arch.feature_dim;
    const int Hh = arch.head_hidden;
    const int R = arch.channels;

    const T* w1 = head.data();                      // [Hh][F]
    const T* b1 = w1 + static_cast<size_t>(Hh) * F;
    const T* w2 = b1 + Hh;                          // [R][Hh]
    const T* b2 = w2 + static_cast<size_t>(R) * Hh;

    std::vector<T> hid(Hh);
    for (int j = 0; j < Hh; ++j) {
        T a = b1[j];
        const T* wrow = w1 + static_cast<size_t>(j) * F;
        for (int i = 0; i < F; ++i) a += wrow[i] * T{feat[i]};
        hid[j] = relu(a);
    }
    scores.assign(R, T{0.0});
    for (int q = 0; q < R; ++q) {
        T a = b2[q];
        const T* wrow = w2 + static_cast<size_t>(q) * Hh;
        for (int j = 0; j < Hh; ++j) a += wrow[j] * hid[j];
        scores[q] = a;
    }
}

std::vector<double> extract_features(const ModelState& m, const SeriesWindow& x);
std::vector<double> head_scores(const ModelState& m, const std::vector<double>& feat, Head head);

}  // namespace impact
