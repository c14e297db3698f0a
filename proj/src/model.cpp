#include "impact/model.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

namespace impact {

void Arch::validate() const {
    if (input_dims <= 0 || window_len <= 0 || hidden_width <= 0 || feature_dim <= 0 ||
        head_hidden <= 0 || channels <= 0)
        throw std::invalid_argument("arch dimensions must be positive");
    if (dilations.empty()) throw std::invalid_argument("dilation schedule empty");
    for (int d : dilations)
        if (d <= 0) throw std::invalid_argument("dilations must be positive");
    if (window_len < receptive_field())
        throw std::invalid_argument("window length below conv receptive field");
}

ModelState init_model(const Arch& arch, uint64_t seed) {
    arch.validate();
    ModelState m;
    m.arch = arch;
    m.seed = seed;
    m.params.assign(arch.total_params(), 0.0);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](size_t begin, size_t count, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (size_t i = begin; i < begin + count; ++i) m.params[i] = scale * normal(rng);
    };

    const int taps = static_cast<int>(arch.dilations.size()) + 1;
    size_t p = 0;
    // Extractor: conv weights scaled by fan-in, biases zero.
    fill(p, static_cast<size_t>(arch.hidden_width) * arch.input_dims * taps,
         arch.input_dims * taps);
    p += static_cast<size_t>(arch.hidden_width) * arch.input_dims * taps;
    p += arch.hidden_width;  // conv bias = 0
    fill(p, static_cast<size_t>(arch.feature_dim) * arch.hidden_width, arch.hidden_width);
    p += static_cast<size_t>(arch.feature_dim) * arch.hidden_width;
    p += arch.feature_dim;  // proj bias = 0
    // Heads.
    for (int h = 0; h < 2; ++h) {
        fill(p, static_cast<size_t>(arch.head_hidden) * arch.feature_dim, arch.feature_dim);
        p += static_cast<size_t>(arch.head_hidden) * arch.feature_dim;
        p += arch.head_hidden;
        fill(p, static_cast<size_t>(arch.channels) * arch.head_hidden, arch.head_hidden);
        p += static_cast<size_t>(arch.channels) * arch.head_hidden;
        p += arch.channels;
    }
    return m;
}

std::vector<double> extract_features(const ModelState& m, const SeriesWindow& x) {
    if (x.dims != m.arch.input_dims || x.length != m.arch.window_len)
        throw std::invalid_argument("window shape does not match model arch");
    std::vector<double> feat;
    extractor_forward<double>(m.arch, m.phi_params(), x, feat);
    return feat;
}

std::vector<double> head_scores(const ModelState& m, const std::vector<double>& feat,
                                Head head) {
    if (static_cast<int>(feat.size()) != m.arch.feature_dim)
        throw std::invalid_argument("feature length does not match arch");
    std::vector<double> scores;
    head_forward<double, double>(m.arch, m.head_params(head), feat, scores);
    return scores;
}

namespace {

nlohmann::json arch_to_json(const Arch& a) {
    return {{"input_dims", a.input_dims},   {"window_len", a.window_len},
            {"hidden_width", a.hidden_width}, {"feature_dim", a.feature_dim},
            {"head_hidden", a.head_hidden},   {"channels", a.channels},
            {"dilations", a.dilations}};
}

Arch arch_from_json(const nlohmann::json& j) {
    Arch a;
    a.input_dims = j.at("input_dims");
    a.window_len = j.at("window_len");
    a.hidden_width = j.at("hidden_width");
    a.feature_dim = j.at("feature_dim");
    a.head_hidden = j.at("head_hidden");
    a.channels = j.at("channels");
    a.dilations = j.at("dilations").get<std::vector<int>>();
    return a;
}

}  // namespace

void save_checkpoint(const ModelState& m, const std::string& path) {
    nlohmann::json header = {
        {"format", "impact-checkpoint-v1"},
        {"arch", arch_to_json(m.arch)},
        {"seed", m.seed},
        {"segments",
         {{"extractor", {0, m.arch.extractor_params()}},
          {"seen_head", {m.head_offset(Head::Seen), m.arch.head_params()}},
          {"unseen_head", {m.head_offset(Head::Unseen), m.arch.head_params()}}}},
        {"param_count", m.params.size()},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out << header.dump() << '\n';
    // Parameter payload: flat little-endian float64.
    out.write(reinterpret_cast<const char*>(m.params.data()),
              static_cast<std::streamsize>(m.params.size() * sizeof(double)));
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    ModelState m;
    m.arch = arch_from_json(header.at("arch"));
    m.seed = header.at("seed");
    const size_t n = header.at("param_count");
    m.params.assign(n, 0.0);
    in.read(reinterpret_cast<char*>(m.params.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != n * sizeof(double))
        throw std::runtime_error("truncated checkpoint payload: " + path);
    if (static_cast<int>(n) != m.arch.total_params())
        throw std::runtime_error("checkpoint parameter count does not match arch");
    return m;
}

}  // namespace impact
