#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace impact {

enum class Provenance { Original, InjectedContaminant };

// One D x L time interval with its (possibly contaminated) label.
struct SeriesWindow {
    std::vector<double> values;  // row-major, dims * length
    int dims = 1;
    int length = 0;
    int label = 0;  // 0 normal, 1 anomaly
    std::optional<int> class_id;
    int64_t id = 0;
    Provenance provenance = Provenance::Original;

    double at(int dim, int t) const { return values[static_cast<size_t>(dim) * length + t]; }
    double& at(int dim, int t) { return values[static_cast<size_t>(dim) * length + t]; }
};

enum class Setting { General, Hard };

struct OpenSetSplit {
    std::vector<SeriesWindow> d_n;         // unlabeled-normal pool, contaminated
    std::vector<SeriesWindow> d_a;         // labeled anomalies
    std::vector<SeriesWindow> validation;  // carved from the contaminated training pool
    std::vector<SeriesWindow> test;
    Setting setting = Setting::General;
    std::set<int> seen_classes;
};

enum class AnomalyClass : int {
    Spike = 0,
    LevelShift = 1,
    FreqShift = 2,
    NoiseBurst = 3,
    ShapeWarp = 4,
};

std::string anomaly_class_name(int id);
std::optional<int> anomaly_class_from_name(const std::string& name);

struct SynthSpec {
    int n_normal = 200;
    int n_per_class = 30;
    int dims = 1;
    int length = 64;
    std::vector<int> anomaly_classes = {0, 1, 2};
    double base_amplitude = 1.0;
    double base_period = 16.0;
    double phase_jitter = 0.5;
    double noise_sd = 0.1;
    // Scales the magnitude of every anomaly distortion; 1.0 gives clearly
    // visible anomalies, smaller values make them subtler.
    double severity = 1.0;
    uint64_t seed = 0;
};

struct FeatureVector {
    std::vector<double> values;
};

// Feature-space sample (phi_i, y_i) used by the head-only influence math.
struct FeatureSample {
    std::vector<double> values;
    int label = 0;
    int64_t id = 0;
};

}  // namespace impact
