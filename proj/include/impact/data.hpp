#pragma once

#include <string>
#include <vector>

#include "impact/types.hpp"

namespace impact {

// Deterministic synthetic corpus: noisy sinusoid normals plus five named
// anomaly transforms applied to a contiguous sub-segment.
std::vector<SeriesWindow> synth_generate(const SynthSpec& spec);

// CSV with header `t,dim_0,...,dim_{D-1},label`, rows time-ordered.
// A window is anomalous iff any timestep inside it is labeled 1.
std::vector<SeriesWindow> load_csv(const std::string& path, int dims, int length, int stride);

struct SplitOptions {
    Setting setting = Setting::General;
    int n_labeled = 10;
    double contamination_rate = 0.02;
    double val_fraction = 0.2;
    double test_fraction = 0.3;
    bool clean_validation = false;
    uint64_t seed = 0;
};

OpenSetSplit make_openset_split(const std::vector<SeriesWindow>& dataset,
                                const SplitOptions& opts);

void save_dataset(const std::vector<SeriesWindow>& windows, const std::string& path);
std::vector<SeriesWindow> load_dataset(const std::string& path);

void save_split(const OpenSetSplit& split, const std::string& path);
OpenSetSplit load_split(const std::string& path);

}  // namespace impact
