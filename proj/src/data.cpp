#include "impact/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace impact {

namespace {
using json = nlohmann::json;

const char* kClassNames[] = {"spike", "level_shift", "freq_shift", "noise_burst", "shape_warp"};

std::vector<double> base_signal(const SynthSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-spec.phase_jitter, spec.phase_jitter);
    std::normal_distribution<double> noise(0.0, spec.noise_sd);
    std::vector<double> v(static_cast<size_t>(spec.dims) * spec.length);
    for (int d = 0; d < spec.dims; ++d) {
        double phase = 2.0 * std::numbers::pi * d / std::max(1, spec.dims) + jitter(rng);
        for (int t = 0; t < spec.length; ++t) {
            double s = spec.base_amplitude *
                       std::sin(2.0 * std::numbers::pi * t / spec.base_period + phase);
            v[static_cast<size_t>(d) * spec.length + t] = s + noise(rng);
        }
    }
    return v;
}

// Contiguous anomalous sub-segment covering at least 10% of the window.
std::pair<int, int> pick_segment(const SynthSpec& spec, std::mt19937_64& rng) {
    int min_len = std::max(1, (spec.length + 9) / 10);
    int max_len = std::max(min_len, spec.length / 2);
    std::uniform_int_distribution<int> len_dist(min_len, max_len);
    int len = len_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, spec.length - len);
    int start = start_dist(rng);
    return {start, start + len};
}

void apply_anomaly(SeriesWindow& w, int cls, const SynthSpec& spec, std::mt19937_64& rng) {
    auto [s0, s1] = pick_segment(spec, rng);
    double A = spec.base_amplitude;
    double sev = spec.severity;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    switch (static_cast<AnomalyClass>(cls)) {
        case AnomalyClass::Spike: {
            // Impulses sized to clear the normal range (amplitude + noise tail)
            // by a wide margin, so spikes dominate the normal 99th percentile.
            int n_spikes = 1 + static_cast<int>(u01(rng) * 3.0);
            std::uniform_int_distribution<int> pos(s0, s1 - 1);
            for (int k = 0; k < n_spikes; ++k) {
                int t = pos(rng);
                double mag = sev * A * (4.0 + 3.0 * u01(rng));
                double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
                for (int d = 0; d < w.dims; ++d) w.at(d, t) += sign * mag;
            }
            break;
        }
        case AnomalyClass::LevelShift: {
            double shift = sev * A * (1.5 + 1.5 * u01(rng)) * (u01(rng) < 0.5 ? -1.0 : 1.0);
            for (int d = 0; d < w.dims; ++d)
                for (int t = s0; t < s1; ++t) w.at(d, t) += shift;
            break;
        }
        case AnomalyClass::FreqShift: {
            double factor = 1.0 + sev * (1.5 + 1.5 * u01(rng));  // segment oscillates faster
            for (int d = 0; d < w.dims; ++d) {
                double phase = 2.0 * std::numbers::pi * d / std::max(1, w.dims);
                for (int t = s0; t < s1; ++t)
                    w.at(d, t) = A * std::sin(2.0 * std::numbers::pi * t * factor /
                                                  spec.base_period + phase);
            }
            break;
        }
        case AnomalyClass::NoiseBurst: {
            std::normal_distribution<double> burst(0.0, sev * (6.0 * spec.noise_sd + 0.3 * A));
            for (int d = 0; d < w.dims; ++d)
                for (int t = s0; t < s1; ++t) w.at(d, t) += burst(rng);
            break;
        }
        case AnomalyClass::ShapeWarp: {
            // Replace the segment with a rectified, flattened version of the
            // carrier: same scale and period but a different morphology.
            for (int d = 0; d < w.dims; ++d) {
                double phase = 2.0 * std::numbers::pi * d / std::max(1, w.dims);
                for (int t = s0; t < s1; ++t) {
                    double s = std::sin(2.0 * std::numbers::pi * t / spec.base_period + phase);
                    double warped = A * (2.0 * std::abs(s) - 1.0);
                    w.at(d, t) = (1.0 - sev) * w.at(d, t) + sev * warped;
                }
            }
            break;
        }
        default:
            throw std::invalid_argument("unknown anomaly class id " + std::to_string(cls));
    }
}

json window_to_json(const SeriesWindow& w) {
    json j;
    j["id"] = w.id;
    j["dims"] = w.dims;
    j["length"] = w.length;
    j["label"] = w.label;
    if (w.class_id) j["class_id"] = *w.class_id;
    j["provenance"] = w.provenance == Provenance::InjectedContaminant ? "injected_contaminant"
                                                                      : "original";
    j["values"] = w.values;
    return j;
}

SeriesWindow window_from_json(const json& j) {
    SeriesWindow w;
    w.id = j.at("id").get<int64_t>();
    w.dims = j.at("dims").get<int>();
    w.length = j.at("length").get<int>();
    w.label = j.at("label").get<int>();
    if (j.contains("class_id") && !j.at("class_id").is_null())
        w.class_id = j.at("class_id").get<int>();
    w.provenance = j.value("provenance", "original") == std::string("injected_contaminant")
                       ? Provenance::InjectedContaminant
                       : Provenance::Original;
    w.values = j.at("values").get<std::vector<double>>();
    if (w.values.size() != static_cast<size_t>(w.dims) * w.length)
        throw std::runtime_error("window " + std::to_string(w.id) + ": value count " +
                                 std::to_string(w.values.size()) + " != dims*length");
    return w;
}

}  // namespace

std::string anomaly_class_name(int id) {
    if (id < 0 || id >= static_cast<int>(std::size(kClassNames)))
        throw std::invalid_argument("unknown anomaly class id " + std::to_string(id));
    return kClassNames[id];
}

std::optional<int> anomaly_class_from_name(const std::string& name) {
    for (int i = 0; i < static_cast<int>(std::size(kClassNames)); ++i)
        if (name == kClassNames[i]) return i;
    return std::nullopt;
}

std::vector<SeriesWindow> synth_generate(const SynthSpec& spec) {
    if (spec.n_normal < 0 || spec.n_per_class < 0)
        throw std::invalid_argument("negative sample counts");
    if (spec.dims <= 0 || spec.length < 10)
        throw std::invalid_argument("need dims >= 1 and length >= 10");
    for (int c : spec.anomaly_classes) anomaly_class_name(c);  // validates ids

    std::mt19937_64 rng(spec.seed ^ 0xda3e39cb94b95bdbULL);
    std::vector<SeriesWindow> out;
    out.reserve(spec.n_normal + spec.anomaly_classes.size() * spec.n_per_class);
    int64_t next_id = 0;
    for (int i = 0; i < spec.n_normal; ++i) {
        SeriesWindow w;
        w.dims = spec.dims;
        w.length = spec.length;
        w.values = base_signal(spec, rng);
        w.label = 0;
        w.id = next_id++;
        out.push_back(std::move(w));
    }
    for (int cls : spec.anomaly_classes) {
        for (int i = 0; i < spec.n_per_class; ++i) {
            SeriesWindow w;
            w.dims = spec.dims;
            w.length = spec.length;
            w.values = base_signal(spec, rng);
            w.label = 1;
            w.class_id = cls;
            w.id = next_id++;
            apply_anomaly(w, cls, spec, rng);
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<SeriesWindow> load_csv(const std::string& path, int dims, int length, int stride) {
    if (dims <= 0 || length <= 0 || stride <= 0)
        throw std::invalid_argument("dims, length, stride must be positive");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    {
        std::ostringstream expect;
        expect << "t";
        for (int d = 0; d < dims; ++d) expect << ",dim_" << d;
        expect << ",label";
        // tolerate trailing carriage return from CRLF files
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != expect.str())
            throw std::runtime_error(path + ": header row 1 is '" + line + "', expected '" +
                                     expect.str() + "'");
    }

    std::vector<std::vector<double>> cols(dims);
    std::vector<int> labels;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != static_cast<size_t>(dims) + 2)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " fields, expected " +
                                     std::to_string(dims + 2));
        try {
            for (int d = 0; d < dims; ++d) cols[d].push_back(std::stod(cells[d + 1]));
            int lab = std::stoi(cells.back());
            if (lab != 0 && lab != 1) throw std::invalid_argument("label");
            labels.push_back(lab);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": row " + std::to_string(row) +
                                     ": cannot parse values/label from '" + line + "'");
        }
    }
    int T = static_cast<int>(labels.size());
    if (T < length)
        throw std::runtime_error(path + ": only " + std::to_string(T) +
                                 " timesteps, need at least " + std::to_string(length));

    std::vector<SeriesWindow> out;
    int64_t next_id = 0;
    for (int start = 0; start + length <= T; start += stride) {
        SeriesWindow w;
        w.dims = dims;
        w.length = length;
        w.values.resize(static_cast<size_t>(dims) * length);
        w.label = 0;
        for (int d = 0; d < dims; ++d)
            for (int t = 0; t < length; ++t) w.at(d, t) = cols[d][start + t];
        for (int t = 0; t < length; ++t)
            if (labels[start + t] == 1) { w.label = 1; break; }
        w.id = next_id++;
        out.push_back(std::move(w));
    }
    return out;
}

OpenSetSplit make_openset_split(const std::vector<SeriesWindow>& dataset,
                                const SplitOptions& opts) {
    if (opts.n_labeled <= 0) throw std::invalid_argument("n_labeled must be positive");
    if (opts.contamination_rate < 0.0 || opts.contamination_rate > 0.1)
        throw std::invalid_argument("contamination_rate must be in [0, 0.1]");
    if (opts.val_fraction <= 0.0 || opts.val_fraction >= 1.0 || opts.test_fraction <= 0.0 ||
        opts.test_fraction >= 1.0)
        throw std::invalid_argument("val_fraction and test_fraction must be in (0, 1)");

    std::mt19937_64 rng(opts.seed ^ 0xa0761d6478bd642fULL);
    std::vector<SeriesWindow> normals;
    std::map<int, std::vector<SeriesWindow>> by_class;
    for (const auto& w : dataset) {
        if (w.label == 0) {
            normals.push_back(w);
        } else {
            if (!w.class_id)
                throw std::invalid_argument("anomaly window " + std::to_string(w.id) +
                                            " lacks a class id");
            by_class[*w.class_id].push_back(w);
        }
    }
    if (by_class.empty()) throw std::invalid_argument("dataset has no anomalies");
    std::shuffle(normals.begin(), normals.end(), rng);
    for (auto& [cls, vec] : by_class) std::shuffle(vec.begin(), vec.end(), rng);

    // Seen classes: all of them in the general setting, exactly one otherwise.
    std::vector<int> class_ids;
    for (const auto& [cls, vec] : by_class) class_ids.push_back(cls);
    OpenSetSplit split;
    split.setting = opts.setting;
    if (opts.setting == Setting::General) {
        split.seen_classes.insert(class_ids.begin(), class_ids.end());
    } else {
        if (class_ids.size() < 2)
            throw std::invalid_argument("hard setting needs at least 2 anomaly classes");
        std::uniform_int_distribution<size_t> pick(0, class_ids.size() - 1);
        split.seen_classes.insert(class_ids[pick(rng)]);
    }

    // Test normals first so the training pool is fixed before contamination.
    size_t n_test_norm = static_cast<size_t>(opts.test_fraction * normals.size());
    if (n_test_norm == 0 || n_test_norm >= normals.size())
        throw std::invalid_argument("not enough normal windows to form both train and test");
    std::vector<SeriesWindow> train_normals(normals.begin(),
                                            normals.end() - static_cast<long>(n_test_norm));
    split.test.assign(normals.end() - static_cast<long>(n_test_norm), normals.end());

    // Labeled anomalies: n_labeled per seen class; a few extra go to
    // validation so the validation risk carries anomaly signal, mirroring a
    // random carve-out of a training set that contains labeled anomalies.
    int n_val_anom = static_cast<int>(std::ceil(opts.val_fraction * opts.n_labeled));
    for (int cls : split.seen_classes) {
        auto& pool = by_class[cls];
        int need = opts.n_labeled + n_val_anom + 1;  // +1 kept for test coverage
        if (static_cast<int>(pool.size()) < need)
            throw std::invalid_argument(
                "class " + anomaly_class_name(cls) + " has " + std::to_string(pool.size()) +
                " anomalies, need at least " + std::to_string(need));
        for (int i = 0; i < opts.n_labeled; ++i) split.d_a.push_back(pool[i]);
        for (int i = 0; i < n_val_anom; ++i)
            split.validation.push_back(pool[opts.n_labeled + i]);
        pool.erase(pool.begin(), pool.begin() + opts.n_labeled + n_val_anom);
    }

    // Contamination: seen-class anomalies relabeled 0, provenance preserved.
    size_t m = train_normals.size();
    size_t n_inject =
        static_cast<size_t>(std::ceil(opts.contamination_rate * static_cast<double>(m)));
    if (n_inject > 0) {
        std::vector<SeriesWindow> inject_pool;
        for (int cls : split.seen_classes) {
            auto& pool = by_class[cls];
            size_t keep_for_test = std::max<size_t>(1, pool.size() / 2);
            for (size_t i = keep_for_test; i < pool.size(); ++i)
                inject_pool.push_back(pool[i]);
            pool.resize(keep_for_test);
        }
        if (inject_pool.size() < n_inject)
            throw std::invalid_argument("need " + std::to_string(n_inject) +
                                        " seen-class anomalies for contamination, only " +
                                        std::to_string(inject_pool.size()) + " spare");
        std::shuffle(inject_pool.begin(), inject_pool.end(), rng);
        for (size_t i = 0; i < n_inject; ++i) {
            SeriesWindow c = inject_pool[i];
            c.label = 0;
            c.provenance = Provenance::InjectedContaminant;
            train_normals.push_back(std::move(c));
        }
        std::shuffle(train_normals.begin(), train_normals.end(), rng);
    }

    // Validation normals are carved after contamination, so injected
    // contaminants can land there unless explicitly excluded.
    size_t n_val = static_cast<size_t>(opts.val_fraction * train_normals.size());
    if (n_val == 0 || n_val >= train_normals.size())
        throw std::invalid_argument("training pool too small for the validation carve-out");
    if (opts.clean_validation) {
        std::stable_partition(train_normals.begin(), train_normals.end(),
                              [](const SeriesWindow& w) {
                                  return w.provenance == Provenance::InjectedContaminant;
                              });
    }
    split.validation.insert(split.validation.end(),
                            train_normals.end() - static_cast<long>(n_val),
                            train_normals.end());
    train_normals.resize(train_normals.size() - n_val);
    split.d_n = std::move(train_normals);

    // Remaining anomalies (all of them for unseen classes) go to test.
    for (auto& [cls, pool] : by_class)
        for (auto& w : pool) split.test.push_back(std::move(w));

    return split;
}

void save_dataset(const std::vector<SeriesWindow>& windows, const std::string& path) {
    json j;
    j["format"] = "impact-dataset-v1";
    j["windows"] = json::array();
    for (const auto& w : windows) j["windows"].push_back(window_to_json(w));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump();
}

std::vector<SeriesWindow> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j = json::parse(in);
    if (j.value("format", "") != std::string("impact-dataset-v1"))
        throw std::runtime_error(path + ": not an impact-dataset-v1 file");
    std::vector<SeriesWindow> out;
    for (const auto& jw : j.at("windows")) out.push_back(window_from_json(jw));
    return out;
}

void save_split(const OpenSetSplit& split, const std::string& path) {
    json j;
    j["format"] = "impact-split-v1";
    j["setting"] = split.setting == Setting::Hard ? "hard" : "general";
    j["seen_classes"] = std::vector<int>(split.seen_classes.begin(), split.seen_classes.end());
    auto dump = [](const std::vector<SeriesWindow>& v) {
        json arr = json::array();
        for (const auto& w : v) arr.push_back(window_to_json(w));
        return arr;
    };
    j["d_n"] = dump(split.d_n);
    j["d_a"] = dump(split.d_a);
    j["validation"] = dump(split.validation);
    j["test"] = dump(split.test);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump();
}

OpenSetSplit load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j = json::parse(in);
    if (j.value("format", "") != std::string("impact-split-v1"))
        throw std::runtime_error(path + ": not an impact-split-v1 file");
    OpenSetSplit split;
    split.setting = j.at("setting").get<std::string>() == "hard" ? Setting::Hard
                                                                 : Setting::General;
    for (int c : j.at("seen_classes").get<std::vector<int>>()) split.seen_classes.insert(c);
    auto parse = [](const json& arr) {
        std::vector<SeriesWindow> v;
        for (const auto& jw : arr) v.push_back(window_from_json(jw));
        return v;
    };
    split.d_n = parse(j.at("d_n"));
    split.d_a = parse(j.at("d_a"));
    split.validation = parse(j.at("validation"));
    split.test = parse(j.at("test"));
    return split;
}

}  // namespace impact
