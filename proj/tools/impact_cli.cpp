#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "impact/data.hpp"
#include "impact/eval.hpp"
#include "impact/trainer.hpp"

namespace {
using json = nlohmann::json;
using namespace impact;

// Every subcommand ends by writing a manifest next to its primary output so a
// run can be reproduced from its artifacts alone.
void write_manifest(const std::string& command, const json& args,
                    const std::vector<std::string>& outputs, const std::string& path) {
    json j;
    j["format"] = "impact-run-v1";
    j["command"] = command;
    j["args"] = args;
    j["outputs"] = outputs;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

struct TrainCliOpts {
    std::string data_path, out_path, split_out, config_path;
    std::string setting = "general";
    std::string ablation = "none";
    double contamination = 0.02;
    int n_labeled = 10;
    uint64_t seed = 0;
    bool clean_validation = false;
    TrainConfig cfg;
};

void apply_config_file(TrainCliOpts& o) {
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot open config " + o.config_path);
    json j = json::parse(in);
    auto& c = o.cfg;
    c.epochs_total = j.value("epochs_total", c.epochs_total);
    c.epochs_initial = j.value("epochs_initial", c.epochs_initial);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lambda_unseen = j.value("lambda_unseen", c.lambda_unseen);
    c.k = j.value("k", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.margin = j.value("margin", c.margin);
    c.influence.damping = j.value("damping", c.influence.damping);
    c.influence.cg_tol = j.value("cg_tol", c.influence.cg_tol);
    c.influence.cg_max_iter = j.value("cg_max_iter", c.influence.cg_max_iter);
    c.influence.hessian_sample_cap =
        j.value("hessian_sample_cap", c.influence.hessian_sample_cap);
    c.arch.hidden_width = j.value("hidden_width", c.arch.hidden_width);
    c.arch.feature_dim = j.value("feature_dim", c.arch.feature_dim);
    c.arch.head_hidden = j.value("head_hidden", c.arch.head_hidden);
    c.arch.channels = j.value("channels", c.arch.channels);
    if (j.contains("dilations")) c.arch.dilations = j.at("dilations").get<std::vector<int>>();
    o.setting = j.value("setting", o.setting);
    o.contamination = j.value("contamination", o.contamination);
    o.n_labeled = j.value("n_labeled", o.n_labeled);
}

int run_gen_data(const std::string& out_path, const SynthSpec& spec) {
    auto windows = synth_generate(spec);
    save_dataset(windows, out_path);
    json args = {{"seed", spec.seed},
                 {"n_normal", spec.n_normal},
                 {"n_per_class", spec.n_per_class},
                 {"dims", spec.dims},
                 {"length", spec.length},
                 {"anomaly_classes", spec.anomaly_classes},
                 {"noise_sd", spec.noise_sd}};
    write_manifest("gen-data", args, {out_path}, out_path + ".manifest.json");
    std::cout << "wrote " << windows.size() << " windows to " << out_path << "\n";
    return 0;
}

int run_train(TrainCliOpts o) {
    apply_config_file(o);
    auto dataset = load_dataset(o.data_path);

    SplitOptions sopt;
    sopt.setting = o.setting == "hard" ? Setting::Hard : Setting::General;
    sopt.contamination_rate = o.contamination;
    sopt.n_labeled = o.n_labeled;
    sopt.clean_validation = o.clean_validation;
    sopt.seed = o.seed;
    auto split = make_openset_split(dataset, sopt);

    o.cfg.seed = o.seed;
    o.cfg.ablation = ablation_from_name(o.ablation);
    if (!dataset.empty()) {
        o.cfg.arch.input_dims = dataset.front().dims;
        o.cfg.arch.window_len = dataset.front().length;
    }
    auto tm = impact_train(split, o.cfg);
    save_trained(tm, o.out_path);
    std::vector<std::string> outputs{o.out_path};
    if (!o.split_out.empty()) {
        save_split(split, o.split_out);
        outputs.push_back(o.split_out);
    }
    json args = {{"data", o.data_path},      {"setting", o.setting},
                 {"seed", o.seed},           {"ablation", o.ablation},
                 {"contamination", o.contamination}, {"n_labeled", o.n_labeled},
                 {"clean_validation", o.clean_validation},
                 {"refresh_per_batch", o.cfg.refresh_per_batch},
                 {"zscore_combine", o.cfg.zscore_combine},
                 {"signed_dev", o.cfg.signed_dev}};
    write_manifest("train", args, outputs, o.out_path + ".manifest.json");
    std::cout << "trained model saved to " << o.out_path << " (flipped "
              << tm.audit.flipped_ids.size() << ", references "
              << tm.audit.reference_ids.size() << ", perturbed "
              << tm.audit.perturbed_count << ")\n";
    return 0;
}

int run_score(const std::string& model_path, const std::string& data_path,
              const std::string& out_path) {
    auto tm = load_trained(model_path);
    auto windows = load_dataset(data_path);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "id,score,model_score,feature_score\n";
    for (const auto& w : windows) {
        auto s = score_sample(tm, w);
        out << w.id << ',' << s.s << ',' << s.s_m << ',' << s.s_f << "\n";
    }
    json args = {{"model", model_path}, {"data", data_path}};
    write_manifest("score", args, {out_path}, out_path + ".manifest.json");
    std::cout << "scored " << windows.size() << " windows to " << out_path << "\n";
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& split_path,
                 const std::string& out_path, const std::string& csv_path) {
    auto tm = load_trained(model_path);
    auto split = load_split(split_path);
    auto scores = score_windows(tm, split.test);

    EvalReport report;
    report.auc = seen_unseen_auc(scores, split.test, split.seen_classes);
    report.decon = decon_metrics(tm.audit.last_report);
    report.setting = split.setting == Setting::Hard ? "hard" : "general";
    report.seed = tm.config.seed;
    report.ablation = ablation_name(tm.config.ablation);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << report.to_json() << "\n";
    std::vector<std::string> outputs{out_path};
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw std::runtime_error("cannot write " + csv_path);
        csv << EvalReport::csv_header() << "\n" << report.to_csv_row() << "\n";
        outputs.push_back(csv_path);
    }
    json args = {{"model", model_path}, {"split", split_path}};
    write_manifest("evaluate", args, outputs, out_path + ".manifest.json");
    std::cout << report.to_json() << "\n";
    return 0;
}

int run_audit(const std::string& model_path, const std::string& out_path) {
    auto tm = load_trained(model_path);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "id,influence,partition,provenance\n";
    for (const auto& e : tm.audit.last_report.entries) {
        out << e.id << ',' << e.influence << ',' << partition_name(e.partition) << ','
            << (e.provenance == Provenance::InjectedContaminant ? "injected_contaminant"
                                                                : "original")
            << "\n";
    }
    json args = {{"model", model_path}};
    write_manifest("audit-influence", args, {out_path}, out_path + ".manifest.json");
    std::cout << "wrote influence audit for " << tm.audit.last_report.entries.size()
              << " samples to " << out_path << "\n";
    std::cout << "predicted flip delta: " << tm.audit.predicted_flip_delta
              << ", predicted perturb delta: " << tm.audit.predicted_perturb_delta << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Influence-guided open-set time-series anomaly detection"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic window dataset");
    SynthSpec spec;
    std::string gen_out = "dataset.json";
    std::vector<std::string> class_names;
    gen->add_option("--out", gen_out, "Output dataset path");
    gen->add_option("--seed", spec.seed, "RNG seed");
    gen->add_option("--n-normal", spec.n_normal, "Normal window count");
    gen->add_option("--n-per-class", spec.n_per_class, "Anomaly windows per class");
    gen->add_option("--dims", spec.dims, "Series dimensionality");
    gen->add_option("--length", spec.length, "Window length");
    gen->add_option("--classes", class_names,
                    "Anomaly classes (spike level_shift freq_shift noise_burst shape_warp)");
    gen->add_option("--noise-sd", spec.noise_sd, "Base noise standard deviation");

    // train
    auto* train = app.add_subcommand("train", "Split a dataset and train a model");
    TrainCliOpts t;
    train->add_option("--data", t.data_path, "Dataset path")->required();
    train->add_option("--out", t.out_path, "Model output path")->required();
    train->add_option("--split-out", t.split_out, "Also save the split here");
    train->add_option("--config", t.config_path, "JSON config overriding defaults");
    train->add_option("--seed", t.seed, "RNG seed");
    train->add_option("--setting", t.setting, "general or hard")
        ->check(CLI::IsMember({"general", "hard"}));
    train->add_option("--ablate", t.ablation, "Ablation variant");
    train->add_option("--contamination", t.contamination, "Contamination rate in [0, 0.1]");
    train->add_option("--n-labeled", t.n_labeled, "Labeled anomalies per seen class");
    train->add_flag("--clean-validation", t.clean_validation,
                    "Keep injected contaminants out of validation");
    train->add_flag("--refresh-per-batch", t.cfg.refresh_per_batch,
                    "Refresh influence state every mini-batch");
    train->add_flag("--zscore-combine", t.cfg.zscore_combine,
                    "Z-score the two score terms before combining");
    train->add_flag("--signed-dev", t.cfg.signed_dev, "Signed deviation objective");
    train->add_option("--epochs", t.cfg.epochs_total, "Total epochs");
    train->add_option("--epochs-initial", t.cfg.epochs_initial, "Warm-up epochs");
    train->add_option("--lr", t.cfg.lr, "Learning rate");
    train->add_option("--batch", t.cfg.batch_size, "Batch size");
    train->add_option("--k", t.cfg.k, "Reference/perturbation set size per batch");
    train->add_option("--alpha", t.cfg.alpha, "Perturbation step size");
    train->add_option("--lambda", t.cfg.lambda_unseen, "Unseen-risk weight");

    // score
    auto* score = app.add_subcommand("score", "Score dataset windows with a trained model");
    std::string s_model, s_data, s_out = "scores.csv";
    score->add_option("--model", s_model, "Trained model path")->required();
    score->add_option("--data", s_data, "Dataset path")->required();
    score->add_option("--out", s_out, "Output CSV path");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Evaluate a trained model on a saved split");
    std::string e_model, e_split, e_out = "report.json", e_csv;
    eval->add_option("--model", e_model, "Trained model path")->required();
    eval->add_option("--split", e_split, "Split path (from train --split-out)")->required();
    eval->add_option("--out", e_out, "Report JSON path");
    eval->add_option("--csv", e_csv, "Optional report CSV path");

    // audit-influence
    auto* audit = app.add_subcommand("audit-influence", "Dump per-sample influence records");
    std::string a_model, a_out = "influence.csv";
    audit->add_option("--model", a_model, "Trained model path")->required();
    audit->add_option("--out", a_out, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 2 = usage error, 0 = help/version
    }

    try {
        if (gen->parsed()) {
            if (!class_names.empty()) {
                spec.anomaly_classes.clear();
                for (const auto& name : class_names) {
                    auto id = anomaly_class_from_name(name);
                    if (!id) throw std::invalid_argument("unknown anomaly class '" + name + "'");
                    spec.anomaly_classes.push_back(*id);
                }
            }
            return run_gen_data(gen_out, spec);
        }
        if (train->parsed()) return run_train(t);
        if (score->parsed()) return run_score(s_model, s_data, s_out);
        if (eval->parsed()) return run_evaluate(e_model, e_split, e_out, e_csv);
        if (audit->parsed()) return run_audit(a_model, a_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
