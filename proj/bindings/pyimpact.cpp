#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "impact/data.hpp"
#include "impact/eval.hpp"
#include "impact/influence.hpp"
#include "impact/trainer.hpp"

namespace py = pybind11;
using namespace impact;

PYBIND11_MODULE(_impact, m) {
    m.doc() = "Influence-guided open-set time-series anomaly detection";

    py::enum_<Setting>(m, "Setting")
        .value("General", Setting::General)
        .value("Hard", Setting::Hard);

    py::enum_<Provenance>(m, "Provenance")
        .value("Original", Provenance::Original)
        .value("InjectedContaminant", Provenance::InjectedContaminant);

    py::enum_<PartitionTag>(m, "PartitionTag")
        .value("Contaminated", PartitionTag::Contaminated)
        .value("Reference", PartitionTag::Reference)
        .value("Clean", PartitionTag::Clean)
        .value("PerturbCandidate", PartitionTag::PerturbCandidate)
        .value("LabeledAnomaly", PartitionTag::LabeledAnomaly);

    py::enum_<Ablation>(m, "Ablation")
        .value("NONE", Ablation::None)
        .value("NoFlip", Ablation::NoFlip)
        .value("KeepConUnflipped", Ablation::KeepConUnflipped)
        .value("NoUnseenHead", Ablation::NoUnseenHead)
        .value("NoFeatureScore", Ablation::NoFeatureScore)
        .value("RandomRef", Ablation::RandomRef)
        .value("RandomFlip", Ablation::RandomFlip)
        .value("RandomPerturb", Ablation::RandomPerturb);
    m.def("ablation_name", &ablation_name);
    m.def("ablation_from_name", &ablation_from_name);

    py::class_<SeriesWindow>(m, "SeriesWindow")
        .def(py::init<>())
        .def_readwrite("values", &SeriesWindow::values)
        .def_readwrite("dims", &SeriesWindow::dims)
        .def_readwrite("length", &SeriesWindow::length)
        .def_readwrite("label", &SeriesWindow::label)
        .def_readwrite("class_id", &SeriesWindow::class_id)
        .def_readwrite("id", &SeriesWindow::id)
        .def_readwrite("provenance", &SeriesWindow::provenance)
        .def("at", py::overload_cast<int, int>(&SeriesWindow::at, py::const_));

    py::class_<SynthSpec>(m, "SynthSpec")
        .def(py::init<>())
        .def_readwrite("n_normal", &SynthSpec::n_normal)
        .def_readwrite("n_per_class", &SynthSpec::n_per_class)
        .def_readwrite("dims", &SynthSpec::dims)
        .def_readwrite("length", &SynthSpec::length)
        .def_readwrite("anomaly_classes", &SynthSpec::anomaly_classes)
        .def_readwrite("base_amplitude", &SynthSpec::base_amplitude)
        .def_readwrite("base_period", &SynthSpec::base_period)
        .def_readwrite("phase_jitter", &SynthSpec::phase_jitter)
        .def_readwrite("noise_sd", &SynthSpec::noise_sd)
        .def_readwrite("severity", &SynthSpec::severity)
        .def_readwrite("seed", &SynthSpec::seed);

    py::class_<SplitOptions>(m, "SplitOptions")
        .def(py::init<>())
        .def_readwrite("setting", &SplitOptions::setting)
        .def_readwrite("n_labeled", &SplitOptions::n_labeled)
        .def_readwrite("contamination_rate", &SplitOptions::contamination_rate)
        .def_readwrite("val_fraction", &SplitOptions::val_fraction)
        .def_readwrite("test_fraction", &SplitOptions::test_fraction)
        .def_readwrite("clean_validation", &SplitOptions::clean_validation)
        .def_readwrite("seed", &SplitOptions::seed);

    py::class_<OpenSetSplit>(m, "OpenSetSplit")
        .def(py::init<>())
        .def_readwrite("d_n", &OpenSetSplit::d_n)
        .def_readwrite("d_a", &OpenSetSplit::d_a)
        .def_readwrite("validation", &OpenSetSplit::validation)
        .def_readwrite("test", &OpenSetSplit::test)
        .def_readwrite("setting", &OpenSetSplit::setting)
        .def_readwrite("seen_classes", &OpenSetSplit::seen_classes);

    m.def("synth_generate", &synth_generate);
    m.def("load_csv", &load_csv, py::arg("path"), py::arg("dims"), py::arg("length"),
          py::arg("stride"));
    m.def("make_openset_split", &make_openset_split);
    m.def("save_dataset", &save_dataset);
    m.def("load_dataset", &load_dataset);
    m.def("save_split", &save_split);
    m.def("load_split", &load_split);

    py::class_<Arch>(m, "Arch")
        .def(py::init<>())
        .def_readwrite("input_dims", &Arch::input_dims)
        .def_readwrite("window_len", &Arch::window_len)
        .def_readwrite("hidden_width", &Arch::hidden_width)
        .def_readwrite("feature_dim", &Arch::feature_dim)
        .def_readwrite("head_hidden", &Arch::head_hidden)
        .def_readwrite("channels", &Arch::channels)
        .def_readwrite("dilations", &Arch::dilations)
        .def("total_params", &Arch::total_params);

    py::class_<InfluenceConfig>(m, "InfluenceConfig")
        .def(py::init<>())
        .def_readwrite("damping", &InfluenceConfig::damping)
        .def_readwrite("cg_tol", &InfluenceConfig::cg_tol)
        .def_readwrite("cg_max_iter", &InfluenceConfig::cg_max_iter)
        .def_readwrite("hessian_sample_cap", &InfluenceConfig::hessian_sample_cap)
        .def_readwrite("validation_balance", &InfluenceConfig::validation_balance);

    py::class_<InfluenceEntry>(m, "InfluenceEntry")
        .def_readonly("id", &InfluenceEntry::id)
        .def_readonly("influence", &InfluenceEntry::influence)
        .def_readonly("partition", &InfluenceEntry::partition)
        .def_readonly("provenance", &InfluenceEntry::provenance);

    py::class_<InfluenceReport>(m, "InfluenceReport")
        .def_readonly("entries", &InfluenceReport::entries)
        .def_readonly("stest_residual", &InfluenceReport::stest_residual)
        .def_readonly("cg_converged", &InfluenceReport::cg_converged)
        .def_readonly("damping", &InfluenceReport::damping)
        .def_readonly("validation_size", &InfluenceReport::validation_size)
        .def_readonly("reference_shortfall", &InfluenceReport::reference_shortfall);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("arch", &TrainConfig::arch)
        .def_readwrite("epochs_total", &TrainConfig::epochs_total)
        .def_readwrite("epochs_initial", &TrainConfig::epochs_initial)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("lambda_unseen", &TrainConfig::lambda_unseen)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("alpha", &TrainConfig::alpha)
        .def_readwrite("margin", &TrainConfig::margin)
        .def_readwrite("influence", &TrainConfig::influence)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("prior_seed", &TrainConfig::prior_seed)
        .def_readwrite("ablation", &TrainConfig::ablation)
        .def_readwrite("signed_dev", &TrainConfig::signed_dev)
        .def_readwrite("zscore_combine", &TrainConfig::zscore_combine)
        .def_readwrite("refresh_per_batch", &TrainConfig::refresh_per_batch)
        .def_readwrite("unseen_both_heads", &TrainConfig::unseen_both_heads)
        .def_readwrite("balanced_batches", &TrainConfig::balanced_batches)
        .def_readwrite("warm_start_unseen", &TrainConfig::warm_start_unseen)
        .def("validate", &TrainConfig::validate);

    py::class_<TrainAudit>(m, "TrainAudit")
        .def_readonly("flipped_ids", &TrainAudit::flipped_ids)
        .def_readonly("dropped_ids", &TrainAudit::dropped_ids)
        .def_readonly("reference_ids", &TrainAudit::reference_ids)
        .def_readonly("perturbed_count", &TrainAudit::perturbed_count)
        .def_readonly("predicted_flip_delta", &TrainAudit::predicted_flip_delta)
        .def_readonly("predicted_perturb_delta", &TrainAudit::predicted_perturb_delta)
        .def_readonly("final_stest_residual", &TrainAudit::final_stest_residual)
        .def_readonly("cg_converged", &TrainAudit::cg_converged)
        .def_readonly("reference_fallback", &TrainAudit::reference_fallback)
        .def_readonly("epoch_val_risk", &TrainAudit::epoch_val_risk)
        .def_readonly("last_report", &TrainAudit::last_report);

    py::class_<TrainedModel>(m, "TrainedModel")
        .def_readonly("config", &TrainedModel::config)
        .def_readonly("ref_feature_mean", &TrainedModel::ref_feature_mean)
        .def_readonly("audit", &TrainedModel::audit);

    py::class_<SampleScore>(m, "SampleScore")
        .def_readonly("s_m", &SampleScore::s_m)
        .def_readonly("s_f", &SampleScore::s_f)
        .def_readonly("s", &SampleScore::s);

    m.def("train", &impact_train, py::arg("split"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("score_sample", &score_sample);
    m.def("score_windows", &score_windows, py::call_guard<py::gil_scoped_release>());
    m.def("point_scores", &point_scores, py::call_guard<py::gil_scoped_release>());
    m.def("save_trained", &save_trained);
    m.def("load_trained", &load_trained);

    py::class_<SeenUnseenAuc>(m, "SeenUnseenAuc")
        .def_readonly("overall", &SeenUnseenAuc::overall)
        .def_readonly("seen", &SeenUnseenAuc::seen)
        .def_readonly("unseen", &SeenUnseenAuc::unseen);

    py::class_<DeconMetrics>(m, "DeconMetrics")
        .def_readonly("true_contaminants", &DeconMetrics::true_contaminants)
        .def_readonly("flagged", &DeconMetrics::flagged)
        .def_readonly("flagged_true", &DeconMetrics::flagged_true)
        .def_readonly("precision", &DeconMetrics::precision)
        .def_readonly("recall", &DeconMetrics::recall)
        .def_readonly("mean_influence_contaminant", &DeconMetrics::mean_influence_contaminant)
        .def_readonly("mean_influence_normal", &DeconMetrics::mean_influence_normal);

    m.def("auc", &auc);
    m.def("seen_unseen_auc", &seen_unseen_auc);
    m.def("decon_metrics", &decon_metrics);
}
