"""Influence-guided open-set time-series anomaly detection.

Thin Python veneer over the C++ core. The extension module lives inside the
package when installed via pip, or next to it on PYTHONPATH when running
against a plain CMake build tree.
"""

try:
    from ._impact import *  # noqa: F401,F403
    from ._impact import __doc__ as _core_doc
except ImportError:  # plain build tree: extension is on PYTHONPATH
    from _impact import *  # noqa: F401,F403
    from _impact import __doc__ as _core_doc

__all__ = [
    "Setting", "Provenance", "PartitionTag", "Ablation",
    "ablation_name", "ablation_from_name",
    "SeriesWindow", "SynthSpec", "SplitOptions", "OpenSetSplit",
    "synth_generate", "load_csv", "make_openset_split",
    "save_dataset", "load_dataset", "save_split", "load_split",
    "Arch", "InfluenceConfig", "InfluenceEntry", "InfluenceReport",
    "TrainConfig", "TrainAudit", "TrainedModel", "SampleScore",
    "train", "score_sample", "score_windows", "point_scores",
    "save_trained", "load_trained",
    "SeenUnseenAuc", "DeconMetrics", "auc", "seen_unseen_auc", "decon_metrics",
]
