"""Label enhancement by contrastive learning of feature and logical-label views."""

from .dataset import LeDataset, load_dataset, synth_generate
from .metrics import MetricReport, evaluate
from .objective import ConleConfig
from .trainer import TrainConfig, recover_all, train

__all__ = ["ConleConfig", "LeDataset", "MetricReport", "TrainConfig", "evaluate", "load_dataset",
           "recover_all", "synth_generate", "train"]
