"""Growing dual-memory networks for class-incremental expression learning.

An episodic and a semantic recurrent GWR network learn one class per episode;
pseudo-rehearsal replay and feature-space imagination counter forgetting and
let the model answer for classes it has not seen yet.
"""

from .classes import CLASSES, LabeledSequence
from .datasets import SubjectDataset, SynthConfig, generate_synthetic, load_csv, save_csv, split
from .gwr import GwrNetwork, GwrParams, episodic_params, init_network, semantic_params
from .harness import ExperimentConfig, ImaginationConfig, run_experiment1, run_experiment2, run_order_sensitivity
from .imagination import OracleGenerator, TranslationModel, fit_translation
from .memory import DualMemory

__version__ = "0.1.0"

__all__ = [
    "CLASSES",
    "DualMemory",
    "ExperimentConfig",
    "GwrNetwork",
    "GwrParams",
    "ImaginationConfig",
    "LabeledSequence",
    "OracleGenerator",
    "SubjectDataset",
    "SynthConfig",
    "TranslationModel",
    "episodic_params",
    "fit_translation",
    "generate_synthetic",
    "init_network",
    "load_csv",
    "run_experiment1",
    "run_experiment2",
    "run_order_sensitivity",
    "save_csv",
    "semantic_params",
    "split",
]
