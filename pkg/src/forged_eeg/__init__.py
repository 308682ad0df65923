"""Forged-channel EEG images and a from-scratch CNN classifier.

Pipeline: recordings -> zero-phase band-pass (+ optional ICA cleaning) ->
2 s epochs -> three averaged channel groups -> SPWVD planes -> 3-plane
image -> CNN, evaluated with leave-one-subject-out cross-validation.
"""

from .core import ClassLabel, DatasetManifest, Epoch, ManifestEntry, Recording, epoch_recording, validate_recording
from .forge import ForgeConfig, ForgedChannelTransformer, ForgedImage, forge_epoch
from .losocv import LosocvReport, make_folds, run_losocv, subject_prediction
from .nn import ForgedCnnClassifier, TrainConfig, build_paper_cnn
from .preprocess import BandpassFilter, IcaCleaner
from .tfr import SpwvdConfig, spwvd

__version__ = "0.1.0"

__all__ = [
    "BandpassFilter",
    "ClassLabel",
    "DatasetManifest",
    "Epoch",
    "ForgeConfig",
    "ForgedChannelTransformer",
    "ForgedCnnClassifier",
    "ForgedImage",
    "IcaCleaner",
    "LosocvReport",
    "ManifestEntry",
    "Recording",
    "SpwvdConfig",
    "TrainConfig",
    "build_paper_cnn",
    "epoch_recording",
    "forge_epoch",
    "make_folds",
    "run_losocv",
    "spwvd",
    "subject_prediction",
    "validate_recording",
]
