"""Coupled multi-level sparse dictionary learning for synthesizing
high-resolution face images from low-resolution probes."""

from .dictlearn import DictLearnConfig, Dictionary, LevelResult, learn_level
from .errors import DeepsrError, FormatError, InputError, NumericalError
from .evaluate import CmcResult, evaluate_pipeline, identify, psnr, ssim
from .imaging import GrayImage, bicubic_resize, devectorize, load_image, save_image, vectorize
from .modelio import read_model, write_model
from .sparse import LassoConfig, sparse_encode, sparse_encode_batch, soft_threshold
from .synthesis import (
    SynthesisConfig,
    SynthesisModel,
    TrainResult,
    learn_mapping,
    synthesize,
    synthesize_batch,
    train,
)
from .dataset import (
    Manifest,
    ToyCorpusSpec,
    generate_toy_corpus,
    load_manifest,
    make_synthetic_probes,
    save_manifest,
)

__version__ = "0.1.0"
