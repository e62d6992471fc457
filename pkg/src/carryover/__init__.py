"""Joint slot carryover for multi-turn dialogues.

Candidate slots from earlier turns are encoded together with the dialogue
context and one of three decoders decides which of them to carry into the
current turn: an independent per-slot classifier, a pointer network or a
self-attention (transformer) decoder. Everything runs on a small numpy
autodiff kernel in :mod:`carryover.tensor`.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import ingest_dstc2_like, parse_corpus, read_corpus, serialize_corpus, write_corpus
from .decoders import DecoderConfig, DecoderKind, Ordering, OrderingPolicy, Prediction
from .dialogue import (
    CandidateSlot,
    CarryoverInstance,
    Dialogue,
    Intent,
    Slot,
    Speaker,
    Utterance,
    build_dialogue,
    make_instance,
)
from .metrics import DSTC2, INTERNAL, EvalReport, corpus_eval, grid_eval, pair_consistency, prf1
from .model import CarryoverModel, EncoderConfig, ModelConfig
from .synth import SynthConfig, synth_generate
from .training import TrainConfig, TrainHistory, train

__version__ = "0.1.0"
