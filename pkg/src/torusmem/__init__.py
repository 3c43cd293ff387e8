"""Toroidal phonetic trajectory memory.

Tokens are rendered to deterministic 16-dim spectral fingerprints and folded
into a trajectory on the 16-torus by an irrational rotation; bridges are
recovered by inverting one step and fusing the spectral evidence with a
language prior.
"""

from .manifold import Precision, RotationOperator, TorusState, evolve, invert_step, make_rotation, torus_distance
from .memory import AnchorPolicy, CorpusStats, MemoryTrace, encode, read_trace, select_anchors, tokenize, write_trace
from .phonetics import VocabIndex, build_vocab_index, fingerprint_token, load_dictionary
from .resonance import DecoderConfig, NgramPrior, UniformPrior, decode_position, reconstruct

__version__ = "0.1.0"

__all__ = [
    "AnchorPolicy", "CorpusStats", "DecoderConfig", "MemoryTrace", "NgramPrior", "Precision",
    "RotationOperator", "TorusState", "UniformPrior", "VocabIndex", "build_vocab_index", "decode_position",
    "encode", "evolve", "fingerprint_token", "invert_step", "load_dictionary", "make_rotation",
    "read_trace", "reconstruct", "select_anchors", "tokenize", "torus_distance", "write_trace",
]
