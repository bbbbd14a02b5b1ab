"""Language-model engine families behind one log-probability interface."""

import numpy as np

from .archive import ArchiveError, load_archive, read_manifest, save_archive
from .base import (Engine, EngineError, FamilyError, RecurrentState,
                   TokenIdError, next_token_logprobs, step_recurrent)
from .config import ConfigError, EngineConfig, FAMILIES
from .mamba import MambaEngine
from .rwkv import RwkvEngine
from .surprisal import (AlignmentError, SurprisalRecord, align_word,
                        nats_to_bits, token_surprisals, word_level_perplexity,
                        word_surprisal)
from .tokenizer import Token, TokenizerError, Vocabulary, detokenize, tokenize
from .transformer import KVCache, TransformerEngine
from .weights import init_weights, zero_weights

_ENGINE_CLASSES = {
    "transformer": TransformerEngine,
    "rwkv": RwkvEngine,
    "mamba": MambaEngine,
}


def build_engine(config: EngineConfig, tensors: dict[str, np.ndarray]) -> Engine:
    return _ENGINE_CLASSES[config.family](config, tensors)


def load_weights(path, config: EngineConfig) -> Engine:
    """Load an archive and construct the engine it parameterizes."""
    return build_engine(config, load_archive(path))
