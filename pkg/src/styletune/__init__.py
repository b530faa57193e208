"""styletune: audio production style transfer by effect-chain search.

Match the production style of a reference recording by optimizing the
normalized parameters of a chain of built-in effects with CMA-ES, scoring
candidates by the cosine similarity of handcrafted style embeddings.
"""

from .audio import (
    AudioBuffer,
    apply_gain_db,
    make_rng,
    mid_side_split,
    random_crop,
    read_wav,
    write_wav,
)
from .chain import Chain, ChainStage, parse_chain_spec, process_chain, split_params
from .cmaes import CmaConfig, CmaState, OptResult, optimize
from .effects import (
    EffectDescriptor,
    ParamSpec,
    builtin_effects,
    compute_biquad,
    map_param,
    process_effect,
    unmap_param,
)
from .features import (
    Embedding,
    SpectrogramConfig,
    cosine_similarity,
    embed,
    log_mel,
    mfcc,
    stft_mag,
    style_similarity,
)
from .transfer import TransferConfig, TransferReport, style_transfer

__all__ = [
    "AudioBuffer",
    "Chain",
    "ChainStage",
    "CmaConfig",
    "CmaState",
    "EffectDescriptor",
    "Embedding",
    "OptResult",
    "ParamSpec",
    "SpectrogramConfig",
    "TransferConfig",
    "TransferReport",
    "apply_gain_db",
    "builtin_effects",
    "compute_biquad",
    "cosine_similarity",
    "embed",
    "log_mel",
    "make_rng",
    "map_param",
    "mfcc",
    "mid_side_split",
    "optimize",
    "parse_chain_spec",
    "process_chain",
    "process_effect",
    "random_crop",
    "read_wav",
    "split_params",
    "stft_mag",
    "style_similarity",
    "style_transfer",
    "unmap_param",
    "write_wav",
]

__version__ = "0.1.0"
