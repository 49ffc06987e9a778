"""Anytime-learning lab: mega-batch training with selective reinitialization."""

from lure._core import (
    ConfigError,
    Dataset,
    InputError,
    Network,
    ParseError,
    ProtocolError,
    __version__,
    cap_per_class,
    cer,
    config_hash,
    corrupt_inputs,
    corrupt_labels,
    ece,
    load_csv,
    load_idx,
    normalize_saliency,
    perturb_parameters,
    pgd_attack,
    run_experiment,
    snip_scores,
    synth_blobs,
    topk_mask,
    validate_config,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "InputError",
    "Network",
    "ParseError",
    "ProtocolError",
    "__version__",
    "cap_per_class",
    "cer",
    "config_hash",
    "corrupt_inputs",
    "corrupt_labels",
    "ece",
    "load_csv",
    "load_idx",
    "normalize_saliency",
    "perturb_parameters",
    "pgd_attack",
    "run_experiment",
    "snip_scores",
    "synth_blobs",
    "topk_mask",
    "validate_config",
]
