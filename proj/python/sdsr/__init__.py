"""Face super-resolution by deep sparse representation: dictionaries, code mapping, synthesis."""

from ._sdsr import (
    FORMAT_VERSION,
    Error,
    FormatError,
    InvalidInput,
    IoError,
    Model,
    NumericalError,
    bicubic_resize,
    evaluate,
    generate_toy_corpus,
    lasso_certificate_violation,
    lasso_objective,
    learn_level,
    learn_mapping,
    load_image,
    load_training_pairs,
    psnr,
    save_image,
    soft_threshold,
    sparse_encode,
    ssim,
    synthesize,
    train,
)

__all__ = [
    "FORMAT_VERSION",
    "Error",
    "FormatError",
    "InvalidInput",
    "IoError",
    "Model",
    "NumericalError",
    "bicubic_resize",
    "evaluate",
    "generate_toy_corpus",
    "lasso_certificate_violation",
    "lasso_objective",
    "learn_level",
    "learn_mapping",
    "load_image",
    "load_training_pairs",
    "psnr",
    "save_image",
    "soft_threshold",
    "sparse_encode",
    "ssim",
    "synthesize",
    "train",
]
