"""Identification-with-feedback code: construction, encoding and decoding."""

from .code import (
    COLOR_DECODE_FAILURE,
    CR_FAILURE,
    DETERMINISTIC,
    RANDOMIZED,
    Emission,
    IdfCode,
    Verdict,
    build_idf_code,
    color_block_length,
    decode,
    encode_step,
    fallback_tuple,
    select_cr_input,
)
from .coloring import ColoringFunction, color, colors_batch, mix64, mix_hash
from .transmission import ColorTransmissionCode, exact_errors, greedy_transmission_code
from .typicality import TypicalityTest

__all__ = [
    "COLOR_DECODE_FAILURE",
    "CR_FAILURE",
    "ColorTransmissionCode",
    "ColoringFunction",
    "DETERMINISTIC",
    "Emission",
    "IdfCode",
    "RANDOMIZED",
    "TypicalityTest",
    "Verdict",
    "build_idf_code",
    "color",
    "color_block_length",
    "colors_batch",
    "decode",
    "encode_step",
    "exact_errors",
    "fallback_tuple",
    "greedy_transmission_code",
    "mix64",
    "mix_hash",
    "select_cr_input",
]
