"""Fiber bundle CSS code workbench."""

from fibercode.base import certify_base, gen_base
from fibercode.bundle import Bundle, build_bundle, build_fiber_bundle_code
from fibercode.complexes import ChainComplex, CssCode, css_from_complex
from fibercode.decoders import (
    DecodeResult,
    DecodeSuccess,
    decode_brute_force,
    decode_erasure_x,
    decode_via_homotopy,
    decode_x,
    decode_z,
    with_coset_verdict,
)
from fibercode.gf2 import BitChain, Gf2Matrix
from fibercode.homotopy import (
    HomotopyEquivalence,
    load_equivalence,
    save_equivalence,
    weight_reduce_bundle,
    weight_reduce_classical,
)
from fibercode.twists import certify_expander, gen_twist_graph

__version__ = "0.1.0"

__all__ = [
    "BitChain",
    "Gf2Matrix",
    "ChainComplex",
    "CssCode",
    "css_from_complex",
    "gen_base",
    "certify_base",
    "gen_twist_graph",
    "certify_expander",
    "Bundle",
    "build_bundle",
    "build_fiber_bundle_code",
    "DecodeResult",
    "DecodeSuccess",
    "decode_x",
    "decode_z",
    "decode_erasure_x",
    "decode_via_homotopy",
    "decode_brute_force",
    "with_coset_verdict",
    "HomotopyEquivalence",
    "weight_reduce_classical",
    "weight_reduce_bundle",
    "save_equivalence",
    "load_equivalence",
    "__version__",
]
