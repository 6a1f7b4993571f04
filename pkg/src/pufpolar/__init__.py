"""Serial automorphism ensemble decoding of polar codes for PUF key storage."""

from .automorphisms import (AffineMap, EnsembleSpec, Permutation, build_bdl_perm,
                            compose, perm_from_affine, sample_ensemble)
from .aed import ae_decode, ae_decode_batch, greedy_select
from .baseline import ConcatSpec, concat_bler
from .decoder import build_tree, make_decoder, plan_bitwidths, sc_decode
from .gf2 import BitMatrix
from .polar import CodeSpec, encode, expand_generators, is_codeword

__version__ = "0.1.0"
