"""AES-128 with a randomized composite-field S-box, plus a simulated DPA/CPA bench."""

from .aes import decrypt_block, decrypt_blocks, encrypt_block, encrypt_blocks, sbox_composite, sbox_lut
from .attacks import cpa_attack, dom_attack, measurements_to_disclosure
from .iso import ParameterSet, default_catalog, enumerate_all, select_low_cost, verify_isomorphism
from .leakage import LeakConfig, TraceSet, generate_set, read_traces, write_traces
from .lfsr import Lfsr, RandomizationContext

__version__ = "0.1.0"

__all__ = [
    "ParameterSet", "LeakConfig", "TraceSet", "Lfsr", "RandomizationContext",
    "sbox_lut", "sbox_composite", "encrypt_block", "decrypt_block", "encrypt_blocks",
    "decrypt_blocks", "enumerate_all", "select_low_cost", "verify_isomorphism",
    "default_catalog", "generate_set", "read_traces", "write_traces", "cpa_attack",
    "dom_attack", "measurements_to_disclosure",
]
