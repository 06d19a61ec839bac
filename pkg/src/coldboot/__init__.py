"""Recovery of AES-256 keys from bit-decayed memory images.

Pipeline: key expansion oracle -> decay simulation -> neural belief
propagation over a parity-check formalization of the key schedule ->
confident-bit selection -> weighted partial MAX-SAT search.
"""

__version__ = "0.1.0"
