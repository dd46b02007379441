"""residua: reduced operator norms over free groups and their extensions.

The package computes two-sided brackets for reduced group-algebra norms,
builds discriminating retraction homomorphisms for iterated centralizer
extensions, stress-tests a quantitative power lemma, runs finite permutation
models against the free-group reference values, and evaluates exact torus
models for abelian and Klein-bottle quotients.
"""

from .algebra import AlgebraElement, convolve, pushforward
from .baumslag import exhaustive_sweep, search_counterexamples
from .normbracket import sandwich
from .permrep import op_norm, strong_convergence_experiment
from .pipeline import certify, net_mode
from .torus import klein_norm, zr_norm
from .tower import discriminating_hom, preset_genus2, preset_z2
from .words import Basis, Word, ball, commute, cyclic_decompose, parse_word

__all__ = [
    "AlgebraElement",
    "Basis",
    "Word",
    "ball",
    "certify",
    "commute",
    "convolve",
    "cyclic_decompose",
    "discriminating_hom",
    "exhaustive_sweep",
    "klein_norm",
    "net_mode",
    "op_norm",
    "parse_word",
    "preset_genus2",
    "preset_z2",
    "pushforward",
    "sandwich",
    "search_counterexamples",
    "strong_convergence_experiment",
    "zr_norm",
]

__version__ = "0.1.0"
