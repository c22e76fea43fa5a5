"""Channel polarization analysis for binary-input channels with
first-order Markov additive noise."""

from .channel import (GF2, FiniteStateChannel, MemoryChannel, ModulationMap,
                      to_fsc)
from .noise import (BivariateGaussianNoise, BivariateStudentNoise,
                    GilbertElliottNoise, noise_pair_mi)
from .polar import FrozenSet, PolarTransform, encode, select_frozen
from .quadrature import EstimateWithCI, QuadratureSpec
from .trellis import (PolarIndexReport, exact_index_report,
                      mc_density_evolution, sc_trellis_decode,
                      split_channel_exact, theorem4_check)

__version__ = "0.1.0"

__all__ = [
    "GF2", "FiniteStateChannel", "MemoryChannel", "ModulationMap", "to_fsc",
    "BivariateGaussianNoise", "BivariateStudentNoise", "GilbertElliottNoise",
    "noise_pair_mi", "FrozenSet", "PolarTransform", "encode", "select_frozen",
    "EstimateWithCI", "QuadratureSpec", "PolarIndexReport",
    "exact_index_report", "mc_density_evolution", "sc_trellis_decode",
    "split_channel_exact", "theorem4_check",
]
