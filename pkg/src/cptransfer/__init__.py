"""Transfer operators, invariant measures and entropy for quantum channels with
place-dependent probabilities."""
__version__ = "0.1.0"

from . import channels, decay, entropy, matkernel, measures, observables, projective, transfer
from .channels import (
    KrausChannel, MixedUnitaryChannel, NonlinearChannel, apply, named_channel, spectrum,
)
from .errors import CPTransferError

__all__ = [
    "__version__", "channels", "decay", "entropy", "matkernel", "measures", "observables",
    "projective", "transfer", "KrausChannel", "MixedUnitaryChannel", "NonlinearChannel",
    "apply", "named_channel", "spectrum", "CPTransferError",
]
