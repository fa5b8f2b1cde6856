"""Banded unitary filters, their ancilla-free circuits, and a dense simulator."""
from .banded import BandStencil, StencilError, daub4_stencil, haar_stencil, identity_stencil, load_stencil, materialize, random_qmf_stencil
from .circuit import Circuit, CircuitError, Gate, gate_count
from .compiler import compile_banded, compile_pyramid, lower_blocks
from .simulator import apply_circuit, sample_measure
from .truncation import PlanError, TruncationError, plan
from .wavelet import cascade, dwt_pyramid, idwt_pyramid

__version__ = "0.1.0"
