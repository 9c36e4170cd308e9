"""Stoquasticity deciders, sign-curing searches, hardness reductions and path-integral Monte Carlo."""

__version__ = "0.1.0"

from .pauli import PauliString, PauliTerm, commutes, multiply
from .hamiltonian import (
    CliffordTableau,
    HadamardMask,
    Hamiltonian,
    dense_matrix,
    matrix_entry,
    parse_hsum,
    read_hsum,
    serialize_hsum,
    spectrum,
)
from .stoq import (
    GlobalVerdict,
    Status,
    StoqDecomposition,
    TermwiseCertificate,
    check_global,
    check_termwise,
    decompose_global,
    stoqma_acceptance,
)
from .curing import XyzChain, cure_xyz_clifford, search_hadamard_mask, search_xyz_single_qubit
from .qmc import QmcParams, QmcResult, exact_reference, run_qmc

__all__ = [
    "__version__",
    "PauliString",
    "PauliTerm",
    "commutes",
    "multiply",
    "CliffordTableau",
    "HadamardMask",
    "Hamiltonian",
    "dense_matrix",
    "matrix_entry",
    "parse_hsum",
    "read_hsum",
    "serialize_hsum",
    "spectrum",
    "GlobalVerdict",
    "Status",
    "StoqDecomposition",
    "TermwiseCertificate",
    "check_global",
    "check_termwise",
    "decompose_global",
    "stoqma_acceptance",
    "XyzChain",
    "cure_xyz_clifford",
    "search_hadamard_mask",
    "search_xyz_single_qubit",
    "QmcParams",
    "QmcResult",
    "exact_reference",
    "run_qmc",
]
