"""Reference computations written without the package internals.

Dense matrices come from Kronecker products of 2x2 Pauli matrices, with
qubit 0 as the least significant bit of the basis index.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import scipy.linalg

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(n: int, factors) -> np.ndarray:
    letters = ["I"] * n
    for letter, q in factors:
        letters[q] = letter
    out = np.array([[1]], dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, PAULI[letters[q]])
    return out


def string_matrix(p) -> np.ndarray:
    return pauli_matrix(p.n, [(p.letter(q), q) for q in range(p.n) if p.letter(q) != "I"])


def hamiltonian_matrix(H) -> np.ndarray:
    out = float(H.offset) * np.eye(1 << H.n, dtype=complex)
    for t in H.terms:
        out = out + float(t.coeff) * string_matrix(t.string)
    return out


def real_matrix(H) -> np.ndarray:
    M = hamiltonian_matrix(H)
    assert np.allclose(M.imag, 0)
    return M.real


def eigenvalues(H) -> np.ndarray:
    return np.linalg.eigvalsh(hamiltonian_matrix(H))


def max_offdiagonal(M: np.ndarray) -> float:
    off = M - np.diag(np.diag(M))
    return float(off.max()) if M.shape[0] > 1 else 0.0


def thermal_energy(H, beta: float) -> float:
    M = real_matrix(H)
    rho = scipy.linalg.expm(-beta * M)
    return float(np.trace(M @ rho) / np.trace(rho))


def ising_min(n: int, edges, fields: bool = False) -> Fraction:
    """Minimum of ``sum J s_u s_v (+ sum s_i)`` by enumeration over spins in {+1, -1}."""
    best = None
    for spins in itertools.product((1, -1), repeat=n):
        e = sum(Fraction(J) * spins[u] * spins[v] for u, v, J in edges)
        if fields:
            e += sum(spins)
        best = e if best is None or e < best else best
    return best


def clause_sat(clause, assign) -> bool:
    """``assign[v]`` is the truth value of DIMACS variable ``v``."""
    return any(assign[abs(l)] == (l > 0) for l in clause)


def assignments(variables):
    for bits in itertools.product((False, True), repeat=len(variables)):
        yield dict(zip(variables, bits))


def forall_exists_sat(n_x: int, n_y: int, clauses) -> bool:
    xs = range(1, n_x + 1)
    ys = range(n_x + 1, n_x + n_y + 1)
    return all(any(all(clause_sat(c, {**a, **b}) for c in clauses) for b in assignments(ys))
               for a in assignments(xs))


def minmax(n_x: int, n_y: int, clauses, k: int) -> bool:
    xs = range(1, n_x + 1)
    ys = range(n_x + 1, n_x + n_y + 1)
    return all(any(sum(clause_sat(c, {**a, **b}) for c in clauses) >= k for b in assignments(ys))
               for a in assignments(xs))


def neg_minmax(n_x: int, n_y: int, clauses, k: int) -> bool:
    xs = range(1, n_x + 1)
    ys = range(n_x + 1, n_x + n_y + 1)
    return any(all(sum(not clause_sat(c, {**a, **b}) for c in clauses) >= k for b in assignments(ys))
               for a in assignments(xs))
