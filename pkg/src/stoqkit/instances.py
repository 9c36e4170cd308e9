"""Seeded random instances shared by the verify suites and the tests."""

from __future__ import annotations

import random
from fractions import Fraction

from .curing import XyzChain
from .hamiltonian import Hamiltonian
from .pauli import PauliString
from .stoq import flip_pair_operator, subcube_projector

__all__ = [
    "COEFFS",
    "random_real_pauli",
    "random_local_hamiltonian",
    "random_stoquastic_hamiltonian",
    "random_xyz_chain",
    "xyz_chain_eligible",
    "tfim",
]

COEFFS = (Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2))


def _coeff(rng: random.Random, signed: bool = True) -> Fraction:
    c = rng.choice(COEFFS)
    return -c if signed and rng.random() < 0.5 else c


def random_real_pauli(rng: random.Random, n: int, qubits) -> PauliString:
    """Random non-identity letters on ``qubits`` with an even number of Y."""
    letters = [rng.choice("XYZ") for _ in qubits]
    if letters.count("Y") % 2:
        letters[letters.index("Y")] = "X"
    return PauliString.from_factors(n, list(zip(letters, qubits)))


def _window(rng: random.Random, n: int, w: int, spread: int | None):
    if spread is None or spread >= n:
        return rng.sample(range(n), w)
    start = rng.randrange(n - spread + 1)
    return rng.sample(range(start, start + spread), w)


def _stoquastic_block(rng: random.Random, n: int, qs) -> Hamiltonian:
    """``-c (|a^S><a| + h.c.)_S (x) |z><z|_T`` on the chosen qubits."""
    k = rng.randint(1, len(qs))
    S = sum(1 << q for q in qs[:k])
    T = sum(1 << q for q in qs[k:])
    a = rng.getrandbits(n) & S
    z = rng.getrandbits(n) & T
    return (flip_pair_operator(n, S, a) * subcube_projector(n, T, z)).scale(-_coeff(rng, signed=False))


def random_local_hamiltonian(rng: random.Random, n: int, k: int, n_terms: int,
                             p_random: float = 0.3, spread: int | None = None) -> Hamiltonian:
    """Mix of diagonal terms, stoquastic flip blocks and arbitrary real Pauli terms, all ``k``-local.

    ``spread`` confines every term to a window of that many consecutive
    qubits, which bounds the interaction degree.
    """
    H = Hamiltonian(n)
    for _ in range(n_terms):
        w = rng.randint(1, min(k, n))
        qs = _window(rng, n, w, spread)
        r = rng.random()
        if r < 0.25:
            zs = sum(1 << q for q in qs)
            H = H + Hamiltonian(n, [(_coeff(rng), PauliString(n, 0, zs))])
        elif r < 0.25 + p_random:
            H = H + Hamiltonian(n, [(_coeff(rng), random_real_pauli(rng, n, qs))])
        else:
            H = H + _stoquastic_block(rng, n, qs)
    return H


def random_stoquastic_hamiltonian(rng: random.Random, n: int, k: int, n_terms: int,
                                  spread: int | None = None) -> Hamiltonian:
    """Globally stoquastic by construction: stoquastic blocks plus diagonal terms."""
    return random_local_hamiltonian(rng, n, k, n_terms, p_random=0.0, spread=spread)


def random_xyz_chain(rng: random.Random, n: int, boundary: str = "open", values=range(-3, 4)) -> XyzChain:
    edges = n - 1 if boundary == "open" else n
    trips = tuple(tuple(Fraction(rng.choice(values)) for _ in range(3)) for _ in range(edges))
    return XyzChain(n, trips, boundary)


def xyz_chain_eligible(chain: XyzChain) -> bool:
    """Open chain whose edge products ``a_xx a_yy a_zz`` are ``>= 0`` on all even or all odd edges."""
    if chain.boundary != "open":
        return False
    prods = [a * b * c for a, b, c in chain.couplings]
    return any(all(p >= 0 for e, p in enumerate(prods) if e % 2 == par) for par in (0, 1))


def tfim(n: int, J=1, g=1, boundary: str = "closed") -> Hamiltonian:
    """``-J sum Z_i Z_{i+1} - g sum X_i``."""
    edges = n if boundary == "closed" and n > 2 else n - 1
    terms = [(-Fraction(J), PauliString.from_factors(n, [("Z", i), ("Z", (i + 1) % n)])) for i in range(edges)]
    terms += [(-Fraction(g), PauliString.from_factors(n, [("X", i)])) for i in range(n)]
    return Hamiltonian(n, terms, name=f"tfim-{n}")
