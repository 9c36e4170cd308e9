"""Signed Pauli strings in symplectic (x-mask, z-mask) form.

Qubit ``i`` corresponds to bit ``i`` of both masks.  The letter at qubit ``i``
is I, X, Z or Y for ``(x_i, z_i)`` equal to (0,0), (1,0), (0,1), (1,1).  A
string stands for the plain tensor product of those letters, so with
``y = popcount(x & z)``::

    P = i**y * X**x * Z**z

Phases are always tracked as exponents of ``i`` modulo 4.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

__all__ = [
    "PauliString",
    "PauliTerm",
    "exact",
    "multiply",
    "multiply_exponent",
    "symplectic_product",
    "commutes",
    "basis_action",
    "apply_to_basis",
    "PHASES",
]

PHASES = (1, 1j, -1, -1j)

_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTERS.items()}
_FACTOR = re.compile(r"^([IXYZ])(\d+)$")


def exact(value) -> Fraction:
    """Convert ``value`` to an exact rational.

    Floats are refused: the deciders work over the rationals and a silent
    float conversion would hide rounding.  Use ``Fraction(x)`` explicitly if
    the binary value of a float is really what is wanted.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a coefficient")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, complex):
        raise TypeError("coefficients must be real")
    if isinstance(value, float):
        raise TypeError(f"refusing silent float conversion of {value!r}; pass Fraction({value!r})")
    return Fraction(value)


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True, order=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative qubit count")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full or self.x < 0 or self.z < 0:
            raise ValueError(f"masks exceed {self.n} qubits")

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Dense label, qubit 0 first: ``"XIZ"`` is X on 0 and Z on 2."""
        x = z = 0
        for i, ch in enumerate(label.upper()):
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli letter {ch!r}") from None
            x |= bx << i
            z |= bz << i
        return cls(len(label), x, z)

    @classmethod
    def from_factors(cls, n: int, factors) -> PauliString:
        """Build from ``[("X", 0), ("Z", 3)]`` or the text ``"X0 Z3"``."""
        if isinstance(factors, str):
            parsed = []
            for tok in factors.split():
                if tok == "I":
                    continue
                m = _FACTOR.match(tok)
                if not m:
                    raise ValueError(f"bad factor {tok!r}")
                parsed.append((m.group(1), int(m.group(2))))
            factors = parsed
        x = z = 0
        seen = set()
        for letter, q in factors:
            if q in seen:
                raise ValueError(f"qubit {q} repeated")
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for {n} qubits")
            seen.add(q)
            bx, bz = _BITS[letter]
            x |= bx << q
            z |= bz << q
        return cls(n, x, z)

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def y_count(self) -> int:
        return _popcount(self.x & self.z)

    @property
    def is_real(self) -> bool:
        return self.y_count % 2 == 0

    @property
    def is_diagonal(self) -> bool:
        return self.x == 0

    def letter(self, i: int) -> str:
        return _LETTERS[((self.x >> i) & 1, (self.z >> i) & 1)]

    def qubits(self) -> list[int]:
        s = self.support
        return [i for i in range(self.n) if (s >> i) & 1]

    def label(self) -> str:
        return "".join(self.letter(i) for i in range(self.n))

    def factors(self) -> list[tuple[str, int]]:
        return [(self.letter(i), i) for i in self.qubits()]

    def __str__(self) -> str:
        if self.support == 0:
            return "I"
        return " ".join(f"{a}{i}" for a, i in self.factors())

    def embed(self, n: int, mapping) -> PauliString:
        """Place this string on ``n`` qubits, sending qubit ``i`` to ``mapping[i]``."""
        x = z = 0
        for i in self.qubits():
            j = mapping[i]
            x |= ((self.x >> i) & 1) << j
            z |= ((self.z >> i) & 1) << j
        return PauliString(n, x, z)


@dataclass(frozen=True)
class PauliTerm:
    """Real coefficient times a Pauli string."""

    coeff: Fraction
    string: PauliString

    def __post_init__(self):
        object.__setattr__(self, "coeff", exact(self.coeff))

    @property
    def n(self) -> int:
        return self.string.n

    def to_float(self) -> float:
        return float(self.coeff)

    def __str__(self) -> str:
        return f"{self.coeff} {self.string}"


def _check_pair(p: PauliString, q: PauliString):
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")


def multiply_exponent(p: PauliString, q: PauliString) -> tuple[PauliString, int]:
    """Return ``(r, k)`` with ``p @ q == i**k * r``."""
    _check_pair(p, q)
    r = PauliString(p.n, p.x ^ q.x, p.z ^ q.z)
    k = p.y_count + q.y_count - r.y_count + 2 * _popcount(p.z & q.x)
    return r, k % 4


def multiply(p: PauliString, q: PauliString) -> tuple[PauliString, complex]:
    """Product of two strings as ``(r, phase)`` with ``phase`` in {1, i, -1, -i}."""
    r, k = multiply_exponent(p, q)
    return r, PHASES[k]


def symplectic_product(p: PauliString, q: PauliString) -> int:
    _check_pair(p, q)
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) & 1


def commutes(p: PauliString, q: PauliString) -> bool:
    return symplectic_product(p, q) == 0


def basis_action(p: PauliString, col: int) -> tuple[int, int]:
    """``p|col> = i**k |row>``; returns ``(row, k)``."""
    k = p.y_count + 2 * _popcount(p.z & col)
    return col ^ p.x, k % 4


def apply_to_basis(term: PauliTerm | PauliString, col: int) -> tuple[int, complex]:
    """The unique nonzero entry in column ``col``: ``(row, <row|T|col>)``.

    The value is returned as a Python complex; use :func:`basis_action` when
    the phase is needed exactly.
    """
    if isinstance(term, PauliString):
        term = PauliTerm(1, term)
    if col < 0 or col >> term.n:
        raise ValueError(f"basis index {col} out of range for {term.n} qubits")
    row, k = basis_action(term.string, col)
    return row, PHASES[k] * float(term.coeff)
