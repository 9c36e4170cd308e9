"""Real qubit Hamiltonians as exact Pauli sums.

A :class:`Hamiltonian` is immutable.  Coefficients are :class:`Fraction`; the
identity component is kept apart as :attr:`Hamiltonian.offset`.  Matrix
entries are computed exactly from the Pauli data, and dense matrices are only
built below a configurable qubit threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import PauliString, PauliTerm, exact, multiply_exponent

__all__ = [
    "DENSE_THRESHOLD",
    "Hamiltonian",
    "FlipGroup",
    "HadamardMask",
    "CliffordTableau",
    "HamiltonianError",
    "NonRealHamiltonian",
    "HsumParseError",
    "MalformedLine",
    "RepeatedIndex",
    "QubitIndexOutOfRange",
    "NonRealCoefficient",
    "DenseThresholdExceeded",
    "InvalidTableau",
    "parse_hsum",
    "serialize_hsum",
    "read_hsum",
    "write_hsum",
    "flip_groups",
    "matrix_entry",
    "dense_matrix",
    "dense_matrix_scaled",
    "diagonal_values",
    "diagonal_values_scaled",
    "spectrum",
    "conjugate_hadamard",
    "conjugate_clifford",
    "canonical_reps",
    "bits_key",
]

DENSE_THRESHOLD = 14


class HamiltonianError(ValueError):
    pass


class NonRealHamiltonian(HamiltonianError):
    pass


class DenseThresholdExceeded(HamiltonianError):
    pass


class InvalidTableau(HamiltonianError):
    pass


class HsumParseError(HamiltonianError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class MalformedLine(HsumParseError):
    pass


class RepeatedIndex(HsumParseError):
    pass


class QubitIndexOutOfRange(HsumParseError):
    pass


class NonRealCoefficient(HsumParseError):
    pass


def bits_key(v: int, n: int) -> tuple[int, ...]:
    """Lexicographic key of a bit string written qubit 0 first."""
    return tuple((v >> i) & 1 for i in range(n))


def _lowest_bit(v: int) -> int:
    return v & -v


def canonical_reps(S: int) -> list[int]:
    """Pair representatives over ``S``: the lowest qubit of ``S`` is 0.

    Returned in lexicographic order (qubit 0 first).
    """
    if S == 0:
        return [0]
    rest = S & ~_lowest_bit(S)
    qs = [i for i in range(rest.bit_length()) if (rest >> i) & 1]
    reps = []
    for t in range(1 << len(qs)):
        a = 0
        for j, q in enumerate(qs):
            if (t >> j) & 1:
                a |= 1 << q
        reps.append(a)
    n = S.bit_length()
    reps.sort(key=lambda a: bits_key(a, n))
    return reps


def _sign(k: int) -> int:
    # real phases only: i**0 = 1, i**2 = -1
    return 1 if k % 4 == 0 else -1


class Hamiltonian:
    """Finite real Pauli sum on ``n`` qubits.

    ``terms`` may be a mapping ``PauliString -> coefficient`` or an iterable
    of :class:`PauliTerm` / ``(coefficient, PauliString)`` pairs.  Duplicate
    strings are summed, zero coefficients dropped and identity strings folded
    into ``offset``.  Strings with an odd number of Y letters give imaginary
    matrices and are refused unless ``real=False``.
    """

    def __init__(self, n: int, terms=(), offset=0, *, name: str | None = None,
                 provenance: str | None = None, real: bool = True):
        if n < 0:
            raise HamiltonianError("negative qubit count")
        self.n = n
        self.name = name
        self.provenance = provenance
        acc: dict[PauliString, Fraction] = {}
        off = exact(offset)
        items = terms.items() if isinstance(terms, Mapping) else terms
        for item in items:
            if isinstance(item, PauliTerm):
                s, c = item.string, item.coeff
            else:
                a, b = item
                if isinstance(a, PauliString):
                    s, c = a, exact(b)
                else:
                    s, c = b, exact(a)
            if s.n != n:
                raise HamiltonianError(f"term on {s.n} qubits in a {n}-qubit Hamiltonian")
            if s.support == 0:
                off += c
                continue
            acc[s] = acc.get(s, Fraction(0)) + c
        self._terms = {s: acc[s] for s in sorted(acc) if acc[s] != 0}
        self.offset = off
        if real and not self.is_real:
            bad = next(s for s in self._terms if not s.is_real)
            raise NonRealHamiltonian(f"term {bad} has an odd number of Y factors")

    # construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> Hamiltonian:
        return cls(n)

    @classmethod
    def identity(cls, n: int, c=1) -> Hamiltonian:
        return cls(n, offset=c)

    @classmethod
    def pauli(cls, n: int, factors, coeff=1) -> Hamiltonian:
        """Single term, e.g. ``Hamiltonian.pauli(3, "X0 Z2", -1)``."""
        return cls(n, [(coeff, PauliString.from_factors(n, factors))])

    @classmethod
    def projector(cls, n: int, qubit: int, bit: int) -> Hamiltonian:
        """``|bit><bit|`` on one qubit, i.e. ``(I + (-1)**bit Z) / 2``."""
        z = PauliString.from_factors(n, [("Z", qubit)])
        return cls(n, [(Fraction(1 - 2 * bit, 2), z)], Fraction(1, 2))

    # basic views -----------------------------------------------------------

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return tuple(PauliTerm(c, s) for s, c in self._terms.items())

    def items(self):
        return self._terms.items()

    def coeff(self, s: PauliString) -> Fraction:
        if s.support == 0:
            return self.offset
        return self._terms.get(s, Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def term_count(self) -> int:
        """Number of local terms, counting a nonzero identity offset as one."""
        return len(self._terms) + (1 if self.offset != 0 else 0)

    @cached_property
    def is_real(self) -> bool:
        return all(s.is_real for s in self._terms)

    @cached_property
    def is_diagonal(self) -> bool:
        return all(s.x == 0 for s in self._terms)

    @cached_property
    def locality(self) -> int:
        return max((s.weight for s in self._terms), default=0)

    @cached_property
    def support(self) -> int:
        return reduce(lambda a, s: a | s.support, self._terms, 0)

    @cached_property
    def interaction_degree(self) -> int:
        """Largest number of other qubits any qubit shares a term with."""
        nbrs = [0] * self.n
        for s in self._terms:
            sup = s.support
            for q in s.qubits():
                nbrs[q] |= sup & ~(1 << q)
        return max((v.bit_count() for v in nbrs), default=0)

    def coefficient_norm(self) -> Fraction:
        """Sum of absolute coefficients including the offset."""
        return sum((abs(c) for c in self._terms.values()), abs(self.offset))

    # algebra -----------------------------------------------------------------

    def _like(self, terms, offset, **kw) -> Hamiltonian:
        return Hamiltonian(self.n, terms, offset, name=kw.get("name"),
                           provenance=kw.get("provenance"), real=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hamiltonian):
            return NotImplemented
        return self.n == other.n and self.offset == other.offset and self._terms == other._terms

    __hash__ = None

    def __add__(self, other) -> Hamiltonian:
        if not isinstance(other, Hamiltonian):
            return self._like(self._terms, self.offset + exact(other))
        if other.n != self.n:
            raise HamiltonianError("qubit count mismatch")
        return self._like(list(self._terms.items()) + list(other._terms.items()),
                          self.offset + other.offset)

    __radd__ = __add__

    def __neg__(self) -> Hamiltonian:
        return self.scale(-1)

    def __sub__(self, other) -> Hamiltonian:
        return self + (-other if isinstance(other, Hamiltonian) else -exact(other))

    def __rsub__(self, other) -> Hamiltonian:
        return (-self) + other

    def scale(self, c) -> Hamiltonian:
        c = exact(c)
        return self._like({s: c * v for s, v in self._terms.items()}, c * self.offset)

    def __mul__(self, other) -> Hamiltonian:
        if isinstance(other, Hamiltonian):
            return self.product(other)
        return self.scale(other)

    def __rmul__(self, other) -> Hamiltonian:
        return self.scale(other)

    def product(self, other: Hamiltonian) -> Hamiltonian:
        """Operator product; the result must again be a real Pauli sum."""
        if other.n != self.n:
            raise HamiltonianError("qubit count mismatch")
        ident = PauliString.identity(self.n)
        left = list(self._terms.items()) + ([(ident, self.offset)] if self.offset else [])
        right = list(other._terms.items()) + ([(ident, other.offset)] if other.offset else [])
        re: dict[PauliString, Fraction] = {}
        im: dict[PauliString, Fraction] = {}
        for p, a in left:
            for q, b in right:
                r, k = multiply_exponent(p, q)
                v = a * b if k < 2 else -a * b
                tgt = re if k % 2 == 0 else im
                tgt[r] = tgt.get(r, Fraction(0)) + v
        if any(v != 0 for v in im.values()):
            raise NonRealHamiltonian("operator product has imaginary Pauli coefficients")
        return self._like(re.items(), 0)

    def embed(self, n: int, mapping: Sequence[int]) -> Hamiltonian:
        """Relabel qubit ``i`` as ``mapping[i]`` on an ``n``-qubit register."""
        return Hamiltonian(n, [(s.embed(n, mapping), c) for s, c in self._terms.items()],
                           self.offset, name=self.name, provenance=self.provenance, real=False)

    def diagonal_part(self) -> Hamiltonian:
        return self._like({s: c for s, c in self._terms.items() if s.x == 0}, self.offset)

    def offdiagonal_part(self) -> Hamiltonian:
        return self._like({s: c for s, c in self._terms.items() if s.x != 0}, 0)

    def with_meta(self, name=None, provenance=None) -> Hamiltonian:
        return Hamiltonian(self.n, self._terms, self.offset, name=name or self.name,
                           provenance=provenance or self.provenance, real=False)

    def __repr__(self) -> str:
        body = " + ".join(f"({c})*[{s}]" for s, c in self._terms.items()) or "0"
        if self.offset:
            body = f"{self.offset} + " + body
        return f"Hamiltonian(n={self.n}: {body})"

    # structure -----------------------------------------------------------------

    @cached_property
    def flip_groups(self) -> dict[int, FlipGroup]:
        return _build_flip_groups(self)

    def to_json(self) -> dict:
        return {
            "format": "hsum-json/1",
            "qubits": self.n,
            "name": self.name,
            "provenance": self.provenance,
            "offset": str(self.offset),
            "terms": [{"coeff": str(c), "paulis": str(s)} for s, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, data: dict) -> Hamiltonian:
        n = int(data["qubits"])
        terms = [(Fraction(t["coeff"]), PauliString.from_factors(n, t["paulis"])) for t in data["terms"]]
        return cls(n, terms, Fraction(data.get("offset", "0")), name=data.get("name"),
                   provenance=data.get("provenance"))


# flip groups -----------------------------------------------------------------


@dataclass(frozen=True)
class FlipGroup:
    """All terms whose X/Y pattern is exactly ``S``.

    ``entry_poly[a]`` is the parity expansion, over the qubits ``R & ~S``, of
    ``y -> <a^S, y| H |a, y>`` for each canonical representative ``a``.  Keys
    of the inner dict are masks on the full register; values are exact.
    """

    n: int
    S: int
    R: int
    terms: tuple[PauliTerm, ...]
    entry_poly: dict[int, dict[int, Fraction]] = field(repr=False)

    @property
    def free(self) -> int:
        return self.R & ~self.S

    @property
    def free_qubits(self) -> list[int]:
        f = self.free
        return [i for i in range(self.n) if (f >> i) & 1]

    @property
    def reps(self) -> list[int]:
        return list(self.entry_poly)

    def evaluate(self, a: int, y: int) -> Fraction:
        """Entry ``<a^S, y|H|a, y>`` for any ``a`` over ``S`` and ``y`` off ``S``."""
        if a not in self.entry_poly:
            a ^= self.S
        poly = self.entry_poly[a]
        return sum((c if (ch & y).bit_count() % 2 == 0 else -c for ch, c in poly.items()), Fraction(0))

    def degree(self, a: int) -> int:
        return max((ch.bit_count() for ch, c in self.entry_poly[a].items() if c), default=0)

    def table(self, a: int, chunk: tuple[int, int] | None = None) -> tuple[np.ndarray, int]:
        """Scaled integer values of the entry polynomial on compact free indices.

        Index ``t`` maps bit ``j`` to the ``j``-th free qubit (ascending).
        Returns ``(values, denom)`` with exact entries ``values / denom``.
        """
        poly = self.entry_poly[a]
        denom = _lcm_denoms(poly.values())
        fq = self.free_qubits
        lo, hi = chunk if chunk else (0, 1 << len(fq))
        t = np.arange(lo, hi, dtype=np.int64)
        out = np.zeros(hi - lo, dtype=np.int64)
        for ch, c in poly.items():
            cm = 0
            for j, q in enumerate(fq):
                if (ch >> q) & 1:
                    cm |= 1 << j
            v = int(c * denom)
            if cm == 0:
                out += v
            else:
                par = np.bitwise_count(t & cm) & 1
                out += v * (1 - 2 * par.astype(np.int64))
        return out, denom


def _lcm_denoms(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d


def _build_flip_groups(H: Hamiltonian) -> dict[int, FlipGroup]:
    if not H.is_real:
        raise NonRealHamiltonian("flip groups need a real Hamiltonian")
    by_x: dict[int, list[tuple[PauliString, Fraction]]] = {}
    for s, c in H.items():
        by_x.setdefault(s.x, []).append((s, c))
    if H.offset != 0:
        by_x.setdefault(0, [])
    groups = {}
    for S in sorted(by_x):
        members = by_x[S]
        R = S
        for s, _ in members:
            R |= s.z
        polys: dict[int, dict[int, Fraction]] = {}
        for a in canonical_reps(S):
            poly: dict[int, Fraction] = {}
            if S == 0 and H.offset != 0:
                poly[0] = H.offset
            for s, c in members:
                # <a^S y| c P |a y> = c i^y (-1)^{z.(a y)}
                v = c * _sign(s.y_count)
                if (s.z & S & a).bit_count() % 2:
                    v = -v
                ch = s.z & ~S
                poly[ch] = poly.get(ch, Fraction(0)) + v
            polys[a] = {ch: v for ch, v in sorted(poly.items()) if v != 0}
        groups[S] = FlipGroup(H.n, S, R, tuple(PauliTerm(c, s) for s, c in members), polys)
    return groups


def flip_groups(H: Hamiltonian) -> dict[int, FlipGroup]:
    """Partition of the terms of ``H`` by flip mask, keyed by ``S`` (ascending)."""
    return H.flip_groups


# matrix entries ------------------------------------------------------------------


def matrix_entry(H: Hamiltonian, row: int, col: int) -> Fraction:
    """Exact ``<row|H|col>`` computed directly from the Pauli terms."""
    if not H.is_real:
        raise NonRealHamiltonian("matrix entries of a non-real Hamiltonian are not real")
    S = row ^ col
    total = H.offset if S == 0 else Fraction(0)
    group = H.flip_groups.get(S)
    if group is None:
        return total
    for t in group.terms:
        s = t.string
        k = s.y_count + 2 * (s.z & col).bit_count()
        total += t.coeff if k % 4 == 0 else -t.coeff
    return total


def _check_dense(H: Hamiltonian, threshold: int | None):
    limit = DENSE_THRESHOLD if threshold is None else threshold
    if H.n > limit:
        raise DenseThresholdExceeded(f"{H.n} qubits exceeds dense threshold {limit}")
    if not H.is_real:
        raise NonRealHamiltonian("dense matrices are only built for real Hamiltonians")


def _term_signs(s: PauliString, cols: np.ndarray) -> np.ndarray:
    par = np.bitwise_count(cols & s.z) & 1
    sgn = 1 - 2 * par.astype(np.int64)
    return sgn * _sign(s.y_count)


def dense_matrix(H: Hamiltonian, threshold: int | None = None) -> np.ndarray:
    """Dense float64 matrix, ``M[row, col] = <row|H|col>``."""
    _check_dense(H, threshold)
    dim = 1 << H.n
    cols = np.arange(dim, dtype=np.int64)
    M = np.zeros((dim, dim))
    M[cols, cols] += float(H.offset)
    for s, c in H.items():
        M[cols ^ s.x, cols] += float(c) * _term_signs(s, cols)
    return M


def dense_matrix_scaled(H: Hamiltonian, denom: int | None = None,
                        threshold: int | None = None) -> tuple[np.ndarray, int]:
    """Exact dense matrix as ``(int64 matrix, denom)`` with ``H = matrix / denom``."""
    _check_dense(H, threshold)
    coeffs = list(H._terms.values()) + [H.offset]
    d = _lcm_denoms(coeffs) if denom is None else denom
    if sum(abs(c) for c in coeffs) * d >= 2**62:
        raise OverflowError("coefficients too large for exact int64 dense matrix")
    dim = 1 << H.n
    cols = np.arange(dim, dtype=np.int64)
    M = np.zeros((dim, dim), dtype=np.int64)
    M[cols, cols] += _scaled(H.offset, d)
    for s, c in H.items():
        M[cols ^ s.x, cols] += _scaled(c, d) * _term_signs(s, cols)
    return M, d


def _scaled(c: Fraction, d: int) -> int:
    v = c * d
    if v.denominator != 1:
        raise ValueError(f"denominator {d} does not clear {c}")
    return int(v)


def diagonal_values(H: Hamiltonian, threshold: int = 24) -> np.ndarray:
    """``<x|H|x>`` for every basis state, float64."""
    vals, d = diagonal_values_scaled(H, threshold=threshold)
    return vals / d


def diagonal_values_scaled(H: Hamiltonian, denom: int | None = None,
                           threshold: int = 24) -> tuple[np.ndarray, int]:
    if H.n > threshold:
        raise DenseThresholdExceeded(f"{H.n} qubits exceeds diagonal threshold {threshold}")
    diag = [(s, c) for s, c in H.items() if s.x == 0]
    d = _lcm_denoms([c for _, c in diag] + [H.offset]) if denom is None else denom
    cols = np.arange(1 << H.n, dtype=np.int64)
    out = np.full(1 << H.n, _scaled(H.offset, d), dtype=np.int64)
    for s, c in diag:
        out += _scaled(c, d) * _term_signs(s, cols)
    return out, d


def spectrum(H: Hamiltonian, threshold: int | None = None) -> np.ndarray:
    """Eigenvalues in ascending order."""
    return np.linalg.eigvalsh(dense_matrix(H, threshold))


# basis changes ------------------------------------------------------------------------


@dataclass(frozen=True)
class HadamardMask:
    """``W(x) = prod_i W_i**x_i`` with bit ``i`` of ``bits`` for qubit ``i``."""

    n: int
    bits: int = 0

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError("mask exceeds register")

    @classmethod
    def from_sequence(cls, seq: Sequence[int]) -> HadamardMask:
        return cls(len(seq), sum((1 << i) for i, b in enumerate(seq) if b))

    @classmethod
    def on(cls, n: int, qubits: Iterable[int]) -> HadamardMask:
        return cls(n, sum(1 << q for q in set(qubits)))

    def qubits(self) -> list[int]:
        return [i for i in range(self.n) if (self.bits >> i) & 1]

    def __str__(self) -> str:
        return "".join(str((self.bits >> i) & 1) for i in range(self.n))


def conjugate_hadamard(H: Hamiltonian, mask: HadamardMask | int) -> Hamiltonian:
    """``W(x)^dagger H W(x)``: X and Z swap on masked qubits and Y changes sign."""
    m = mask.bits if isinstance(mask, HadamardMask) else int(mask)
    out = {}
    for s, c in H.items():
        keep = ~m
        x = (s.x & keep) | (s.z & m)
        z = (s.z & keep) | (s.x & m)
        if (s.x & s.z & m).bit_count() % 2:
            c = -c
        out[PauliString(H.n, x, z)] = c
    return Hamiltonian(H.n, out, H.offset, name=H.name, provenance=H.provenance, real=False)


@dataclass(frozen=True)
class CliffordTableau:
    """Signed images of every ``X_i`` and ``Z_i`` under a Clifford map."""

    n: int
    x_images: tuple[PauliString, ...]
    z_images: tuple[PauliString, ...]
    x_signs: tuple[int, ...]
    z_signs: tuple[int, ...]

    @classmethod
    def identity(cls, n: int) -> CliffordTableau:
        xs = tuple(PauliString(n, 1 << i, 0) for i in range(n))
        zs = tuple(PauliString(n, 0, 1 << i) for i in range(n))
        return cls(n, xs, zs, (1,) * n, (1,) * n)

    @classmethod
    def hadamard(cls, n: int, qubits: Iterable[int]) -> CliffordTableau:
        t = cls.identity(n)
        xs, zs = list(t.x_images), list(t.z_images)
        for q in qubits:
            xs[q], zs[q] = zs[q], xs[q]
        return cls(n, tuple(xs), tuple(zs), t.x_signs, t.z_signs)

    @classmethod
    def pauli_x(cls, n: int, q: int) -> CliffordTableau:
        """Conjugation by ``X_q``: ``Z_q -> -Z_q``."""
        t = cls.identity(n)
        zs = list(t.z_signs)
        zs[q] = -1
        return cls(n, t.x_images, t.z_images, t.x_signs, tuple(zs))

    @classmethod
    def cnot(cls, n: int, control: int, target: int) -> CliffordTableau:
        t = cls.identity(n)
        xs, zs = list(t.x_images), list(t.z_images)
        xs[control] = PauliString(n, (1 << control) | (1 << target), 0)
        zs[target] = PauliString(n, 0, (1 << control) | (1 << target))
        return cls(n, tuple(xs), tuple(zs), t.x_signs, t.z_signs)

    def generator_images(self) -> list[tuple[PauliString, PauliString, int]]:
        out = []
        for i in range(self.n):
            out.append((PauliString(self.n, 1 << i, 0), self.x_images[i], self.x_signs[i]))
            out.append((PauliString(self.n, 0, 1 << i), self.z_images[i], self.z_signs[i]))
        return out

    def validate(self) -> None:
        """Raise :class:`InvalidTableau` unless the images preserve the symplectic form."""
        from .pauli import symplectic_product

        gens = self.generator_images()
        for img in [g[1] for g in gens]:
            if img.n != self.n:
                raise InvalidTableau("image on wrong register")
        for sgn in self.x_signs + self.z_signs:
            if sgn not in (1, -1):
                raise InvalidTableau("signs must be +1 or -1")
        for a in range(len(gens)):
            for b in range(a + 1, len(gens)):
                want = symplectic_product(gens[a][0], gens[b][0])
                got = symplectic_product(gens[a][1], gens[b][1])
                if want != got:
                    raise InvalidTableau(f"images of {gens[a][0]} and {gens[b][0]} break the symplectic form")

    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidTableau:
            return False
        return True

    def image(self, p: PauliString) -> tuple[PauliString, int]:
        """Image of the Hermitian string ``p`` as ``(r, k)`` meaning ``i**k r``."""
        if p.n != self.n:
            raise InvalidTableau("string on wrong register")
        r = PauliString.identity(self.n)
        k = p.y_count
        for i in range(self.n):
            if (p.x >> i) & 1:
                r, dk = multiply_exponent(r, self.x_images[i])
                k += dk + (2 if self.x_signs[i] < 0 else 0)
        for i in range(self.n):
            if (p.z >> i) & 1:
                r, dk = multiply_exponent(r, self.z_images[i])
                k += dk + (2 if self.z_signs[i] < 0 else 0)
        return r, k % 4

    def signed_image(self, p: PauliString) -> tuple[PauliString, int]:
        r, k = self.image(p)
        if k % 2:
            raise InvalidTableau(f"image of {p} is not Hermitian")
        return r, (1 if k == 0 else -1)

    def then(self, other: CliffordTableau) -> CliffordTableau:
        """Apply ``self`` first and ``other`` second."""
        xs, zs, xsg, zsg = [], [], [], []
        for i in range(self.n):
            r, s = other.signed_image(self.x_images[i])
            xs.append(r)
            xsg.append(s * self.x_signs[i])
            r, s = other.signed_image(self.z_images[i])
            zs.append(r)
            zsg.append(s * self.z_signs[i])
        return CliffordTableau(self.n, tuple(xs), tuple(zs), tuple(xsg), tuple(zsg))

    def to_json(self) -> dict:
        return {
            "qubits": self.n,
            "X": [("-" if s < 0 else "+") + str(p) for p, s in zip(self.x_images, self.x_signs)],
            "Z": [("-" if s < 0 else "+") + str(p) for p, s in zip(self.z_images, self.z_signs)],
        }


def conjugate_clifford(H: Hamiltonian, C: CliffordTableau) -> Hamiltonian:
    """Map every term of ``H`` through the tableau images, tracking signs exactly."""
    if C.n != H.n:
        raise InvalidTableau("tableau and Hamiltonian registers differ")
    C.validate()
    out = []
    for s, c in H.items():
        r, sgn = C.signed_image(s)
        out.append((r, sgn * c))
    return Hamiltonian(H.n, out, H.offset, name=H.name, provenance=H.provenance, real=False)


# HSUM text format ------------------------------------------------------------------------


def _parse_coeff(tok: str, lineno: int) -> Fraction:
    low = tok.lower()
    if any(ch in low for ch in "ij") and not low.startswith(("inf", "nan")):
        raise NonRealCoefficient(lineno, f"non-real coefficient {tok!r}")
    try:
        c = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise MalformedLine(lineno, f"bad coefficient {tok!r}") from None
    return c


def parse_hsum(text: str, *, real: bool = True) -> Hamiltonian:
    """Parse the HSUM v1 text format.

    ``#`` starts a comment line (``# name: ...`` and ``# provenance: ...`` are
    kept as metadata); the first other line is ``qubits N``; each further
    line is a coefficient followed by factors like ``X0 Z3`` or the token
    ``I``.
    """
    n = None
    name = provenance = None
    terms = []
    offset = Fraction(0)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("name:"):
                name = body[5:].strip()
            elif body.lower().startswith("provenance:"):
                provenance = body[11:].strip()
            continue
        toks = line.split()
        if n is None:
            if len(toks) != 2 or toks[0] != "qubits":
                raise MalformedLine(lineno, "expected header 'qubits N'")
            try:
                n = int(toks[1])
            except ValueError:
                raise MalformedLine(lineno, f"bad qubit count {toks[1]!r}") from None
            if n < 0:
                raise MalformedLine(lineno, "negative qubit count")
            continue
        if len(toks) < 2:
            raise MalformedLine(lineno, "term needs a coefficient and at least one factor")
        c = _parse_coeff(toks[0], lineno)
        if toks[1:] == ["I"]:
            offset += c
            continue
        x = z = 0
        seen = set()
        for tok in toks[1:]:
            if len(tok) < 2 or tok[0] not in "XYZ" or not tok[1:].isdigit():
                raise MalformedLine(lineno, f"bad factor {tok!r}")
            q = int(tok[1:])
            if q >= n:
                raise QubitIndexOutOfRange(lineno, f"qubit {q} >= {n}")
            if q in seen:
                raise RepeatedIndex(lineno, f"qubit {q} repeated in one term")
            seen.add(q)
            if tok[0] in "XY":
                x |= 1 << q
            if tok[0] in "ZY":
                z |= 1 << q
        s = PauliString(n, x, z)
        if real and not s.is_real:
            raise NonRealHamiltonian(f"line {lineno}: term {s} has an odd number of Y factors")
        terms.append((c, s))
    if n is None:
        raise MalformedLine(0, "missing 'qubits N' header")
    return Hamiltonian(n, terms, offset, name=name, provenance=provenance, real=real)


def serialize_hsum(H: Hamiltonian, comments: Sequence[str] = ()) -> str:
    lines = ["# HSUM v1"]
    if H.name:
        lines.append(f"# name: {H.name}")
    if H.provenance:
        lines.append(f"# provenance: {H.provenance}")
    lines.extend(f"# {c}" for c in comments)
    lines.append(f"qubits {H.n}")
    if H.offset:
        lines.append(f"{H.offset} I")
    for s, c in H.items():
        lines.append(f"{c} {s}")
    return "\n".join(lines) + "\n"


def read_hsum(path) -> Hamiltonian:
    with open(path, encoding="utf-8") as fh:
        return parse_hsum(fh.read())


def write_hsum(H: Hamiltonian, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_hsum(H, comments))


def dumps_json(H: Hamiltonian) -> str:
    return json.dumps(H.to_json(), indent=2)
