"""Deciders for global and termwise stoquasticity, the X/CNOT decomposition
of globally stoquastic Hamiltonians and the acceptance probability of the
associated verification circuit.

Everything that decides a YES/NO question runs in exact rational or scaled
integer arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from ._parallel import ordered_map
from .hamiltonian import (
    CliffordTableau,
    FlipGroup,
    Hamiltonian,
    HamiltonianError,
    NonRealHamiltonian,
    bits_key,
    conjugate_clifford,
    dense_matrix,
    dense_matrix_scaled,
)
from .lp import check_farkas, solve_feasibility
from .pauli import PauliString

__all__ = [
    "Status",
    "GlobalVerdict",
    "Generator",
    "TermwiseCertificate",
    "Gate",
    "DecompositionTerm",
    "StoqDecomposition",
    "AcceptanceReport",
    "NotGloballyStoquastic",
    "DecompositionError",
    "check_global",
    "check_termwise",
    "decompose_global",
    "stoqma_acceptance",
    "primitive_expectation",
    "zero_projector",
    "threshold_projector",
    "with_flip_qubit",
    "averaging_identity_holds",
    "flip_pair_operator",
    "subcube_projector",
    "bitstring",
]

DEFAULT_BUDGET = 24
_CHUNK = 1 << 20


class Status(str, enum.Enum):
    STOQUASTIC = "Stoquastic"
    NOT_STOQUASTIC = "NotStoquastic"
    UNDECIDED = "Undecided"


class NotGloballyStoquastic(HamiltonianError):
    pass


class DecompositionError(AssertionError):
    """A decomposition failed its own reconstruction check (a bug, never input)."""


def bitstring(v: int, n: int) -> str:
    return "".join(str((v >> i) & 1) for i in range(n))


def _require_real(H: Hamiltonian):
    if not H.is_real:
        raise NonRealHamiltonian("stoquasticity is defined for real Hamiltonians only")


# global check -----------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalVerdict:
    status: Status
    n: int
    witness: tuple[int, int] | None = None
    value: Fraction | None = None
    budget_used: int = 0
    skipped: tuple[int, ...] = ()

    @property
    def stoquastic(self) -> bool:
        return self.status is Status.STOQUASTIC

    def to_json(self) -> dict:
        out = {
            "status": self.status.value,
            "budget_used": self.budget_used,
            "skipped_groups": [bitstring(S, self.n) for S in self.skipped],
        }
        if self.witness is not None:
            out["witness"] = [bitstring(self.witness[0], self.n), bitstring(self.witness[1], self.n)]
            out["entry"] = str(self.value)
        return out


def _reverse_bits(t: np.ndarray, r: int) -> np.ndarray:
    out = np.zeros_like(t)
    for j in range(r):
        out |= ((t >> j) & 1) << (r - 1 - j)
    return out


def _expand(t: int, qubits: list[int]) -> int:
    v = 0
    for j, q in enumerate(qubits):
        if (t >> j) & 1:
            v |= 1 << q
    return v


def _group_maximum(group: FlipGroup) -> tuple[Fraction, int] | None:
    """Largest entry of the group and its lexicographically smallest column string."""
    fq = group.free_qubits
    r = len(fq)
    best = None  # (value, key, col)
    for a in group.reps:
        poly = group.entry_poly[a]
        if not poly:
            cand = (Fraction(0), bits_key(a, group.n), a)
        else:
            bound = sum(abs(c) for c in poly.values())
            denom = math.lcm(*(c.denominator for c in poly.values()))
            if bound * denom >= 2**62:
                raise OverflowError("flip-group coefficients too large for exact int64 evaluation")
            vmax = None
            tmin = None
            for lo in range(0, 1 << r, _CHUNK):
                hi = min(1 << r, lo + _CHUNK)
                vals, d = group.table(a, (lo, hi))
                m = int(vals.max())
                idx = np.flatnonzero(vals == m) + lo
                t = int(idx[np.argmin(_reverse_bits(idx, r))])
                if vmax is None or m > vmax:
                    vmax, tmin = m, t
                elif m == vmax and bits_key(t, r) < bits_key(tmin, r):
                    tmin = t
            col = a | _expand(tmin, fq)
            cand = (Fraction(vmax, d), bits_key(col, group.n), col)
        if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
            best = cand
    return best[0], best[2]


def check_global(H: Hamiltonian, budget: int = DEFAULT_BUDGET) -> GlobalVerdict:
    """Decide whether every off-diagonal entry of ``H`` is ``<= 0``.

    Each flip group is maximized exhaustively over its relevant support when
    that support has at most ``budget`` qubits; larger groups are skipped
    and, if no positive entry turns up elsewhere, the verdict is Undecided.
    """
    _require_real(H)
    groups = [g for S, g in H.flip_groups.items() if S]
    todo = [g for g in groups if g.R.bit_count() <= budget]
    skipped = tuple(g.S for g in groups if g.R.bit_count() > budget)
    used = max((g.R.bit_count() for g in todo), default=0)
    results = ordered_map(_group_maximum, todo)
    for g, (value, col) in zip(todo, results):
        if value > 0:
            return GlobalVerdict(Status.NOT_STOQUASTIC, H.n, (col, col ^ g.S), value, used, skipped)
    status = Status.UNDECIDED if skipped else Status.STOQUASTIC
    return GlobalVerdict(status, H.n, None, None, used, skipped)


# termwise check -----------------------------------------------------------------


def flip_pair_operator(n: int, S: int, a: int) -> Hamiltonian:
    """``|a^S><a| + |a><a^S|`` on the qubits of ``S`` as a Pauli sum."""
    qs = [i for i in range(n) if (S >> i) & 1]
    scale = Fraction(2, 1 << len(qs))
    terms = []
    for t in range(1 << len(qs)):
        zs = _expand(t, qs)
        w = zs.bit_count()
        if w % 2:
            continue
        c = scale if (w // 2 + (zs & a).bit_count()) % 2 == 0 else -scale
        terms.append((c, PauliString(n, S, zs)))
    return Hamiltonian(n, terms)


def subcube_projector(n: int, T: int, z: int) -> Hamiltonian:
    """``|z><z|`` on the qubits of ``T`` as a sum of Z strings."""
    qs = [i for i in range(n) if (T >> i) & 1]
    scale = Fraction(1, 1 << len(qs))
    terms = []
    for t in range(1 << len(qs)):
        U = _expand(t, qs)
        terms.append((scale if (z & U).bit_count() % 2 == 0 else -scale, PauliString(n, 0, U)))
    return Hamiltonian(n, terms)


@dataclass(frozen=True)
class Generator:
    """``-weight * (|a^S><a| + |a><a^S|)_S (x) |z><z|_T``, entrywise stoquastic."""

    S: int
    a: int
    T: int
    z: int
    weight: Fraction

    @property
    def locality(self) -> int:
        return (self.S | self.T).bit_count()

    def to_hamiltonian(self, n: int) -> Hamiltonian:
        return (flip_pair_operator(n, self.S, self.a) * subcube_projector(n, self.T, self.z)).scale(-self.weight)

    def to_json(self, n: int) -> dict:
        return {"S": bitstring(self.S, n), "a": bitstring(self.a, n), "T": bitstring(self.T, n),
                "z": bitstring(self.z, n), "weight": str(self.weight)}


@dataclass(frozen=True)
class TermwiseCertificate:
    """Outcome of the termwise check.

    On YES ``generators`` plus ``diagonal`` sum to the input exactly.  On NO
    ``failure`` holds ``(S, a)``, ``reason`` says why and ``farkas`` holds an
    exact infeasibility certificate when the LP was needed.
    """

    yes: bool
    n: int
    m: int
    generators: tuple[Generator, ...] = ()
    diagonal: Hamiltonian | None = None
    failure: tuple[int, int] | None = None
    reason: str = ""
    farkas: tuple[Fraction, ...] | None = None

    def to_hamiltonian(self) -> Hamiltonian:
        total = self.diagonal if self.diagonal is not None else Hamiltonian(self.n)
        for g in self.generators:
            total = total + g.to_hamiltonian(self.n)
        return total

    def reconstructs(self, H: Hamiltonian) -> bool:
        return self.yes and self.to_hamiltonian() == H

    def to_json(self) -> dict:
        out = {"termwise_stoquastic": self.yes, "m": self.m}
        if self.yes:
            out["generators"] = [g.to_json(self.n) for g in self.generators]
            out["diagonal"] = self.diagonal.to_json() if self.diagonal is not None else None
        else:
            S, a = self.failure
            out["failure"] = {"S": bitstring(S, self.n), "a": bitstring(a, self.n), "reason": self.reason}
            if self.farkas is not None:
                out["failure"]["farkas"] = [str(v) for v in self.farkas]
        return out


def _pair_generators(n: int, S: int, a: int, g: dict[int, Fraction], m: int):
    """Decide whether ``g`` is a nonnegative combination of subcube indicators.

    Returns ``(generators, None, None)`` on success or
    ``(None, reason, farkas)`` on failure.
    """
    d = m - S.bit_count()
    if not g:
        return [], None, None
    if d < 0:
        return None, "flip set larger than m", None
    F = 0
    for ch in g:
        F |= ch
    if max(ch.bit_count() for ch in g) > d:
        return None, "entry function has parity degree above m - |S|", None
    fq = [i for i in range(n) if (F >> i) & 1]
    r = len(fq)

    def value(z: int) -> Fraction:
        return sum((c if (ch & z).bit_count() % 2 == 0 else -c for ch, c in g.items()), Fraction(0))

    if d >= r:
        gens = []
        for t in range(1 << r):
            z = _expand(t, fq)
            v = value(z)
            if v < 0:
                return None, f"entry positive at {bitstring(z, n)}", None
            if v > 0:
                gens.append(Generator(S, a, F, z, v))
        return gens, None, None

    # only subcubes of the largest size are needed: a smaller one is a sum of larger ones
    supports = [sum(1 << q for q in c) for c in combinations(fq, d)]
    cols = [(T, _expand(t, [q for q in fq if (T >> q) & 1])) for T in supports for t in range(1 << d)]
    rows = [sum(1 << q for q in c) for k in range(d + 1) for c in combinations(fq, k)]
    A = [[Fraction(0 if U & ~T else (1 if (z & U).bit_count() % 2 == 0 else -1)) for T, z in cols]
         for U in rows]
    b = [g.get(U, Fraction(0)) * (1 << d) for U in rows]
    res = solve_feasibility(A, b)
    if not res.feasible:
        if not check_farkas(A, b, res.farkas):
            raise DecompositionError("invalid infeasibility certificate")
        return None, "no nonnegative combination of m-local stoquastic terms", res.farkas
    gens = [Generator(S, a, T, z, p) for (T, z), p in zip(cols, res.point) if p > 0]
    return gens, None, None


def check_termwise(H: Hamiltonian, m: int) -> TermwiseCertificate:
    """Decide whether ``H`` is a sum of ``m``-local stoquastic terms."""
    _require_real(H)
    diag = H.diagonal_part()
    jobs = []
    for S, group in H.flip_groups.items():
        if S == 0:
            continue
        for a in group.reps:
            g = {ch: -c for ch, c in group.entry_poly[a].items()}
            jobs.append((S, a, g))
    results = ordered_map(lambda job: _pair_generators(H.n, job[0], job[1], job[2], m), jobs)
    gens = []
    for (S, a, _), (found, reason, farkas) in zip(jobs, results):
        if found is None:
            return TermwiseCertificate(False, H.n, m, failure=(S, a), reason=reason, farkas=farkas)
        gens.extend(found)
    return TermwiseCertificate(True, H.n, m, tuple(gens), diag)


# decomposition ------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.name} " + " ".join(map(str, self.qubits))

    def tableau(self, n: int) -> CliffordTableau:
        if self.name == "X":
            return CliffordTableau.pauli_x(n, self.qubits[0])
        return CliffordTableau.cnot(n, *self.qubits)

    def permute(self, v: int) -> int:
        if self.name == "X":
            return v ^ (1 << self.qubits[0])
        c, t = self.qubits
        return v ^ (((v >> c) & 1) << t)


@dataclass(frozen=True)
class DecompositionTerm:
    """``C^dagger (-X_flip (x) |0><0|_{S - flip} (x) H_j) C`` with ``C`` the gate list."""

    S: int
    a: int
    flip: int
    gates: tuple[Gate, ...]
    Hj: Hamiltonian

    def circuit_inverse_tableau(self, n: int) -> CliffordTableau:
        # P -> C^dagger P C for C = g_k ... g_1: conjugate by g_k first
        t = CliffordTableau.identity(n)
        for g in reversed(self.gates):
            t = t.then(g.tableau(n))
        return t

    def core(self, n: int, sign: int = -1) -> Hamiltonian:
        op = Hamiltonian.pauli(n, [("X", self.flip)], sign)
        for q in range(n):
            if (self.S >> q) & 1 and q != self.flip:
                op = op * Hamiltonian.projector(n, q, 0)
        return op * self.Hj

    def operator(self, n: int, sign: int = -1) -> Hamiltonian:
        return conjugate_clifford(self.core(n, sign), self.circuit_inverse_tableau(n))

    def apply_circuit(self, v: int) -> int:
        for g in self.gates:
            v = g.permute(v)
        return v


@dataclass(frozen=True)
class StoqDecomposition:
    n: int
    beta: Fraction
    H0: Hamiltonian
    terms: tuple[DecompositionTerm, ...]
    M: Fraction
    source_terms: int
    locality: int

    @property
    def m_prime(self) -> int:
        return len(self.terms)

    def reconstruct(self) -> Hamiltonian:
        """``-H0 + sum_j C_j^dagger(-X (x) H_j)C_j``, which must equal ``H + beta I``."""
        total = -self.H0
        for t in self.terms:
            total = total + t.operator(self.n)
        return total

    def to_json(self) -> dict:
        return {
            "beta": str(self.beta),
            "M": str(self.M),
            "m_prime": self.m_prime,
            "H0": self.H0.to_json(),
            "terms": [
                {"S": bitstring(t.S, self.n), "x": bitstring(t.a, self.n), "flip_qubit": t.flip,
                 "circuit": [str(g) for g in t.gates], "H_j": t.Hj.to_json()}
                for t in self.terms
            ],
        }


def _diagonal_from_poly(n: int, poly: dict[int, Fraction], scale: int = 1) -> Hamiltonian:
    return Hamiltonian(n, [(scale * c, PauliString(n, 0, ch)) for ch, c in poly.items() if ch],
                       scale * poly.get(0, Fraction(0)))


def _min_value(n: int, H: Hamiltonian) -> Fraction:
    """Exact minimum of a diagonal Hamiltonian over its Z support."""
    sup = H.support
    qs = [i for i in range(n) if (sup >> i) & 1]
    best = None
    for t in range(1 << len(qs)):
        x = _expand(t, qs)
        v = H.offset + sum((c if (s.z & x).bit_count() % 2 == 0 else -c) for s, c in H.items())
        best = v if best is None or v < best else best
    return best if best is not None else H.offset


def _max_value(n: int, H: Hamiltonian) -> Fraction:
    return -_min_value(n, -H)


def decompose_global(H: Hamiltonian, verify: bool = True, dense_limit: int = 12) -> StoqDecomposition:
    """Write ``H + beta I = -H0 + sum_j C_j^dagger (-X (x) |0><0| (x) H_j) C_j``.

    Raises :class:`NotGloballyStoquastic` unless ``check_global`` says YES.
    """
    verdict = check_global(H)
    if not verdict.stoquastic:
        raise NotGloballyStoquastic(f"check_global returned {verdict.status.value}")
    n = H.n
    diag = H.diagonal_part()
    beta = -sum((abs(c) for s, c in diag.items()), abs(H.offset))
    H0 = (-diag) - beta
    M = 2 * H.coefficient_norm()
    terms = []
    for S, group in H.flip_groups.items():
        if S == 0:
            continue
        s0 = (S & -S).bit_length() - 1
        for a in group.reps:
            poly = group.entry_poly[a]
            if not poly:
                continue
            Hj = _diagonal_from_poly(n, poly, -1)
            gates = [Gate("X", (q,)) for q in range(n) if (a >> q) & 1]
            gates += [Gate("CNOT", (s0, q)) for q in range(n) if (S >> q) & 1 and q != s0]
            terms.append(DecompositionTerm(S, a, s0, tuple(gates), Hj))
    dec = StoqDecomposition(n, beta, H0, tuple(terms), M, H.term_count, H.locality)
    if verify:
        _verify_decomposition(H, dec, dense_limit)
    return dec


def _verify_decomposition(H: Hamiltonian, dec: StoqDecomposition, dense_limit: int):
    n = H.n
    if dec.beta > 0:
        raise DecompositionError("beta must be <= 0")
    if _min_value(n, dec.H0) < 0:
        raise DecompositionError("H0 is not nonnegative")
    for t in dec.terms:
        if not t.Hj.is_diagonal or _min_value(n, t.Hj) < 0:
            raise DecompositionError("H_j is not a nonnegative diagonal operator")
        if _max_value(n, t.Hj) > dec.M:
            raise DecompositionError("H_j exceeds the norm bound M")
        if t.apply_circuit(t.a) != 0 or t.apply_circuit(t.a ^ t.S) != 1 << t.flip:
            raise DecompositionError("circuit does not map the flip pair to |0>, |e_flip>")
    if dec.m_prime > dec.source_terms * 4 ** dec.locality:
        raise DecompositionError("too many decomposition terms")
    if dec.reconstruct() != H + dec.beta:
        raise DecompositionError("decomposition does not reconstruct H + beta I")
    if n <= dense_limit:
        target, d = dense_matrix_scaled(H + dec.beta)
        if not np.array_equal(_dense_from_parts(dec, d), target):
            raise DecompositionError("dense reconstruction mismatch")


def _dense_from_parts(dec: StoqDecomposition, d: int) -> np.ndarray:
    """Assemble the decomposition entry by entry from the gate permutations."""
    n = dec.n
    M, _ = dense_matrix_scaled(-dec.H0, d)
    dim = 1 << n
    for t in dec.terms:
        hj, _ = dense_matrix_scaled(t.Hj, d)
        hv = np.diag(hj)
        rest = t.S & ~(1 << t.flip)
        for v in range(dim):
            u = t.apply_circuit(v)
            if u & rest:
                continue
            # <w| C^dagger (-X_flip (x) P_0 (x) H_j) C |v> with C w = u ^ e_flip
            w = _invert(t, u ^ (1 << t.flip))
            M[w, v] += -int(hv[u])
    return M


def _invert(t: DecompositionTerm, u: int) -> int:
    for g in reversed(t.gates):
        u = g.permute(u)
    return u


# acceptance probability ------------------------------------------------------------------


def primitive_expectation(G: np.ndarray, psi: np.ndarray) -> float:
    """``<psi| (I + G)/2 |psi>``."""
    return float(np.real(np.vdot(psi, psi) + np.vdot(psi, G @ psi))) / 2


def zero_projector(n: int) -> np.ndarray:
    P = np.zeros((1 << n, 1 << n))
    P[0, 0] = 1.0
    return P


def threshold_projector(values, alpha) -> np.ndarray:
    """Projector onto basis states whose diagonal value is at least ``alpha``."""
    return np.diag([1.0 if v >= alpha else 0.0 for v in values])


def with_flip_qubit(G: np.ndarray) -> np.ndarray:
    """``X (x) G`` with the X acting on a new lowest qubit."""
    return np.kron(G, np.array([[0.0, 1.0], [1.0, 0.0]]))


def averaging_identity_holds(values, M) -> bool:
    """Exact check of ``(1/M) int_0^M P_{>=alpha} d alpha = D / M`` for ``0 <= D <= M``.

    ``values`` is the diagonal of ``D``.  The integrand is piecewise constant
    between consecutive distinct values, so the integral is a finite sum.
    """
    vals = [Fraction(v) for v in values]
    M = Fraction(M)
    if any(v < 0 or v > M for v in vals):
        return False
    cuts = sorted(set(vals) | {Fraction(0), M})
    acc = [Fraction(0)] * len(vals)
    for lo, hi in zip(cuts, cuts[1:]):
        for i, v in enumerate(vals):
            if v >= hi:
                acc[i] += hi - lo
    return all(a / M == v / M for a, v in zip(acc, vals))


@dataclass(frozen=True)
class AcceptanceReport:
    probability: float
    closed_form: float
    per_term: tuple[float, ...] = field(repr=False)
    energy: float = 0.0


def stoqma_acceptance(H: Hamiltonian, dec: StoqDecomposition, psi) -> AcceptanceReport:
    """Average over ``j = 0..m'`` of ``<psi|(I + G_j)/2|psi>``.

    ``G_0 = H0/M`` and ``G_j = C_j^dagger (X (x) |0><0| (x) H_j/M) C_j``.
    """
    psi = np.asarray(psi, dtype=complex)
    dim = 1 << H.n
    if psi.shape != (dim,):
        raise ValueError(f"state has shape {psi.shape}, expected ({dim},)")
    if abs(np.vdot(psi, psi).real - 1) > 1e-10:
        raise ValueError("state is not normalized")
    M = float(dec.M)
    per = [primitive_expectation(dense_matrix(dec.H0) / M, psi)]
    for t in dec.terms:
        G = dense_matrix(t.operator(H.n, sign=1)) / M
        per.append(primitive_expectation(G, psi))
    prob = float(np.mean(per))
    energy = float(np.real(np.vdot(psi, dense_matrix(H) @ psi)))
    closed = 0.5 * (1 - (energy + float(dec.beta)) / ((dec.m_prime + 1) * M))
    return AcceptanceReport(prob, closed, tuple(per), energy)
