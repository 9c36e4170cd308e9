"""Instance generators and brute-force oracles for the hardness constructions.

Spins and bits are related by ``S_i = <x|Z_i|x> = 1 - 2 x_i``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .hamiltonian import Hamiltonian, HamiltonianError, bits_key, conjugate_hadamard
from .pauli import PauliString, exact
from .stoq import Status, _group_maximum, check_global, check_termwise

__all__ = [
    "IsingInstance",
    "CnfFormula",
    "ReductionReport",
    "Prop1Instance",
    "SizeBudgetExceeded",
    "Sigma2Layout",
    "Sigma2Instance",
    "ising_energies",
    "ising_ground_energy",
    "gen_prop1",
    "check_frustration_free_decomposition",
    "solve_ps",
    "gen_conp",
    "gadget_3sat_to_minmax",
    "satisfied_counts",
    "eval_minmax",
    "eval_neg_minmax",
    "eval_forall_exists",
    "build_hc",
    "hc_properties_hold",
    "build_gadgets",
    "assemble_sigma2",
    "sigma2_mask_search",
    "verify_gadget_restriction",
    "parse_graph",
    "read_graph",
    "serialize_graph",
    "parse_dimacs",
    "read_dimacs",
    "serialize_dimacs",
    "random_graph",
    "random_cnf",
]

ORACLE_BUDGET = 24


class SizeBudgetExceeded(HamiltonianError):
    pass


def _budget(n: int, limit: int = ORACLE_BUDGET):
    if n > limit:
        raise SizeBudgetExceeded(f"{n} variables exceeds the brute-force budget {limit}")


# Ising instances ------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingInstance:
    """Couplings ``J`` on a simple graph; ``fields`` adds ``sum_i S_i``."""

    n: int
    edges: tuple[tuple[int, int, Fraction], ...]
    fields: bool = False
    planar: bool | None = None

    def __post_init__(self):
        seen = set()
        clean = []
        for u, v, J in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"bad edge ({u}, {v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"repeated edge {key}")
            seen.add(key)
            clean.append((key[0], key[1], exact(J)))
        object.__setattr__(self, "edges", tuple(clean))

    @classmethod
    def triangle(cls, J=1, fields=False) -> IsingInstance:
        return cls(3, ((0, 1, J), (1, 2, J), (0, 2, J)), fields)

    def energy(self, spins: Sequence[int]) -> Fraction:
        e = sum((J * spins[u] * spins[v] for u, v, J in self.edges), Fraction(0))
        return e + (sum(spins) if self.fields else 0)

    def diagonal_hamiltonian(self, n: int | None = None, offset: int = 0) -> Hamiltonian:
        """``sum J Z_u Z_v (+ sum Z_i)`` with vertex ``v`` on qubit ``v + offset``."""
        N = self.n + offset if n is None else n
        terms = [(J, PauliString(N, 0, (1 << (u + offset)) | (1 << (v + offset)))) for u, v, J in self.edges]
        if self.fields:
            terms += [(1, PauliString(N, 0, 1 << (i + offset))) for i in range(self.n)]
        return Hamiltonian(N, terms)


def ising_energies(inst: IsingInstance) -> tuple[np.ndarray, int]:
    """Scaled energies of every bit string, index bit ``i`` = ``x_i``."""
    _budget(inst.n)
    d = 1
    for _, _, J in inst.edges:
        d = d * J.denominator // np.gcd(d, J.denominator)
    x = np.arange(1 << inst.n, dtype=np.int64)
    spin = [1 - 2 * ((x >> i) & 1) for i in range(inst.n)]
    e = np.zeros(1 << inst.n, dtype=np.int64)
    for u, v, J in inst.edges:
        e += int(J * d) * spin[u] * spin[v]
    if inst.fields:
        for s in spin:
            e += d * s
    return e, d


def _lex_argmin(values: np.ndarray, n: int) -> int:
    idx = np.flatnonzero(values == values.min())
    rev = np.zeros_like(idx)
    for j in range(n):
        rev |= ((idx >> j) & 1) << (n - 1 - j)
    return int(idx[np.argmin(rev)])


def ising_ground_energy(inst: IsingInstance) -> tuple[Fraction, tuple[int, ...]]:
    e, d = ising_energies(inst)
    x = _lex_argmin(e, inst.n)
    return Fraction(int(e[x]), d), tuple(1 - 2 * ((x >> i) & 1) for i in range(inst.n))


def solve_ps(inst: IsingInstance) -> tuple[Fraction, tuple[int, ...]]:
    """Minimum of ``sum J S_u S_v + sum S_i`` (fields always on), lexicographic tie-break on bits."""
    with_fields = IsingInstance(inst.n, inst.edges, True, inst.planar)
    return ising_ground_energy(with_fields)


@dataclass(frozen=True)
class ReductionReport:
    kind: str
    instance: str
    oracle: bool
    hamiltonian_side: bool

    @property
    def agree(self) -> bool:
        return self.oracle == self.hamiltonian_side

    def to_json(self) -> dict:
        return {"kind": self.kind, "instance": self.instance, "oracle": self.oracle,
                "hamiltonian_side": self.hamiltonian_side, "agree": self.agree}


@dataclass(frozen=True)
class Prop1Instance:
    hamiltonian: Hamiltonian
    E0: Fraction
    frustrated: bool


def gen_prop1(inst: IsingInstance) -> Prop1Instance:
    """``X_0 (x) (E0 - H_Ising)`` with vertex ``v`` on qubit ``v + 1``."""
    E0, _ = ising_ground_energy(inst)
    Hc = inst.diagonal_hamiltonian(inst.n + 1, offset=1)
    core = (Hc.scale(-1) + E0)
    H = Hamiltonian.pauli(inst.n + 1, [("X", 0)]) * core
    bound = -sum(abs(J) for _, _, J in inst.edges) - (inst.n if inst.fields else 0)
    return Prop1Instance(H.with_meta(name="prop1", provenance="X_0 (x) (E0 - H_Ising)"), E0, E0 > bound)


def check_frustration_free_decomposition(H_class: Hamiltonian, m: int) -> bool:
    """Whether ``H_class`` splits into ``m``-local terms whose minima add up to its minimum.

    Decided as termwise stoquasticity of ``X_0 (x) (E0 - H_class)`` at locality ``m + 1``.
    """
    if not H_class.is_diagonal:
        raise HamiltonianError("classical Hamiltonian must be diagonal")
    _budget(H_class.n)
    n = H_class.n
    lifted = H_class.embed(n + 1, [i + 1 for i in range(n)])
    from .hamiltonian import diagonal_values_scaled

    vals, d = diagonal_values_scaled(H_class)
    E0 = Fraction(int(vals.min()), d)
    H = Hamiltonian.pauli(n + 1, [("X", 0)]) * (lifted.scale(-1) + E0)
    return check_termwise(H, m + 1).yes


def gen_conp(inst: IsingInstance, K: int, eps=Fraction(1, 2)) -> Hamiltonian:
    """``(K + eps) X_c - sum J Z_u Z_v X_c - sum Z_i X_c`` with control ``c = n``."""
    eps = exact(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = inst.n
    c = 1 << n
    terms = [(exact(K) + eps, PauliString(n + 1, c, 0))]
    terms += [(-J, PauliString(n + 1, c, (1 << u) | (1 << v))) for u, v, J in inst.edges]
    terms += [(-1, PauliString(n + 1, c, 1 << i)) for i in range(n)]
    prov = f"coNP reduction K={K} eps={eps} planar={inst.planar}"
    return Hamiltonian(n + 1, terms, name="conp", provenance=prov)


# CNF formulas -------------------------------------------------------------------------------


@dataclass(frozen=True)
class CnfFormula:
    """Clauses over DIMACS literals: variables ``1..n_x`` are universal, the next ``n_y`` existential."""

    n_x: int
    n_y: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cl = tuple(tuple(int(v) for v in c) for c in self.clauses)
        for c in cl:
            if not c:
                raise ValueError("empty clause")
            for lit in c:
                if lit == 0 or abs(lit) > self.n_x + self.n_y:
                    raise ValueError(f"literal {lit} references an undeclared variable")
        object.__setattr__(self, "clauses", cl)

    @property
    def n_vars(self) -> int:
        return self.n_x + self.n_y

    @property
    def m(self) -> int:
        return len(self.clauses)

    def is_universal(self, lit: int) -> bool:
        return abs(lit) <= self.n_x

    def satisfied(self, bits: int) -> int:
        return sum(any(((bits >> (abs(l) - 1)) & 1) == (l > 0) for l in c) for c in self.clauses)


def satisfied_counts(f: CnfFormula) -> np.ndarray:
    """Satisfied-clause counts indexed ``[y, x]`` with variable ``i`` on bit ``i - 1``."""
    _budget(f.n_vars)
    idx = np.arange(1 << f.n_vars, dtype=np.int64)
    counts = np.zeros(1 << f.n_vars, dtype=np.int64)
    for c in f.clauses:
        sat = np.zeros(1 << f.n_vars, dtype=bool)
        for lit in c:
            bit = ((idx >> (abs(lit) - 1)) & 1).astype(bool)
            sat |= bit if lit > 0 else ~bit
        counts += sat
    return counts.reshape(1 << f.n_y, 1 << f.n_x)


def eval_minmax(f: CnfFormula, k: int) -> bool:
    """For every x there is a y satisfying at least ``k`` clauses."""
    return bool((satisfied_counts(f).max(axis=0) >= k).all())


def eval_neg_minmax(f: CnfFormula, k: int) -> bool:
    """Some x makes every y violate at least ``k`` clauses."""
    violated = f.m - satisfied_counts(f)
    return bool((violated.min(axis=0) >= k).any())


def eval_forall_exists(f: CnfFormula) -> bool:
    """For every x there is a y satisfying all clauses."""
    return eval_minmax(f, f.m)


def gadget_3sat_to_minmax(f: CnfFormula) -> tuple[CnfFormula, int]:
    """Replace every clause by the ten-clause gadget with a fresh existential ``d``.

    Shorter clauses are padded by repeating a literal, so each input clause
    yields exactly ten clauses and ``k = 7 m``.  Fresh variables follow the
    existing existential block.
    """
    out = []
    nv = f.n_vars
    for j, c in enumerate(f.clauses):
        if len(c) > 3:
            raise ValueError(f"clause {c} has more than three literals")
        a, b, cc = (list(c) + [c[-1]] * 3)[:3]
        d = nv + 1 + j
        out += [(a,), (b,), (cc,), (d,), (-a, -b), (-a, -cc), (-b, -cc), (a, -d), (b, -d), (cc, -d)]
    return CnfFormula(f.n_x, f.n_y + f.m, tuple(out)), 7 * f.m


def parse_dimacs(text: str) -> CnfFormula:
    """``p cnf V M`` header, optional ``c forall n``, clauses terminated by 0."""
    nv = m = None
    n_x = 0
    clauses, cur = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = raw.split()
        if not toks:
            continue
        if toks[0] == "c":
            if len(toks) >= 3 and toks[1] == "forall":
                n_x = int(toks[2])
            continue
        if toks[0] == "p":
            if len(toks) != 4 or toks[1] != "cnf":
                raise ValueError(f"line {lineno}: bad header {raw!r}")
            nv, m = int(toks[2]), int(toks[3])
            continue
        if nv is None:
            raise ValueError(f"line {lineno}: clause before header")
        for t in toks:
            v = int(t)
            if v == 0:
                clauses.append(tuple(cur))
                cur = []
            else:
                cur.append(v)
    if cur:
        clauses.append(tuple(cur))
    if nv is None:
        raise ValueError("missing 'p cnf' header")
    if m is not None and len(clauses) != m:
        raise ValueError(f"header declares {m} clauses, found {len(clauses)}")
    return CnfFormula(n_x, nv - n_x, tuple(clauses))


def serialize_dimacs(f: CnfFormula) -> str:
    lines = [f"c forall {f.n_x}", f"p cnf {f.n_vars} {f.m}"]
    lines += [" ".join(map(str, c)) + " 0" for c in f.clauses]
    return "\n".join(lines) + "\n"


def read_dimacs(path) -> CnfFormula:
    with open(path, encoding="utf-8") as fh:
        return parse_dimacs(fh.read())


# H_C and gadgets ----------------------------------------------------------------------------------


def _literal_factor(f: CnfFormula, lit: int, n: int) -> Hamiltonian:
    q = abs(lit) - 1
    if f.is_universal(lit):
        letter = "X" if lit > 0 else "Z"
        return Hamiltonian(n, [(1, PauliString.from_factors(n, [(letter, q)]))], 1)
    return Hamiltonian.projector(n, q, 0 if lit > 0 else 1)


def build_hc(f: CnfFormula) -> Hamiltonian:
    """``sum_k P(c_k1) P(c_k2)`` on ``n_x + n_y`` qubits.

    Universal literals give ``X + I`` / ``Z + I``; existential literals give
    ``|0><0|`` / ``|1><1|``.  Repeated literals count once and tautological
    clauses contribute nothing.
    """
    n = f.n_vars
    H = Hamiltonian(n)
    for c in f.clauses:
        lits = sorted(set(c), key=lambda v: (abs(v), v))
        if len(lits) > 2:
            raise ValueError(f"clause {c} has more than two distinct literals")
        if len({abs(v) for v in lits}) < len(lits):
            continue
        term = _literal_factor(f, lits[0], n)
        for lit in lits[1:]:
            term = term * _literal_factor(f, lit, n)
        H = H + term
    return H.with_meta(name="H_C")


def hc_properties_hold(f: CnfFormula) -> bool:
    """Exhaustive check of the three H_C(x) properties for every Hadamard mask x on the x block."""
    from .hamiltonian import diagonal_values_scaled

    n, l = f.n_x, f.n_y
    H = build_hc(f)
    counts = f.m - satisfied_counts(f)  # violated, indexed [y, x]
    ones = (1 << n) - 1
    for x in range(1 << n):
        Hx = conjugate_hadamard(H, x)
        # off-diagonal entries >= 0  <=>  -Hx has no positive off-diagonal entry
        if not check_global(-Hx).stoquastic:
            return False
        diag, d = diagonal_values_scaled(Hx)
        for y in range(1 << l):
            block = diag[(y << n):((y + 1) << n)]
            if block.min() < block[ones]:
                return False
            if Fraction(int(block[ones]), d) != int(counts[y, x]):
                return False
    return True


def _g1_terms(N: int, u: int, a: int, b: int, c: int) -> list:
    def two(l, p, q):
        return PauliString.from_factors(N, [(l, p), (l, q)])

    def one(l, p):
        return PauliString.from_factors(N, [(l, p)])

    return [
        (-1, one("X", c)), (-1, one("Z", c)),
        (-1, two("X", u, a)), (-1, two("Y", u, a)), (-1, two("Z", u, a)),
        (-3, two("X", a, b)), (-1, two("Y", a, b)), (-2, two("Z", a, b)),
        (-1, two("X", b, c)), (-1, two("Y", b, c)), (-1, two("Z", b, c)),
    ]


def _g2_terms(N: int, y: int, d: int) -> list:
    return [(-1, PauliString.from_factors(N, [("X", y), ("X", d)])),
            (1, PauliString.from_factors(N, [("Z", y), ("Z", d)]))]


def build_gadgets(n: int, l: int) -> tuple[Hamiltonian, Hamiltonian]:
    """Gadgets on ``4(n + 2l)`` qubits.

    Qubits ``0..n-1`` are the x block, ``n..n+l-1`` the y block and
    ``n+l..n+2l-1`` the partners ``d_j``; every one of these ``n + 2l``
    qubits ``u`` is protected by the triple ``(a, b, c) = P + 3u + (0, 1, 2)``
    with ``P = n + 2l``.
    """
    P = n + 2 * l
    N = 4 * P
    g1 = []
    for u in range(P):
        g1 += _g1_terms(N, u, P + 3 * u, P + 3 * u + 1, P + 3 * u + 2)
    g2 = []
    for j in range(l):
        g2 += _g2_terms(N, n + j, n + l + j)
    return Hamiltonian(N, g1, name="G1"), Hamiltonian(N, g2, name="G2")


@dataclass(frozen=True)
class Sigma2Layout:
    n: int
    l: int

    @property
    def control(self) -> int:
        return self.n + self.l

    def d(self, j: int) -> int:
        return self.n + self.l + 1 + j

    @property
    def protected(self) -> int:
        return 1 + self.n + 2 * self.l

    def triple(self, u: int) -> tuple[int, int, int]:
        base = self.protected + 3 * u
        return base, base + 1, base + 2

    @property
    def qubits(self) -> int:
        return 4 * self.protected

    def describe(self) -> str:
        return (f"x block 0..{self.n - 1}; y block {self.n}..{self.n + self.l - 1}; control {self.control}; "
                f"d ancillas {self.control + 1}..{self.control + self.l}; "
                f"triples (a,b,c) of protected qubit u at {self.protected}+3u..{self.protected}+3u+2; "
                f"{self.qubits} qubits")


@dataclass(frozen=True)
class Sigma2Instance:
    hamiltonian: Hamiltonian
    layout: Sigma2Layout
    formula: CnfFormula
    k: int


def assemble_sigma2(f: CnfFormula, k: int) -> Sigma2Instance:
    """``X_control (x) (k - H_C) + G2 + G1`` on the documented layout."""
    lay = Sigma2Layout(f.n_x, f.n_y)
    N = lay.qubits
    core_map = list(range(f.n_vars))
    hc = build_hc(f).embed(N, core_map)
    core = Hamiltonian.pauli(N, [("X", lay.control)]) * (hc.scale(-1) + k)
    terms = []
    for j in range(f.n_y):
        terms += _g2_terms(N, f.n_x + j, lay.d(j))
    for u in range(lay.protected):
        terms += _g1_terms(N, u, *lay.triple(u))
    H = core + Hamiltonian(N, terms)
    H = H.with_meta(name="sigma2", provenance=lay.describe())
    return Sigma2Instance(H, lay, f, k)


def sigma2_mask_search(inst: Sigma2Instance) -> int | None:
    """Smallest x-block mask whose Hadamards (with their triples) cure the instance."""
    lay = inst.layout
    n = lay.n
    order = sorted(range(1 << n), key=lambda v: bits_key(v, n))
    for x in order:
        mask = 0
        for u in range(n):
            if (x >> u) & 1:
                mask |= 1 << u
                for q in lay.triple(u):
                    mask |= 1 << q
        if check_global(conjugate_hadamard(inst.hamiltonian, mask)).status is Status.STOQUASTIC:
            return x
    return None


@dataclass(frozen=True)
class GadgetRestrictionEntry:
    mask: int
    touches_y_or_d: bool
    witness: tuple[int, int] | None
    value: Fraction | None
    blocks: tuple[int, ...]


def verify_gadget_restriction(n: int, l: int, masks: Sequence[int]) -> list[GadgetRestrictionEntry]:
    """For each mask on the ``n + 2l`` core qubits, look for a positive entry of the
    conjugated G2 in a flip group that contains some ``d_j``.

    ``blocks`` lists the ``j`` whose ``(y_j, d_j)`` pair carries a positive entry.
    """
    N = n + 2 * l
    G2 = Hamiltonian(N, [t for j in range(l) for t in _g2_terms(N, n + j, n + l + j)])
    out = []
    for mask in masks:
        Hm = conjugate_hadamard(G2, mask)
        touches = bool(mask >> n)
        witness = value = None
        blocks = set()
        for S, g in Hm.flip_groups.items():
            if not S:
                continue
            val, col = _group_maximum(g)
            if val > 0:
                for j in range(l):
                    if (S >> (n + j)) & 1 or (S >> (n + l + j)) & 1:
                        blocks.add(j)
                if witness is None and any((S >> (n + l + j)) & 1 for j in range(l)):
                    witness, value = (col, col ^ S), val
        out.append(GadgetRestrictionEntry(mask, touches, witness, value, tuple(sorted(blocks))))
    return out


# graph files and random instances ---------------------------------------------------------------------


def parse_graph(text: str, fields: bool = False) -> IsingInstance:
    """Lines ``u v J`` with 0-based vertices; optional ``vertices N``."""
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if toks[0] == "vertices":
                n = int(toks[1])
            elif len(toks) == 3:
                edges.append((int(toks[0]), int(toks[1]), Fraction(toks[2])))
            else:
                raise ValueError
        except (ValueError, IndexError):
            raise ValueError(f"line {lineno}: malformed graph line {raw!r}") from None
    if n is None:
        n = max((max(u, v) for u, v, _ in edges), default=-1) + 1
    return IsingInstance(n, tuple(edges), fields)


def serialize_graph(inst: IsingInstance) -> str:
    return "\n".join([f"vertices {inst.n}"] + [f"{u} {v} {J}" for u, v, J in inst.edges]) + "\n"


def read_graph(path, fields: bool = False) -> IsingInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read(), fields)


def random_graph(rng: random.Random, n: int, p: float = 0.5, couplings=(1,)) -> IsingInstance:
    edges = [(u, v, Fraction(rng.choice(couplings))) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p]
    return IsingInstance(n, tuple(edges))


def random_cnf(rng: random.Random, n_x: int, n_y: int, m: int, width: int) -> CnfFormula:
    nv = n_x + n_y
    clauses = []
    for _ in range(m):
        w = rng.randint(1, width)
        vars_ = rng.sample(range(1, nv + 1), min(w, nv))
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vars_))
    return CnfFormula(n_x, n_y, tuple(clauses))
