"""Sign-curing searches and constructions.

* exhaustive Hadamard-mask search,
* single-site signed-permutation curing of XYZ chains (dynamic programming),
* the Clifford cure of open XYZ chains into a 4-termwise stoquastic form,
* completion of a partial Pauli image map to a full Clifford tableau.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .hamiltonian import (
    CliffordTableau,
    HadamardMask,
    Hamiltonian,
    HamiltonianError,
    bits_key,
    conjugate_clifford,
    conjugate_hadamard,
)
from .pauli import PauliString, commutes, exact, multiply_exponent
from .stoq import Status, check_global, check_termwise

__all__ = [
    "XyzChain",
    "SignedPermutation",
    "ROTATIONS",
    "GeneratorImageMap",
    "ImageRelation",
    "ValidationResult",
    "XyzCure",
    "CliffordCure",
    "NotApplicable",
    "InternalValidationFailure",
    "UndecidedSearch",
    "InconsistentMap",
    "search_hadamard_mask",
    "search_xyz_single_qubit",
    "search_xyz_bruteforce",
    "edge_is_cured",
    "cure_xyz_clifford",
    "validate_images",
    "complete_tableau",
    "diagonalizing_map",
    "parse_chain",
    "read_chain",
    "serialize_chain",
]


class NotApplicable(HamiltonianError):
    pass


class InternalValidationFailure(AssertionError):
    pass


class UndecidedSearch(HamiltonianError):
    pass


class InconsistentMap(HamiltonianError):
    pass


# Hadamard masks ------------------------------------------------------------------------


def search_hadamard_mask(H: Hamiltonian, max_n: int = 20, register: Sequence[int] | None = None,
                         budget: int = 24) -> HadamardMask | None:
    """Lexicographically smallest mask ``x`` making ``W(x)^dagger H W(x)`` stoquastic.

    Only qubits in ``register`` (default: every qubit some term acts on) are
    searched; other mask bits stay 0.
    """
    qs = sorted(set(register) if register is not None else
                [i for i in range(H.n) if (H.support >> i) & 1])
    if len(qs) > max_n:
        raise HamiltonianError(f"mask search over {len(qs)} qubits exceeds budget {max_n}")
    masks = []
    for t in range(1 << len(qs)):
        masks.append(sum(1 << q for j, q in enumerate(qs) if (t >> j) & 1))
    masks.sort(key=lambda v: bits_key(v, H.n))
    for v in masks:
        verdict = check_global(conjugate_hadamard(H, v), budget)
        if verdict.status is Status.STOQUASTIC:
            return HadamardMask(H.n, v)
        if verdict.status is Status.UNDECIDED:
            raise UndecidedSearch(f"mask {HadamardMask(H.n, v)} could not be decided within budget")
    return None


# XYZ chains ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class XyzChain:
    """``sum_e a_xx X X + a_yy Y Y + a_zz Z Z`` over edges ``(i, i+1)`` (and ``(n-1, 0)`` if closed)."""

    n: int
    couplings: tuple[tuple[Fraction, Fraction, Fraction], ...]
    boundary: str = "open"

    def __post_init__(self):
        if self.boundary not in ("open", "closed"):
            raise ValueError("boundary must be 'open' or 'closed'")
        want = self.n - 1 if self.boundary == "open" else self.n
        if len(self.couplings) != max(want, 0):
            raise ValueError(f"{self.boundary} chain on {self.n} sites needs {want} edges")
        object.__setattr__(self, "couplings", tuple(tuple(exact(c) for c in t) for t in self.couplings))

    @classmethod
    def uniform(cls, n: int, triple, boundary: str = "open") -> XyzChain:
        edges = n - 1 if boundary == "open" else n
        return cls(n, tuple(tuple(triple) for _ in range(edges)), boundary)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, (i + 1) % self.n) for i in range(len(self.couplings))]

    def to_hamiltonian(self) -> Hamiltonian:
        terms = []
        for (i, j), trip in zip(self.edges(), self.couplings):
            for letter, c in zip("XYZ", trip):
                terms.append((c, PauliString.from_factors(self.n, [(letter, i), (letter, j)])))
        return Hamiltonian(self.n, terms, name="xyz-chain")


def parse_chain(text: str) -> XyzChain:
    """Chain file: optional ``sites N`` and ``boundary open|closed``; lines ``i a_xx a_yy a_zz``."""
    n = None
    boundary = "open"
    edges = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            if toks[0] == "sites":
                n = int(toks[1])
            elif toks[0] == "boundary":
                boundary = toks[1]
            elif len(toks) == 4:
                edges[int(toks[0])] = tuple(Fraction(t) for t in toks[1:])
            else:
                raise ValueError
        except (ValueError, IndexError):
            raise ValueError(f"line {lineno}: malformed chain line {raw!r}") from None
    if n is None:
        n = max(edges, default=-1) + (1 if boundary == "closed" else 2)
    count = n - 1 if boundary == "open" else n
    zero = (Fraction(0),) * 3
    return XyzChain(n, tuple(edges.get(i, zero) for i in range(count)), boundary)


def serialize_chain(chain: XyzChain) -> str:
    lines = [f"sites {chain.n}", f"boundary {chain.boundary}"]
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(chain.couplings)]
    return "\n".join(lines) + "\n"


def read_chain(path) -> XyzChain:
    with open(path, encoding="utf-8") as fh:
        return parse_chain(fh.read())


@dataclass(frozen=True)
class SignedPermutation:
    """Rotation of the (X, Y, Z) axes: ``sigma_a -> sum_b R[a][b] sigma_b``."""

    R: tuple[tuple[int, int, int], ...]

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.R, dtype=np.int64)

    def tableau(self, n: int, site: int) -> CliffordTableau:
        t = CliffordTableau.identity(n)
        xs, zs = list(t.x_images), list(t.z_images)
        xsg, zsg = list(t.x_signs), list(t.z_signs)
        for row, images, signs in ((0, xs, xsg), (2, zs, zsg)):
            b = next(j for j in range(3) if self.R[row][j])
            images[site] = PauliString.from_factors(n, [("XYZ"[b], site)])
            signs[site] = self.R[row][b]
        return CliffordTableau(n, tuple(xs), tuple(zs), tuple(xsg), tuple(zsg))

    def __str__(self) -> str:
        return ",".join(("-" if v < 0 else "+") + "XYZ"[row.index(v)] for row in self.R for v in row if v)


def _rotations() -> tuple[SignedPermutation, ...]:
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            M = np.zeros((3, 3), dtype=np.int64)
            for a in range(3):
                M[a, perm[a]] = signs[a]
            if round(np.linalg.det(M)) == 1:
                out.append(SignedPermutation(tuple(tuple(int(v) for v in r) for r in M)))
    ident = SignedPermutation(((1, 0, 0), (0, 1, 0), (0, 0, 1)))
    out.remove(ident)
    return (ident, *out)


ROTATIONS = _rotations()


def _transformed_edge(trip, Ri: SignedPermutation, Rj: SignedPermutation) -> list[list[Fraction]]:
    # beta~ = Ri^T beta Rj with beta = diag(trip)
    return [[sum(Ri.R[a][c] * trip[a] * Rj.R[a][d] for a in range(3)) for d in range(3)] for c in range(3)]


def edge_is_cured(trip, Ri: SignedPermutation, Rj: SignedPermutation) -> bool:
    """The transformed coupling is diagonal with ``a_xx <= -|a_yy|``."""
    B = _transformed_edge(trip, Ri, Rj)
    if any(B[c][d] for c in range(3) for d in range(3) if c != d):
        return False
    return B[0][0] <= -abs(B[1][1])


@dataclass(frozen=True)
class XyzCure:
    assignment: tuple[SignedPermutation, ...]
    tableau: CliffordTableau
    transformed: Hamiltonian


def _assignment_cure(chain: XyzChain, idx: Sequence[int]) -> XyzCure:
    assignment = tuple(ROTATIONS[i] for i in idx)
    t = CliffordTableau.identity(chain.n)
    for site, R in enumerate(assignment):
        t = t.then(R.tableau(chain.n, site))
    return XyzCure(assignment, t, conjugate_clifford(chain.to_hamiltonian(), t))


def _edge_tables(chain: XyzChain) -> list[list[list[bool]]]:
    """``ok[e][r][s]``: edge ``e`` is cured with rotation ``r`` on its first site and ``s`` on its second."""
    k = len(ROTATIONS)
    return [[[edge_is_cured(t, ROTATIONS[r], ROTATIONS[s]) for s in range(k)] for r in range(k)]
            for t in chain.couplings]


def search_xyz_single_qubit(chain: XyzChain) -> XyzCure | None:
    """Per-site signed permutations curing every edge, or None if none exist.

    The result is the lexicographically smallest assignment in the fixed
    rotation order (identity first).
    """
    n = chain.n
    if n == 0:
        return _assignment_cure(chain, [])
    k = len(ROTATIONS)
    ok = _edge_tables(chain)
    open_edges = n - 1
    starts = range(k) if chain.boundary == "closed" else [None]
    for first in starts:
        # feasible[i][r]: sites i..n-1 can be completed with site i = r
        feasible = [[False] * k for _ in range(n)]
        for r in range(k):
            feasible[n - 1][r] = first is None or ok[n - 1][r][first]
        for i in range(n - 2, -1, -1):
            for r in range(k):
                feasible[i][r] = any(ok[i][r][s] and feasible[i + 1][s] for s in range(k))
        choices0 = [first] if first is not None else range(k)
        pick = next((r for r in choices0 if feasible[0][r]), None)
        if pick is None:
            continue
        idx = [pick]
        for i in range(open_edges):
            idx.append(next(s for s in range(k) if ok[i][idx[-1]][s] and feasible[i + 1][s]))
        return _assignment_cure(chain, idx)
    return None


def search_xyz_bruteforce(chain: XyzChain) -> XyzCure | None:
    """Exhaustive search over all ``24**n`` assignments, same ordering as the DP."""
    ok = _edge_tables(chain)
    edges = chain.edges()
    for idx in itertools.product(range(len(ROTATIONS)), repeat=chain.n):
        if all(ok[e][idx[i]][idx[j]] for e, (i, j) in enumerate(edges)):
            return _assignment_cure(chain, idx)
    return None


# generator image maps ---------------------------------------------------------------------


@dataclass(frozen=True)
class ImageRelation:
    """``source = source_sign * prod(generators[i])`` must map to ``image_sign * image``."""

    factors: tuple[int, ...]
    source: PauliString
    source_sign: int
    image: PauliString
    image_sign: int


@dataclass(frozen=True)
class GeneratorImageMap:
    n: int
    sources: tuple[PauliString, ...]
    images: tuple[PauliString, ...]
    signs: tuple[int, ...]
    relations: tuple[ImageRelation, ...] = ()

    @classmethod
    def identity(cls, n: int) -> GeneratorImageMap:
        gens = [PauliString(n, 1 << i, 0) for i in range(n)] + [PauliString(n, 0, 1 << i) for i in range(n)]
        return cls(n, tuple(gens), tuple(gens), (1,) * len(gens))

    def image_of(self, p: PauliString) -> tuple[PauliString, int] | None:
        for s, t, sg in zip(self.sources, self.images, self.signs):
            if s == p:
                return t, sg
        for rel in self.relations:
            if rel.source == p:
                return rel.image, rel.image_sign
        return None

    def to_json(self) -> dict:
        def fmt(p, s):
            return ("-" if s < 0 else "+") + str(p)

        return {"qubits": self.n,
                "generators": [{"source": str(s), "image": fmt(t, g)}
                               for s, t, g in zip(self.sources, self.images, self.signs)],
                "relations": [{"source": fmt(r.source, r.source_sign), "image": fmt(r.image, r.image_sign)}
                              for r in self.relations]}


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violation: str = ""
    pair: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


def _vec(p: PauliString) -> int:
    return p.x | (p.z << p.n)


def _rank(vectors) -> int:
    basis = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def _signed_product(ps: Sequence[PauliString], signs: Sequence[int], n: int) -> tuple[PauliString, int]:
    r = PauliString.identity(n)
    k = 0
    for p, s in zip(ps, signs):
        r, dk = multiply_exponent(r, p)
        k += dk + (2 if s < 0 else 0)
    return r, k % 4


def validate_images(m: GeneratorImageMap) -> ValidationResult:
    """Check commutation, independence and every recorded product relation."""
    g = len(m.sources)
    if len(m.images) != g or len(m.signs) != g:
        return ValidationResult(False, "length mismatch")
    for i in range(g):
        for j in range(i + 1, g):
            if commutes(m.sources[i], m.sources[j]) != commutes(m.images[i], m.images[j]):
                return ValidationResult(False, f"commutation of {m.sources[i]} and {m.sources[j]} not preserved",
                                        (i, j))
    if _rank(map(_vec, m.sources)) != g:
        return ValidationResult(False, "sources are not independent")
    if _rank(map(_vec, m.images)) != g:
        return ValidationResult(False, "images are not independent")
    for rel in m.relations:
        src, k = _signed_product([m.sources[i] for i in rel.factors], [1] * len(rel.factors), m.n)
        if src != rel.source or k != (0 if rel.source_sign > 0 else 2):
            return ValidationResult(False, f"relation for {rel.source} does not hold among sources")
        img, k = _signed_product([m.images[i] for i in rel.factors], [m.signs[i] for i in rel.factors], m.n)
        want = 0 if rel.image_sign * rel.source_sign > 0 else 2
        if img != rel.image or k != want:
            return ValidationResult(False, f"image of {rel.source} is not the product of images")
    return ValidationResult(True)


# tableau completion ------------------------------------------------------------------------


def _form(u: int, v: int, n: int) -> int:
    mask = (1 << n) - 1
    return ((u & mask & (v >> n)).bit_count() + ((u >> n) & v & mask).bit_count()) & 1


def _swap(u: int, n: int) -> int:
    mask = (1 << n) - 1
    return ((u & mask) << n) | (u >> n)


def _solve_gf2(rows: list[tuple[int, int]], width: int) -> int | None:
    """Some ``v`` with ``popcount(v & a) = b (mod 2)`` for every ``(a, b)``."""
    piv = []  # (pivot bit, row, rhs)
    for a, b in rows:
        for p, ra, rb in piv:
            if (a >> p) & 1:
                a ^= ra
                b ^= rb
        if a == 0:
            if b:
                return None
            continue
        p = a.bit_length() - 1
        piv = [(q, ra ^ a, rb ^ b) if (ra >> p) & 1 else (q, ra, rb) for q, ra, rb in piv]
        piv.append((p, a, b))
    v = 0
    for p, a, b in piv:
        if b:
            v |= 1 << p
    return v


def _partner(target: int, others: list[int], n: int) -> int:
    rows = [(_swap(target, n), 1)] + [(_swap(o, n), 0) for o in others]
    v = _solve_gf2(rows, 2 * n)
    if v is None:
        raise InconsistentMap("could not find a symplectic partner")
    return v


def _complete(pairs: list[tuple[int, int]], n: int) -> list[tuple[int, int]]:
    pairs = list(pairs)
    for cand in [1 << i for i in range(2 * n)]:
        if len(pairs) == n:
            break
        v = cand
        for e, f in pairs:
            v ^= (e if _form(v, f, n) else 0) ^ (f if _form(v, e, n) else 0)
        if v == 0:
            continue
        w = _partner(v, [x for pr in pairs for x in pr], n)
        pairs.append((v, w))
    return pairs


def _express(v: int, basis: list[int]) -> int:
    """Bitmask of basis vectors summing to ``v``."""
    rows = []
    width = len(basis)
    # solve sum_k c_k basis_k = v bit by bit
    for bit in range(max((b.bit_length() for b in basis), default=0) + 1):
        a = sum(1 << k for k, b in enumerate(basis) if (b >> bit) & 1)
        rows.append((a, (v >> bit) & 1))
    c = _solve_gf2(rows, width)
    if c is None:
        raise InconsistentMap("vector outside the span")
    return c


def complete_tableau(m: GeneratorImageMap) -> CliffordTableau:
    """Extend a validated partial map to a full Clifford tableau."""
    res = validate_images(m)
    if not res:
        raise InconsistentMap(res.violation)
    n = m.n
    pending = [(_vec(s), _vec(t)) for s, t in zip(m.sources, m.images)]
    src_pairs: list[tuple[int, int]] = []
    img_pairs: list[tuple[int, int]] = []

    def orth(s, t):
        for (e, f), (e2, f2) in zip(src_pairs, img_pairs):
            a, b = _form(s, f, n), _form(s, e, n)
            s ^= (e if a else 0) ^ (f if b else 0)
            t ^= (e2 if a else 0) ^ (f2 if b else 0)
        return s, t

    while pending:
        s, t = pending.pop(0)
        j = next((j for j, (s2, _) in enumerate(pending) if _form(s, s2, n)), None)
        if j is not None:
            s2, t2 = pending.pop(j)
        else:
            s2 = _partner(s, [x for p in src_pairs for x in p] + [p[0] for p in pending], n)
            t2 = _partner(t, [x for p in img_pairs for x in p] + [p[1] for p in pending], n)
        src_pairs.append((s, s2))
        img_pairs.append((t, t2))
        pending = [orth(a, b) for a, b in pending]

    src_pairs = _complete(src_pairs, n)
    img_pairs = _complete(img_pairs, n)
    src_basis = [x for p in src_pairs for x in p]
    img_basis = [x for p in img_pairs for x in p]

    def image_vec(v):
        c = _express(v, src_basis)
        out = 0
        for k, b in enumerate(img_basis):
            if (c >> k) & 1:
                out ^= b
        return out

    def to_string(v):
        mask = (1 << n) - 1
        return PauliString(n, v & mask, v >> n)

    xs = tuple(to_string(image_vec(1 << i)) for i in range(n))
    zs = tuple(to_string(image_vec(1 << (n + i))) for i in range(n))
    t = CliffordTableau(n, xs, zs, (1,) * n, (1,) * n)

    # fix generator signs so every listed source maps to its signed image
    rows = []
    for s, img, sg in zip(m.sources, m.images, m.signs):
        r, k = t.image(s)
        if r != img or k % 2:
            raise InternalValidationFailure("completed tableau disagrees with the partial map")
        have = 1 if k == 0 else -1
        rows.append((_vec(s), 0 if have == sg else 1))
    flips = _solve_gf2(rows, 2 * n)
    if flips is None:
        raise InconsistentMap("sign constraints are inconsistent")
    xsg = tuple(-1 if (flips >> i) & 1 else 1 for i in range(n))
    zsg = tuple(-1 if (flips >> (n + i)) & 1 else 1 for i in range(n))
    t = CliffordTableau(n, xs, zs, xsg, zsg)
    t.validate()
    for s, img, sg in zip(m.sources, m.images, m.signs):
        if t.signed_image(s) != (img, sg):
            raise InternalValidationFailure(f"tableau image of {s} is wrong")
    return t


def diagonalizing_map(H: Hamiltonian) -> GeneratorImageMap:
    """Map independent generators of a commuting Pauli sum to ``Z_0, Z_1, ...``."""
    strings = [s for s, _ in H.items()]
    for i, p in enumerate(strings):
        for q in strings[i + 1:]:
            if not commutes(p, q):
                raise NotApplicable(f"{p} and {q} do not commute")
    gens, basis = [], []
    for s in strings:
        v = _vec(s)
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
            gens.append(s)
    images = tuple(PauliString(H.n, 0, 1 << k) for k in range(len(gens)))
    return GeneratorImageMap(H.n, tuple(gens), images, (1,) * len(gens))


# Clifford cure of XYZ chains ----------------------------------------------------------------


@dataclass(frozen=True)
class CliffordCure:
    image_map: GeneratorImageMap
    tableau: CliffordTableau
    transformed: Hamiltonian
    x_side_parity: int | None

    def to_json(self) -> dict:
        return {"x_side_edge_parity": self.x_side_parity, "image_map": self.image_map.to_json(),
                "tableau": self.tableau.to_json(), "transformed": self.transformed.to_json()}


def _sgn(v: Fraction) -> int:
    return -1 if v < 0 else 1


def _xs(n: int, qubits) -> PauliString:
    return PauliString.from_factors(n, [("X", q) for q in qubits if 0 <= q < n])


def _zs(n: int, qubits) -> PauliString:
    return PauliString.from_factors(n, [("Z", q) for q in qubits if 0 <= q < n])


def cure_xyz_clifford(chain: XyzChain) -> CliffordCure:
    """Clifford map turning an eligible open XYZ chain 4-termwise stoquastic.

    Edges of one parity become diagonal; edges of the other parity become
    sums of X strings whose coefficients are all ``<= 0``.  The latter edges
    need ``a_xx * a_yy * a_zz >= 0``.
    """
    if chain.boundary != "open":
        raise NotApplicable("the construction needs an open chain")
    n = chain.n
    H = chain.to_hamiltonian()
    prods = [a * b * c for a, b, c in chain.couplings]
    parity = None
    for p in (1, 0):
        if all(v >= 0 for e, v in enumerate(prods) if e % 2 == p):
            parity = p
            break
    if parity is None:
        raise NotApplicable("edge products are negative on both edge parities")
    if check_global(H).stoquastic:
        return CliffordCure(GeneratorImageMap.identity(n), CliffordTableau.identity(n), H, None)

    sources, images, signs, relations = [], [], [], []
    for e, (axx, ayy, azz) in enumerate(chain.couplings):
        b = e
        xx = PauliString.from_factors(n, [("X", b), ("X", b + 1)])
        yy = PauliString.from_factors(n, [("Y", b), ("Y", b + 1)])
        zz = PauliString.from_factors(n, [("Z", b), ("Z", b + 1)])
        if e % 2 == parity:
            da = -_sgn(axx)
            db = -_sgn(ayy)
            # the ZZ image carries -da*db; a zero coupling leaves its sign free,
            # so pick it to make that coefficient nonpositive
            zsign = _sgn(azz) if azz else 1
            if axx == 0 and ayy == 0:
                da, db = 1, zsign
            elif axx == 0:
                da = zsign * db
            elif ayy == 0:
                db = zsign * da
            img_xx, img_yy = _xs(n, [b, b + 2]), _xs(n, [b - 1, b, b + 1, b + 2])
            s_xx, s_yy = da, db
        else:
            img_xx, img_yy = _zs(n, [b]), _zs(n, [b, b + 1])
            s_xx, s_yy = 1, 1
        i = len(sources)
        sources += [xx, yy]
        images += [img_xx, img_yy]
        signs += [s_xx, s_yy]
        img_zz, k = _signed_product([img_xx, img_yy], [s_xx, s_yy], n)
        # ZZ = -(XX)(YY)
        relations.append(ImageRelation((i, i + 1), zz, -1, img_zz, -1 if k == 0 else 1))
        if k % 2:
            raise InternalValidationFailure("ZZ image is not Hermitian")

    m = GeneratorImageMap(n, tuple(sources), tuple(images), tuple(signs), tuple(relations))
    res = validate_images(m)
    if not res:
        raise InternalValidationFailure(res.violation)
    tab = complete_tableau(m)
    transformed = conjugate_clifford(H, tab)
    direct = []
    for s, c in H.items():
        img = m.image_of(s)
        if img is None:
            raise InternalValidationFailure(f"term {s} has no image")
        direct.append((img[0], img[1] * c))
    if Hamiltonian(n, direct) != transformed:
        raise InternalValidationFailure("tableau conjugation disagrees with the image map")
    if not check_termwise(transformed, 4).yes:
        raise InternalValidationFailure("cured chain is not 4-termwise stoquastic")
    return CliffordCure(m, tab, transformed, parity)
