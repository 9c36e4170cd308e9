"""Path-integral Monte Carlo with ``N`` factors ``T = I - tau H``, and exact oracles.

A path is a closed sequence of ``N`` basis states.  Its weight is the
product of ``<x_{i+1}|T|x_i>``; for a globally stoquastic ``H`` with small
enough ``tau`` every factor is nonnegative.  Otherwise the chain samples
``|W|`` and the energy is the sign-reweighted ratio estimator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numba
import numpy as np

from .hamiltonian import (
    DenseThresholdExceeded,
    Hamiltonian,
    HamiltonianError,
    bits_key,
    dense_matrix,
    dense_matrix_scaled,
    matrix_entry,
    spectrum,
)
from .pauli import exact
from .stoq import check_global

__all__ = [
    "PathConfig",
    "QmcParams",
    "QmcResult",
    "ThermalReference",
    "StoquastifiedOracle",
    "ZeroWeightPath",
    "NoAllowedPath",
    "path_weight",
    "local_energy",
    "stoquastify",
    "run_qmc",
    "run_chains",
    "exact_reference",
    "trotter_reference",
    "estimator_reference",
    "enumerate_paths",
    "exact_path_estimates",
    "exact_average_sign",
    "check_path_positivity",
    "transfer_matrix",
]

DENSE_QMC_LIMIT = 10
PATH_ENUM_LIMIT = 20
BATCHES = 32


class ZeroWeightPath(HamiltonianError):
    pass


class NoAllowedPath(HamiltonianError):
    pass


@dataclass(frozen=True)
class PathConfig:
    n: int
    slices: tuple[int, ...]

    @property
    def N(self) -> int:
        return len(self.slices)

    def segments(self):
        """Pairs ``(x_{i+1}, x_i)`` including the closing segment."""
        N = self.N
        return [(self.slices[(i + 1) % N], self.slices[i]) for i in range(N)]

    def code(self) -> int:
        return sum(x << (self.n * i) for i, x in enumerate(self.slices))

    @classmethod
    def from_code(cls, n: int, N: int, code: int) -> PathConfig:
        mask = (1 << n) - 1
        return cls(n, tuple((code >> (n * i)) & mask for i in range(N)))


def _tau(beta, N: int):
    if isinstance(beta, float):
        return beta / N
    return exact(beta) / N


def path_weight(H: Hamiltonian, path: PathConfig, beta, N: int | None = None):
    """``prod_i <x_{i+1}|I - tau H|x_i>``; exact when ``beta`` is rational."""
    N = path.N if N is None else N
    if N != path.N:
        raise ValueError("slice count mismatch")
    tau = _tau(beta, N)
    w = Fraction(1) if isinstance(tau, Fraction) else 1.0
    for y, x in path.segments():
        e = matrix_entry(H, y, x)
        w *= (1 if y == x else 0) - tau * (e if isinstance(tau, Fraction) else float(e))
    return w


def _reachable(H: Hamiltonian, x: int) -> list[int]:
    return [x ^ S for S in H.flip_groups] if 0 in H.flip_groups else [x] + [x ^ S for S in H.flip_groups]


def local_energy(H: Hamiltonian, path: PathConfig, tau, normalization: str = "N"):
    """Sum of ``<y|H(I - tau H)|x> / <y|I - tau H|x>`` over segments, divided by ``N`` (or ``N - 1``)."""
    tau = exact(tau) if not isinstance(tau, float) else tau
    total = 0
    for y, x in path.segments():
        hyx = matrix_entry(H, y, x)
        t = (1 if y == x else 0) - tau * hyx
        if t == 0:
            raise ZeroWeightPath(f"segment {x} -> {y} has zero weight")
        h2 = sum((matrix_entry(H, y, z) * matrix_entry(H, z, x) for z in _reachable(H, x)), Fraction(0))
        total += (hyx - tau * h2) / t
    denom = path.N if normalization == "N" else path.N - 1
    return total / denom


class StoquastifiedOracle:
    """Entries of ``H~``: off-diagonal ``-|H_xy|``, diagonal unchanged."""

    def __init__(self, H: Hamiltonian):
        self.H = H
        self.n = H.n

    def entry(self, y: int, x: int) -> Fraction:
        e = matrix_entry(self.H, y, x)
        return e if x == y else -abs(e)

    __call__ = entry

    def flip_masks(self) -> list[int]:
        return [S for S in self.H.flip_groups if S]

    def dense(self) -> np.ndarray:
        M = dense_matrix(self.H)
        off = ~np.eye(M.shape[0], dtype=bool)
        M[off] = -np.abs(M[off])
        return M


def stoquastify(H: Hamiltonian) -> StoquastifiedOracle:
    return StoquastifiedOracle(H)


# exact oracles -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermalReference:
    energy: float
    Z: float
    log_Z: float
    F: float
    E0: float


def exact_reference(H: Hamiltonian, beta: float) -> ThermalReference:
    """Dense thermal averages; checks ``|F - E0| <= n / beta``."""
    ev = spectrum(H)
    E0 = float(ev[0])
    beta = float(beta)
    a = -beta * (ev - E0)
    w = np.exp(a)
    s = w.sum()
    log_Z = math.log(s) - beta * E0
    energy = float((ev * w).sum() / s)
    if beta > 0:
        F = -log_Z / beta
        if abs(F - E0) > H.n / beta * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"free-energy bound violated: |F - E0| = {abs(F - E0)} > n/beta")
    else:
        F = -math.inf
    Z = float(s) * math.exp(-beta * E0) if log_Z < 700 else math.inf
    return ThermalReference(energy, Z, log_Z, F, E0)


def transfer_matrix(H: Hamiltonian, beta: float, N: int) -> np.ndarray:
    return np.eye(1 << H.n) - (float(beta) / N) * dense_matrix(H)


def trotter_reference(H: Hamiltonian, beta: float, N: int) -> float:
    """``Tr(H T^N) / Tr(T^N)``, the N-slice Trotter approximation of ``<H>_beta``."""
    T = transfer_matrix(H, beta, N)
    TN = np.linalg.matrix_power(T, N)
    return float(np.trace(dense_matrix(H) @ TN) / np.trace(TN))


def estimator_reference(H: Hamiltonian, beta: float, N: int, normalization: str = "N") -> float:
    """Exact mean of the sampled local energy at ``N`` slices.

    Only allowed segments (``T_yx != 0``) contribute, so this differs from
    ``Tr(H T^N)/Tr(T^N)`` by ``O(tau)`` whenever ``H^2`` connects states that
    ``H`` does not.
    """
    T = transfer_matrix(H, beta, N)
    B = np.where(T != 0, dense_matrix(H) @ T, 0.0)
    Z = np.trace(np.linalg.matrix_power(T, N))
    denom = N if normalization == "N" else N - 1
    return float(N / denom * np.trace(np.linalg.matrix_power(T, N - 1) @ B) / Z)


def enumerate_paths(H: Hamiltonian, beta: float, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Every closed path (as an integer code) with its float weight."""
    n = H.n
    if n * N > PATH_ENUM_LIMIT:
        raise DenseThresholdExceeded(f"n*N = {n * N} exceeds path enumeration limit {PATH_ENUM_LIMIT}")
    T = transfer_matrix(H, beta, N)
    codes = np.arange(1 << (n * N), dtype=np.int64)
    mask = (1 << n) - 1
    sl = [(codes >> (n * i)) & mask for i in range(N)]
    w = np.ones(codes.shape[0])
    for i in range(N):
        w *= T[sl[(i + 1) % N], sl[i]]
    return codes, w


def exact_path_estimates(H: Hamiltonian, beta: float, N: int, normalization: str = "N") -> dict:
    """Exact averages over the path distribution (sign-reweighted when needed)."""
    n = H.n
    codes, w = enumerate_paths(H, beta, N)
    T = transfer_matrix(H, beta, N)
    R = _ratio_table(dense_matrix(H), T)
    mask = (1 << n) - 1
    sl = [(codes >> (n * i)) & mask for i in range(N)]
    h = np.zeros(codes.shape[0])
    for i in range(N):
        h += R[sl[(i + 1) % N], sl[i]]
    h /= N if normalization == "N" else N - 1
    aw = np.abs(w)
    return {"energy": float((h * w).sum() / w.sum()), "avg_sign": float(w.sum() / aw.sum()),
            "probabilities": aw / aw.sum(), "codes": codes}


def exact_average_sign(H: Hamiltonian, beta: float, N: int) -> float:
    _, w = enumerate_paths(H, beta, N)
    return float(w.sum() / np.abs(w).sum())


def check_path_positivity(H: Hamiltonian, beta, N: int) -> tuple[bool, PathConfig | None]:
    """Whether every closed path has weight ``>= 0``, decided from exact factor signs."""
    n = H.n
    if n * N > PATH_ENUM_LIMIT:
        raise DenseThresholdExceeded(f"n*N = {n * N} exceeds path enumeration limit {PATH_ENUM_LIMIT}")
    tau = exact(beta if not isinstance(beta, float) else Fraction(str(beta))) / N
    Hs, d = dense_matrix_scaled(H)
    # d * tau.denominator * T = d q I - p Hs
    p, q = tau.numerator, tau.denominator
    Ti = d * q * np.eye(1 << n, dtype=object) - p * Hs.astype(object)
    sign = np.sign(Ti.astype(np.float64)).astype(np.int8)
    exact_zero = np.array([[v == 0 for v in row] for row in Ti])
    sign[exact_zero] = 0
    codes = np.arange(1 << (n * N), dtype=np.int64)
    mask = (1 << n) - 1
    sl = [(codes >> (n * i)) & mask for i in range(N)]
    s = np.ones(codes.shape[0], dtype=np.int8)
    for i in range(N):
        s *= sign[sl[(i + 1) % N], sl[i]]
    bad = np.flatnonzero(s < 0)
    if bad.size:
        return False, PathConfig.from_code(n, N, int(bad[0]))
    return True, None


# sampler ---------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class QmcParams:
    beta: float
    slices: int
    sweeps: int
    burn_in: int = 1000
    thinning: int = 1
    seed: int = 0
    mode: str = "direct"
    normalization: str = "N"
    pair_fraction: float = 0.2
    record_paths: bool = False

    def __post_init__(self):
        if self.slices < 2:
            raise ValueError("need at least two slices")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.mode not in ("direct", "reweighted"):
            raise ValueError("mode must be 'direct' or 'reweighted'")
        if self.normalization not in ("N", "N-1"):
            raise ValueError("normalization must be 'N' or 'N-1'")
        if self.sweeps < BATCHES or self.thinning < 1 or self.burn_in < 0:
            raise ValueError(f"need at least {BATCHES} measured sweeps and positive thinning")

    @property
    def tau(self) -> float:
        return self.beta / self.slices


@dataclass(frozen=True)
class QmcResult:
    energy: float
    stderr: float
    avg_sign: float
    sign_stderr: float
    acceptance: float
    sweeps: int
    seed: int
    beta: float
    slices: int
    mode: str
    samples: int
    normalization: str = "N"
    path_counts: dict | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("path_counts")
        return out


def _ratio_table(Hd: np.ndarray, T: np.ndarray) -> np.ndarray:
    num = Hd @ T
    R = np.zeros_like(T)
    nz = T != 0
    R[nz] = num[nz] / T[nz]
    return R


class _SparseTable:
    """Lazy ``[y, x]`` lookup for registers too large for dense tables."""

    def __init__(self, fn):
        self.fn = fn
        self.cache = {}

    def __getitem__(self, key):
        v = self.cache.get(key)
        if v is None:
            v = self.fn(int(key[0]), int(key[1]))
            self.cache[key] = v
        return v


@numba.njit(cache=True)
def _segment_product(path, T, m, N):
    w_old = 1.0
    w_new = 1.0
    for i in range(N):
        a = path[i]
        b = path[(i + 1) % N]
        w_old *= abs(T[b, a])
        w_new *= abs(T[b ^ m, a ^ m])
    return w_old, w_new


@numba.njit(cache=True)
def _run_sweeps(path, T, R, masks, n_sweeps, moves, pair_fraction,
                u_slice, u_mask, u_type, u_acc, w_mask, w_acc,
                measure_from, thinning, norm, out_h, out_s, out_code, n_bits, record):
    N = path.shape[0]
    accepted = 0
    proposed = 0
    k = 0
    meas = 0
    for s in range(n_sweeps):
        for _ in range(moves):
            i = u_slice[k]
            m = masks[u_mask[k]]
            typ = u_type[k]
            a = u_acc[k]
            k += 1
            ip = (i + 1) % N
            im = (i - 1 + N) % N
            if typ >= pair_fraction:
                old = path[i]
                new = old ^ m
                w_old = abs(T[path[ip], old] * T[old, path[im]])
                w_new = abs(T[path[ip], new] * T[new, path[im]])
                proposed += 1
                if w_new > 0.0 and (w_new >= w_old or a * w_old < w_new):
                    path[i] = new
                    accepted += 1
            else:
                if N <= 3:
                    # the touched segments overlap: compare whole-path weights
                    w_old = 1.0
                    for j in range(N):
                        w_old *= abs(T[path[(j + 1) % N], path[j]])
                    path[i] ^= m
                    path[ip] ^= m
                    w_new = 1.0
                    for j in range(N):
                        w_new *= abs(T[path[(j + 1) % N], path[j]])
                    path[i] ^= m
                    path[ip] ^= m
                else:
                    ipp = (i + 2) % N
                    xa = path[im]
                    x0 = path[i]
                    x1 = path[ip]
                    xb = path[ipp]
                    w_old = abs(T[x0, xa] * T[x1, x0] * T[xb, x1])
                    w_new = abs(T[x0 ^ m, xa] * T[x1 ^ m, x0 ^ m] * T[xb, x1 ^ m])
                proposed += 1
                if w_new > 0.0 and (w_new >= w_old or a * w_old < w_new):
                    path[i] ^= m
                    path[ip] ^= m
                    accepted += 1
        m = masks[w_mask[s]]
        w_old, w_new = _segment_product(path, T, m, N)
        proposed += 1
        if w_new > 0.0 and (w_new >= w_old or w_acc[s] * w_old < w_new):
            for j in range(N):
                path[j] ^= m
            accepted += 1
        if s >= measure_from and (s - measure_from) % thinning == 0:
            h = 0.0
            sg = 1.0
            for j in range(N):
                y = path[(j + 1) % N]
                x = path[j]
                h += R[y, x]
                if T[y, x] < 0:
                    sg = -sg
            out_h[meas] = h * norm
            out_s[meas] = sg
            if record:
                c = 0
                for j in range(N):
                    c |= path[j] << (n_bits * j)
                out_code[meas] = c
            meas += 1
    return accepted, proposed, meas


def _tables(H: Hamiltonian, tau: float):
    if H.n <= DENSE_QMC_LIMIT:
        Hd = dense_matrix(H)
        T = np.eye(1 << H.n) - tau * Hd
        return T, _ratio_table(Hd, T), True

    def t_entry(y, x):
        return (1.0 if y == x else 0.0) - tau * float(matrix_entry(H, y, x))

    def r_entry(y, x):
        t = t_entry(y, x)
        if t == 0:
            return 0.0
        num = sum(float(matrix_entry(H, y, z)) * t_entry(z, x) for z in _reachable(H, x))
        return num / t

    return _SparseTable(t_entry), _SparseTable(r_entry), False


def _initial_path(H: Hamiltonian, T, N: int, direct: bool) -> np.ndarray:
    order = sorted(range(1 << H.n), key=lambda v: bits_key(v, H.n))
    for x in order:
        t = T[x, x]
        if (t > 0) if direct else (t != 0):
            return np.full(N, x, dtype=np.int64)
    raise NoAllowedPath(f"no basis state has a {'positive' if direct else 'nonzero'} diagonal factor")


def _batch_stats(hs: np.ndarray, ss: np.ndarray, direct: bool):
    B = BATCHES
    size = len(hs) // B
    hs, ss = hs[: size * B], ss[: size * B]
    hb = hs.reshape(B, size).mean(axis=1)
    sb = ss.reshape(B, size).mean(axis=1)
    avg_sign = float(ss.mean())
    sign_err = float(sb.std(ddof=1) / math.sqrt(B))
    if direct:
        return float(hs.mean()), float(hb.std(ddof=1) / math.sqrt(B)), avg_sign, sign_err
    hsb = (hs * ss).reshape(B, size).mean(axis=1)
    est = hsb.mean() / sb.mean()
    # jackknife over batches for the ratio
    tot_hs, tot_s = hsb.sum(), sb.sum()
    jk = np.array([(tot_hs - hsb[b]) / (tot_s - sb[b]) for b in range(B)])
    err = math.sqrt((B - 1) / B * ((jk - jk.mean()) ** 2).sum())
    return float(est), float(err), avg_sign, sign_err


def run_qmc(H: Hamiltonian, params: QmcParams, stream: int = 0) -> QmcResult:
    """One Metropolis chain; deterministic given ``params.seed`` and ``stream``."""
    direct = params.mode == "direct"
    if direct and not check_global(H).stoquastic:
        raise HamiltonianError("direct mode needs a globally stoquastic Hamiltonian")
    N, n = params.slices, H.n
    tau = params.tau
    T, R, dense = _tables(H, tau)
    if direct and dense and (T < 0).any():
        raise HamiltonianError("a factor of I - tau H is negative; increase the slice count")
    masks = sorted({1 << q for q in range(n)} | {S for S in H.flip_groups if S})
    masks = np.array(masks, dtype=np.int64)
    path = _initial_path(H, T, N, direct)
    seq = np.random.SeedSequence([params.seed, stream])
    rng = np.random.Generator(np.random.Philox(seq))
    moves = N * n
    total = params.burn_in + params.sweeps
    n_meas = (params.sweeps - 1) // params.thinning + 1
    out_h = np.zeros(n_meas)
    out_s = np.zeros(n_meas)
    record = params.record_paths and n * N <= 62
    out_code = np.zeros(n_meas if record else 1, dtype=np.int64)
    chunk = max(1, min(total, (1 << 22) // max(moves, 1)))
    kernel = _run_sweeps if dense else _run_sweeps.py_func
    acc = prop = 0
    done = 0
    meas_done = 0
    while done < total:
        c = min(chunk, total - done)
        draws = c * moves
        u_slice = rng.integers(0, N, draws, dtype=np.int64)
        u_mask = rng.integers(0, len(masks), draws, dtype=np.int64)
        u_type = rng.random(draws)
        u_acc = rng.random(draws)
        w_mask = rng.integers(0, len(masks), c, dtype=np.int64)
        w_acc = rng.random(c)
        # measurements inside this chunk start after burn-in, aligned to thinning
        start = max(0, params.burn_in - done)
        first = params.burn_in + ((done + start - params.burn_in + params.thinning - 1) // params.thinning) * params.thinning
        measure_from = first - done if first < done + c else c
        hs = np.zeros(c)
        ss = np.zeros(c)
        codes = np.zeros(c if record else 1, dtype=np.int64)
        a, p, m = kernel(path, T, R, masks, c, moves, params.pair_fraction, u_slice, u_mask, u_type, u_acc,
                         w_mask, w_acc, measure_from, params.thinning,
                         1.0 / (N if params.normalization == "N" else N - 1), hs, ss, codes, n, record)
        acc += a
        prop += p
        out_h[meas_done:meas_done + m] = hs[:m]
        out_s[meas_done:meas_done + m] = ss[:m]
        if record:
            out_code[meas_done:meas_done + m] = codes[:m]
        meas_done += m
        done += c
    out_h, out_s = out_h[:meas_done], out_s[:meas_done]
    if direct and (out_s != 1).any():
        raise HamiltonianError("negative factor met in direct mode")
    energy, err, sign, sign_err = _batch_stats(out_h, out_s, direct)
    counts = None
    if record:
        vals, cnt = np.unique(out_code[:meas_done], return_counts=True)
        counts = {int(v): int(k) for v, k in zip(vals, cnt)}
    return QmcResult(energy, err, sign, sign_err, acc / prop if prop else 0.0, params.sweeps, params.seed,
                     params.beta, N, params.mode, meas_done, params.normalization, counts)


def run_chains(H: Hamiltonian, params: QmcParams, chains: int) -> list[QmcResult]:
    """Independent chains on separate streams of the same seed, in stream order."""
    from ._parallel import ordered_map

    return ordered_map(lambda s: run_qmc(H, params, stream=s), range(chains))
