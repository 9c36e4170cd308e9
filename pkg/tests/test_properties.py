from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from stoqkit.curing import XyzChain, cure_xyz_clifford, NotApplicable, search_hadamard_mask
from stoqkit.hamiltonian import (CliffordTableau, Hamiltonian, conjugate_clifford, conjugate_hadamard, flip_groups,
                                 matrix_entry)
from stoqkit.pauli import PauliString, basis_action, commutes, multiply_exponent
from stoqkit.qmc import QmcParams, run_qmc
from stoqkit.reductions import (CnfFormula, IsingInstance, check_frustration_free_decomposition, gadget_3sat_to_minmax,
                                gen_prop1, satisfied_counts)
from stoqkit.stoq import Status, check_global, check_termwise, decompose_global

import oracles

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

COEFFS = st.sampled_from([Fraction(v, d) for v in (-3, -2, -1, 1, 2, 3) for d in (1, 2)])


def make_real(p):
    if p.is_real:
        return p
    q = (p.x & p.z).bit_length() - 1
    return PauliString(p.n, p.x, p.z & ~(1 << q))


@st.composite
def pauli_strings(draw, n=None, real=False):
    n = draw(st.integers(1, 5)) if n is None else n
    x = draw(st.integers(0, (1 << n) - 1))
    z = draw(st.integers(0, (1 << n) - 1))
    p = PauliString(n, x, z)
    return make_real(p) if real else p


@st.composite
def hamiltonians(draw, max_n=5, max_terms=6, max_weight=3):
    n = draw(st.integers(1, max_n))
    terms = []
    for _ in range(draw(st.integers(1, max_terms))):
        p = draw(pauli_strings(n))
        while p.weight > max_weight:
            top = p.support.bit_length() - 1
            p = PauliString(n, p.x & ~(1 << top), p.z & ~(1 << top))
        terms.append((draw(COEFFS), make_real(p)))
    return Hamiltonian(n, terms)


@st.composite
def stoquastic_hamiltonians(draw, max_n=5):
    H = draw(hamiltonians(max_n))
    # keep diagonal strings and pure X strings with nonpositive sign; products of these stay stoquastic
    terms = []
    for s, c in H.items():
        if s.x == 0:
            terms.append((c, s))
        elif s.z == 0:
            terms.append((-abs(c), s))
    return Hamiltonian(H.n, terms)


# pauli -------------------------------------------------------------------------------------------


@SETTINGS
@given(st.data())
def test_multiplication_associative_on_basis(data):
    n = data.draw(st.integers(1, 4))
    P, Q, R = (data.draw(pauli_strings(n)) for _ in range(3))
    col = data.draw(st.integers(0, (1 << n) - 1))

    def act(ops, c):
        k = 0
        for op in reversed(ops):
            c, dk = basis_action(op, c)
            k += dk
        return c, k % 4

    PQ, k1 = multiply_exponent(P, Q)
    left_row, left_k = act([PQ, R], col)
    QR, k2 = multiply_exponent(Q, R)
    right_row, right_k = act([P, QR], col)
    assert left_row == right_row == act([P, Q, R], col)[0]
    assert (left_k + k1) % 4 == (right_k + k2) % 4 == act([P, Q, R], col)[1]


@SETTINGS
@given(st.data())
def test_commutation_matches_basis_evaluation(data):
    n = data.draw(st.integers(1, 5))
    P, Q = data.draw(pauli_strings(n)), data.draw(pauli_strings(n))
    agree = True
    for col in range(1 << n):
        r1, k1 = basis_action(P, basis_action(Q, col)[0])
        r1k = (k1 + basis_action(Q, col)[1]) % 4
        r2, k2 = basis_action(Q, basis_action(P, col)[0])
        r2k = (k2 + basis_action(P, col)[1]) % 4
        assert r1 == r2
        agree &= r1k == r2k
    assert agree == commutes(P, Q)


@SETTINGS
@given(pauli_strings(real=True))
def test_even_y_count_gives_real_entries(p):
    assert p.y_count % 2 == 0
    for col in range(1 << p.n):
        assert basis_action(p, col)[1] in (0, 2)


# hamiltonian -----------------------------------------------------------------------------------


@SETTINGS
@given(hamiltonians())
def test_matrix_entries_match_oracle(H):
    M = oracles.real_matrix(H)
    for row in range(1 << H.n):
        for col in range(1 << H.n):
            assert float(matrix_entry(H, row, col)) == M[row, col]


@SETTINGS
@given(hamiltonians(), st.data())
def test_basis_changes_preserve_spectrum(H, data):
    mask = data.draw(st.integers(0, (1 << H.n) - 1))
    ev = oracles.eigenvalues(H)
    assert np.allclose(oracles.eigenvalues(conjugate_hadamard(H, mask)), ev, atol=1e-9)
    C = CliffordTableau.hadamard(H.n, [q for q in range(H.n) if (mask >> q) & 1])
    if H.n > 1:
        C = C.then(CliffordTableau.cnot(H.n, 0, H.n - 1))
    C = C.then(CliffordTableau.pauli_x(H.n, 0))
    assert np.allclose(oracles.eigenvalues(conjugate_clifford(H, C)), ev, atol=1e-9)


@SETTINGS
@given(hamiltonians())
def test_flip_groups_partition_and_symmetry(H):
    M = oracles.real_matrix(H)
    rebuilt = np.diag(np.diag(M))
    for S, g in flip_groups(H).items():
        if not S:
            continue
        for col in range(1 << H.n):
            a, y = col & S, col & ~S
            v = g.evaluate(a, y)
            assert v == g.evaluate(a ^ S, y)
            rebuilt[col ^ S, col] += float(v)
    assert np.array_equal(rebuilt, M)


# stoquasticity ------------------------------------------------------------------------------------


@SETTINGS
@given(hamiltonians())
def test_global_verdict_sound(H):
    v = check_global(H)
    off = oracles.max_offdiagonal(oracles.real_matrix(H))
    if v.status is Status.STOQUASTIC:
        assert off <= 0
    else:
        x, y = v.witness
        assert off > 0
        assert float(v.value) == oracles.real_matrix(H)[y, x] > 0


@SETTINGS
@given(hamiltonians(max_n=4), st.integers(1, 4))
def test_termwise_certificates(H, m):
    cert = check_termwise(H, m)
    if cert.yes:
        assert cert.reconstructs(H)
        for g in cert.generators:
            assert g.locality <= m
            assert oracles.max_offdiagonal(oracles.real_matrix(g.to_hamiltonian(H.n))) <= 0
        assert check_termwise(H, m + 1).yes
        assert check_global(H).stoquastic


@SETTINGS
@given(hamiltonians(max_n=5, max_weight=2))
def test_two_local_equivalence(H):
    assert check_global(H).stoquastic == check_termwise(H, 2).yes


@SETTINGS
@given(stoquastic_hamiltonians())
def test_decomposition_invariants(H):
    dec = decompose_global(H)
    assert dec.reconstruct() == H + dec.beta
    k = max(H.locality, 1)
    assert dec.m_prime <= max(H.term_count, 1) * 4 ** k
    for t in dec.terms:
        ev = oracles.eigenvalues(t.Hj)
        assert ev.min() >= -1e-12 and ev.max() <= float(dec.M) + 1e-12


# curing -------------------------------------------------------------------------------------------------


@SETTINGS
@given(hamiltonians(max_n=4, max_weight=2))
def test_hadamard_cure_is_stoquastic(H):
    mask = search_hadamard_mask(H)
    if mask is not None:
        assert oracles.max_offdiagonal(oracles.real_matrix(conjugate_hadamard(H, mask))) <= 0


@SETTINGS
@given(st.integers(2, 7), st.data())
def test_clifford_cure_invariants(n, data):
    vals = st.integers(-3, 3).map(Fraction)
    chain = XyzChain(n, tuple(tuple(data.draw(vals) for _ in range(3)) for _ in range(n - 1)))
    try:
        cure = cure_xyz_clifford(chain)
    except NotApplicable:
        prods = [a * b * c for a, b, c in chain.couplings]
        assert not any(all(p >= 0 for e, p in enumerate(prods) if e % 2 == par) for par in (0, 1))
        return
    assert check_termwise(cure.transformed, 4).yes
    assert np.allclose(oracles.eigenvalues(cure.transformed), oracles.eigenvalues(chain.to_hamiltonian()), atol=1e-9)


# reductions ------------------------------------------------------------------------------------------------


@SETTINGS
@given(st.lists(st.integers(-3, 3).filter(bool), min_size=1, max_size=3, unique_by=abs))
def test_gadget_accounting(clause):
    g, k = gadget_3sat_to_minmax(CnfFormula(3, 0, (tuple(clause),)))
    counts = satisfied_counts(g)
    for abc in range(8):
        assign = {v: bool((abc >> (v - 1)) & 1) for v in (1, 2, 3)}
        best = int(counts[:, abc].max())
        if oracles.clause_sat(clause, assign):
            assert best == 7
        else:
            assert best <= 6


@SETTINGS
@given(st.integers(2, 4), st.data())
def test_frustration_free_matches_lifted_termwise(n, data):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = tuple((u, v, data.draw(st.sampled_from([-1, 1]))) for u, v in pairs if data.draw(st.booleans()))
    inst = IsingInstance(n, edges)
    m = data.draw(st.integers(1, 3))
    lifted = gen_prop1(inst).hamiltonian
    assert check_frustration_free_decomposition(inst.diagonal_hamiltonian(), m) == check_termwise(lifted, m + 1).yes


# qmc -----------------------------------------------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["direct", "reweighted"]))
def test_qmc_seed_determinism(seed, mode):
    H = Hamiltonian(2, [(-1, PauliString.from_label("XI")), (Fraction(-1, 2), PauliString.from_label("ZZ"))])
    p = QmcParams(1.0, 4, 500, burn_in=20, seed=seed, mode=mode)
    assert run_qmc(H, p) == run_qmc(H, p)
