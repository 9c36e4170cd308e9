from fractions import Fraction

import numpy as np
import pytest

from stoqkit.hamiltonian import (CliffordTableau, DenseThresholdExceeded, Hamiltonian, HadamardMask, InvalidTableau,
                                 MalformedLine, NonRealCoefficient, NonRealHamiltonian, QubitIndexOutOfRange,
                                 RepeatedIndex, conjugate_clifford, conjugate_hadamard, dense_matrix,
                                 dense_matrix_scaled, diagonal_values, flip_groups, matrix_entry, parse_hsum,
                                 serialize_hsum, spectrum)
from stoqkit.pauli import PauliString
from stoqkit.reductions import CnfFormula, IsingInstance, build_hc, gen_conp, gen_prop1

from oracles import real_matrix


def test_parse_single_term():
    H = parse_hsum("qubits 2\n-1 X0 X1")
    assert H == Hamiltonian.pauli(2, "X0 X1", -1)


def test_parse_merges_duplicates():
    H = parse_hsum("qubits 1\n1/3 Z0\n1/6 Z0")
    assert len(H) == 1
    assert H.coeff(PauliString.from_label("Z")) == Fraction(1, 2)


def test_parse_errors():
    with pytest.raises(RepeatedIndex):
        parse_hsum("qubits 2\n1 X0 X0")
    with pytest.raises(QubitIndexOutOfRange):
        parse_hsum("qubits 2\n1 Z2")
    with pytest.raises(NonRealCoefficient):
        parse_hsum("qubits 1\n1j X0")
    with pytest.raises(MalformedLine):
        parse_hsum("1 X0")
    with pytest.raises(MalformedLine):
        parse_hsum("qubits 1\nabc X0")
    with pytest.raises(NonRealHamiltonian):
        parse_hsum("qubits 1\n1 Y0")


def test_hsum_round_trip_keeps_metadata():
    text = "# name: demo\n# provenance: hand written\nqubits 3\n2 I\n-1/2 X0 Y1 Y2\n0.25 Z2\n"
    H = parse_hsum(text)
    again = parse_hsum(serialize_hsum(H))
    assert again == H
    assert again.name == "demo" and again.provenance == "hand written"
    assert H.offset == 2 and H.coeff(PauliString.from_factors(3, "Z2")) == Fraction(1, 4)


def test_flip_group_of_projected_flip():
    # -X1 (I + Z2) on three qubits
    H = parse_hsum("qubits 3\n-1 X1\n-1 X1 Z2")
    groups = flip_groups(H)
    assert list(groups) == [0b010]
    g = groups[0b010]
    for y in range(8):
        if (y >> 1) & 1:
            continue
        y2 = (y >> 2) & 1
        assert g.evaluate(0, y) == -(1 + (-1) ** y2)
        assert g.evaluate(0, y) == Fraction(real_matrix(H)[y | 0b010, y]).limit_denominator()


def test_diagonal_hamiltonian_has_only_empty_group():
    assert list(flip_groups(Hamiltonian.pauli(2, "Z0 Z1"))) == [0]


def test_prop1_flip_group_is_shifted_ising_energy():
    inst = IsingInstance.triangle()
    p = gen_prop1(inst)
    groups = flip_groups(p.hamiltonian)
    assert set(groups) == {1}
    for y in range(0, 16, 2):
        spins = [1 - 2 * ((y >> (v + 1)) & 1) for v in range(3)]
        assert groups[1].evaluate(0, y) == p.E0 - inst.energy(spins)


def test_conp_entry_formula():
    inst = IsingInstance(2, ((0, 1, 1),))
    eps = Fraction(1, 2)
    for K in (-3, -1, 0, 2):
        H = gen_conp(inst, K, eps)
        for x in range(4):
            s = [1 - 2 * ((x >> i) & 1) for i in range(2)]
            assert matrix_entry(H, x | 4, x) == K + eps - s[0] * s[1] - s[0] - s[1]


def test_entry_special_cases():
    H = parse_hsum("qubits 3\n1 Z0\n-2 Z1 Z2\n3 X0 X1\n1/2 I")
    for x in range(8):
        z = [1 - 2 * ((x >> i) & 1) for i in range(3)]
        assert matrix_entry(H, x, x) == Fraction(1, 2) + z[0] - 2 * z[1] * z[2]
        # flips on qubit 2 alone are not produced by any term
        assert matrix_entry(H, x ^ 0b100, x) == 0


def test_small_spectra():
    assert np.allclose(spectrum(Hamiltonian.pauli(1, "X0", -1)), [-1, 1])
    assert np.allclose(spectrum(Hamiltonian.pauli(2, "Z0 Z1")), [-1, -1, 1, 1])


def test_triangle_ising_ground_energy():
    H = IsingInstance.triangle().diagonal_hamiltonian()
    assert diagonal_values(H).min() == -1


def test_dense_matches_kron_oracle():
    H = parse_hsum("qubits 3\n1/3 X0 Y1 Y2\n-1 Z0 X2\n2 Y0 Y1\n0.5 Z1\n1 I")
    assert np.allclose(dense_matrix(H), real_matrix(H))
    M, d = dense_matrix_scaled(H)
    assert np.allclose(M / d, real_matrix(H))


def test_dense_threshold():
    with pytest.raises(DenseThresholdExceeded):
        dense_matrix(Hamiltonian.pauli(5, "X0"), threshold=4)


def test_hadamard_mask_examples():
    X0 = Hamiltonian.pauli(1, "X0")
    assert conjugate_hadamard(X0, HadamardMask(1, 1)) == Hamiltonian.pauli(1, "Z0")
    H = parse_hsum("qubits 3\n1 X0 Y1 Y2\n-1 Z0 X2")
    assert conjugate_hadamard(H, HadamardMask(3, 0)) == H
    assert conjugate_hadamard(H, 0b111).is_real


def test_hadamard_on_formula_hamiltonian():
    # (a1 v b2)(not a2 v b1): a1, a2 on qubits 0, 1 and b1, b2 on qubits 2, 3
    Hc = build_hc(CnfFormula(2, 2, ((1, 4), (-2, 3))))
    flip = Hamiltonian.pauli(4, "X0") * Hamiltonian.projector(4, 3, 0)
    assert Hc.offdiagonal_part() == flip
    assert conjugate_hadamard(flip, HadamardMask.on(4, [0])) == Hamiltonian.pauli(4, "Z0") * Hamiltonian.projector(4, 3, 0)
    assert conjugate_hadamard(Hc, HadamardMask.on(4, [0])).is_diagonal


def test_tableau_examples():
    H = Hamiltonian.pauli(1, "X0", -1)
    assert conjugate_clifford(H, CliffordTableau.hadamard(1, [0])) == Hamiltonian.pauli(1, "Z0", -1)
    G = parse_hsum("qubits 2\n1 X0 Z1\n-2 Z1\n1/2 Y0 Y1")
    assert conjugate_clifford(G, CliffordTableau.identity(2)) == G


def test_tableau_spectrum_preserved():
    H = parse_hsum("qubits 3\n1 X0 X1\n-2 Y1 Y2\n1/2 Z0\n3 Z1 Z2 X0")
    C = CliffordTableau.cnot(3, 0, 1).then(CliffordTableau.hadamard(3, [2])).then(CliffordTableau.pauli_x(3, 1))
    assert C.is_valid()
    assert np.allclose(spectrum(conjugate_clifford(H, C)), spectrum(H), atol=1e-9)


def test_invalid_tableau_rejected():
    t = CliffordTableau.identity(1)
    bad = CliffordTableau(1, t.z_images, t.z_images, (1,), (1,))
    assert not bad.is_valid()
    with pytest.raises(InvalidTableau):
        conjugate_clifford(Hamiltonian.pauli(1, "X0"), bad)


def test_json_round_trip():
    H = parse_hsum("qubits 2\n-3/4 X0 Z1\n1 I")
    assert Hamiltonian.from_json(H.to_json()) == H
