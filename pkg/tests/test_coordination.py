import numpy as np
import pytest

from qcoord.classical import Alphabet, JointPmf, pmf_from_assignments
from qcoord.coordination import (
    CoordinationError,
    CqEnsemble,
    Extension,
    ExtensionNotValidated,
    RatePoint,
    cascade_rate_point,
    extension_target,
    isolated_rate,
    measurement_statistics,
    two_node_rate,
    validate_extension,
)
from qcoord.quantum import (
    DensityOperator,
    HermitianObservable,
    Povm,
    tensor,
)

from conftest import (
    ETA,
    KET0,
    KET1,
    KETP,
    cascade_flip_pair,
    degenerate_z_cascade,
    phase_flip_pair,
)
from oracles import binary_entropy, random_density

PAULI_Z = HermitianObservable(np.diag([1.0, -1.0]).astype(complex))
PAULI_X = HermitianObservable(np.array([[0, 1], [1, 0]], dtype=complex))


class TestValidation:
    def test_three_symbol_decomposition_against_own_ensemble(
            self, example1_three_symbol):
        ens, ext = example1_three_symbol
        report = validate_extension(ext, ens)
        assert report.passed
        induced = extension_target(ext, {"A": 2, "B": 2})
        assert np.allclose(induced.average_state().matrix,
                           ens.average_state().matrix)

    def test_perturbed_conditional_fails_with_measured_deviation(
            self, example1_pair):
        ens, _ = example1_pair
        x, y = Alphabet("X", ["x0", "x1"]), Alphabet("Y", ["y0", "y+"])
        eps = 1e-3
        joint = pmf_from_assignments([x, y], {
            ("x0", "y0"): 0.5, ("x1", "y0"): 0.25 + eps,
            ("x1", "y+"): 0.25 - eps})
        ext = Extension(joint, [KET0, KET1], [KET0, KETP], kind="two-node")
        report = validate_extension(ext, ens)
        assert not report.passed
        worst = max(c.deviation for c in report.failures())
        assert worst == pytest.approx(eps, rel=0.5)

    def test_isolated_correlated_ac_fails_product_check(self):
        x = Alphabet("X", ["x0", "x1"])
        y = Alphabet("Y", ["y0"])
        z = Alphabet("Z", ["z0", "z1"])
        # Z copies X, and the C atoms are distinguishable: correlated AC
        states = [tensor(tensor(KET0, KET0), KET0),
                  tensor(tensor(KET1, KET0), KET1)]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        cube = np.zeros((2, 1, 2))
        cube[0, 0, 0] = cube[1, 0, 1] = 0.5
        ext = Extension(JointPmf([x, y, z], cube), [KET0, KET1], [KET0],
                        [KET0, KET1], kind="isolated")
        report = validate_extension(ext, ens)
        assert not report.passed
        names = [c.name for c in report.failures()]
        assert any("sigma_A x sigma_C" in n for n in names)

    def test_shape_mismatch_is_rejected_not_failed(self, example1_pair):
        ens, _ = example1_pair
        x = Alphabet("X", ["x0", "x1", "x2"])
        y = Alphabet("Y", ["y0"])
        joint = pmf_from_assignments([x, y], {("x0", "y0"): 0.5,
                                              ("x1", "y0"): 0.25,
                                              ("x2", "y0"): 0.25})
        ext = Extension(joint, [KET0, KET1, KET1], [KET0], kind="two-node")
        with pytest.raises(CoordinationError):
            validate_extension(ext, ens)

    def test_non_factorizing_target_fails(self):
        x = Alphabet("X", ["x0"])
        correlated = DensityOperator(
            0.5 * tensor(KET0, KET0).matrix + 0.5 * tensor(KET1, KET1).matrix)
        ens = CqEnsemble(JointPmf([x], [1.0]), [correlated],
                         {"A": 2, "B": 2})
        assert not ens.factorizes()
        y = Alphabet("Y", ["y0"])
        half = DensityOperator.maximally_mixed(2)
        ext = Extension(pmf_from_assignments([x, y], {("x0", "y0"): 1.0}),
                        [half], [half], kind="two-node")
        report = validate_extension(ext, ens)
        assert not report.passed
        assert any("factorizes" in c.name for c in report.failures())

    def test_soundness_plants_large_deviation(self, example1_pair):
        ens, _ = example1_pair
        x, y = Alphabet("X", ["x0", "x1"]), Alphabet("Y", ["y0", "y+"])
        joint = pmf_from_assignments([x, y], {
            ("x0", "y0"): 0.5, ("x1", "y0"): 0.30, ("x1", "y+"): 0.20})
        ext = Extension(joint, [KET0, KET1], [KET0, KETP], kind="two-node")
        report = validate_extension(ext, ens, tol=1e-6)
        assert not report.passed


class TestTwoNodeRate:
    def test_copy_decomposition_rate(self, example1_three_symbol):
        _, ext = example1_three_symbol
        assert two_node_rate(ext) == 1.5

    def test_shared_atom_decomposition_rate(self, example1_pair):
        _, ext = example1_pair
        assert two_node_rate(ext) == pytest.approx(
            binary_entropy(0.25) - 0.5, abs=1e-12)
        assert two_node_rate(ext) == pytest.approx(0.3112, abs=1e-4)

    def test_product_target_needs_no_communication(self):
        ens, ext = phase_flip_pair(0.5)
        assert two_node_rate(ext) == 0.0

    def test_requires_validation(self, example1_pair):
        ens, _ = example1_pair
        x, y = Alphabet("X", ["x0", "x1"]), Alphabet("Y", ["y0", "y+"])
        joint = pmf_from_assignments([x, y], {
            ("x0", "y0"): 0.5, ("x1", "y0"): 0.25, ("x1", "y+"): 0.25})
        ext = Extension(joint, [KET0, KET1], [KET0, KETP], kind="two-node")
        with pytest.raises(ExtensionNotValidated):
            two_node_rate(ext)

    def test_rate_invariant_under_label_permutation(self, example1_pair):
        ens, ext = example1_pair
        x = Alphabet("X", ["x0", "x1"])
        y = Alphabet("Y", ["y+", "y0"])  # swapped labels
        joint = pmf_from_assignments([x, y], {
            ("x0", "y0"): 0.5, ("x1", "y0"): 0.25, ("x1", "y+"): 0.25})
        swapped = Extension(joint, [KET0, KET1], [KETP, KET0],
                            kind="two-node")
        assert validate_extension(swapped, ens).passed
        assert two_node_rate(swapped) == pytest.approx(two_node_rate(ext),
                                                       abs=1e-12)


class TestCascadeRates:
    def test_degenerate_relay_equals_two_node_exactly(self, example1_pair):
        ens3, ext3 = degenerate_z_cascade(example1_pair)
        _, ext2 = example1_pair
        pt = cascade_rate_point(ext3)
        assert pt.r12 == two_node_rate(ext2)
        assert pt.r23 == 0.0

    def test_orthogonal_copy_chain(self):
        x = Alphabet("X", ["x0", "x1"])
        y = Alphabet("Y", ["y0", "y1"])
        z = Alphabet("Z", ["z0", "z1"])
        states = [tensor(tensor(KET0, KET0), KET0),
                  tensor(tensor(KET1, KET1), KET1)]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        cube = np.zeros((2, 2, 2))
        cube[0, 0, 0] = cube[1, 1, 1] = 0.5
        ext = Extension(JointPmf([x, y, z], cube), [KET0, KET1],
                        [KET0, KET1], [KET0, KET1], kind="cascade")
        assert validate_extension(ext, ens).passed
        pt = cascade_rate_point(ext)
        assert pt.r12 == pytest.approx(1.0)
        assert pt.r23 == pytest.approx(1.0)

    def test_noisy_relay_corner(self):
        ens, ext = cascade_flip_pair(0.1)
        pt = cascade_rate_point(ext)
        assert pt.r12 == pytest.approx(1.0, abs=1e-12)
        assert pt.r23 == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)

    def test_rate_point_invariants(self):
        with pytest.raises(CoordinationError):
            RatePoint(float("nan"))


class TestIsolatedRate:
    def _build(self, cube, atoms_c, c_states):
        x = Alphabet("X", ["x0", "x1"])
        y = Alphabet("Y", ["y0", "y1"])
        z = Alphabet("Z", [f"z{i}" for i in range(cube.shape[2])])
        states = [tensor(tensor(KET0, KET0), c_states[0]),
                  tensor(tensor(KET1, KET1), c_states[1])]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        ext = Extension(JointPmf([x, y, z], cube), [KET0, KET1],
                        [KET0, KET1], atoms_c, kind="isolated")
        report = validate_extension(ext, ens)
        assert report.passed, str(report)
        return ext

    def test_independent_relay_reduces_to_mi(self):
        cube = np.zeros((2, 2, 2))
        for xi in range(2):
            for zi in range(2):
                cube[xi, xi, zi] = 0.25
        ext = self._build(cube, [KET0, KET1],
                          [DensityOperator.maximally_mixed(2)] * 2)
        assert isolated_rate(ext) == pytest.approx(1.0, abs=1e-12)

    def test_relay_copy_of_label_without_source_info(self):
        # Y = Z independent of X: BC are correlated with each other but not
        # with the source, so the conditional information is zero
        x = Alphabet("X", ["x0", "x1"])
        y = Alphabet("Y", ["y0", "y1"])
        z = Alphabet("Z", ["z0", "z1"])
        bc_corr = DensityOperator(
            0.5 * tensor(KET0, KET0).matrix + 0.5 * tensor(KET1, KET1).matrix)
        states = [tensor(KET0, bc_corr), tensor(KET1, bc_corr)]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        cube = np.zeros((2, 2, 2))
        for xi in range(2):
            for yi in range(2):
                cube[xi, yi, yi] = 0.25
        ext = Extension(JointPmf([x, y, z], cube), [KET0, KET1],
                        [KET0, KET1], [KET0, KET1], kind="isolated")
        assert validate_extension(ext, ens).passed
        assert isolated_rate(ext) == pytest.approx(0.0, abs=1e-12)


class TestMeasurementStatistics:
    def test_identical_slots(self):
        emp, exp = measurement_statistics([ETA] * 5, PAULI_X)
        assert emp == pytest.approx(0.5)
        assert exp == pytest.approx(0.5)

    def test_two_slot_average(self):
        emp, exp = measurement_statistics([KET0, KET1], PAULI_Z)
        assert emp == pytest.approx(0.0, abs=1e-12)
        assert exp == pytest.approx(0.0, abs=1e-12)

    def test_four_slot_pauli_x(self):
        emp, exp = measurement_statistics([KET0, KET0, KET1, KETP], PAULI_X)
        assert emp == pytest.approx(0.25)
        assert exp == pytest.approx(0.25)

    def test_povm_statistics(self):
        emp, exp = measurement_statistics([KET0, KET1], Povm.computational(2))
        assert emp == pytest.approx([0.5, 0.5])
        assert exp == pytest.approx([0.5, 0.5])

    def test_identity_holds_on_random_slots(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            slots = [DensityOperator(random_density(rng, 3))
                     for _ in range(7)]
            g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            obs = HermitianObservable(0.5 * (g + g.conj().T))
            emp, exp = measurement_statistics(slots, obs)
            assert emp == pytest.approx(exp, abs=1e-10)
