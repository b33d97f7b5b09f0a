import numpy as np
import pytest

from qcoord.classical import Alphabet, JointPmf
from qcoord.coordination import CqEnsemble, validate_extension
from qcoord.optimizer import (
    AtomCandidateSet,
    minimize_conditional,
    optimize,
    propose_atoms,
)
from qcoord.quantum import DensityOperator, tensor, trace_norm_distance

from conftest import ETA, KET0, KET1, KETP, KETM, phase_flip_pair
from oracles import (
    binary_entropy,
    grid_min_mutual_information,
    random_pure,
)


def contains_atom(atoms, matrix, tol=1e-9):
    return any(trace_norm_distance(a.matrix, matrix) < tol
               for a in atoms)


class TestProposeAtoms:
    def test_three_symbol_target_yields_shared_atoms(
            self, example1_three_symbol):
        ens, _ = example1_three_symbol
        cands = propose_atoms(ens, max_merge_order=2)
        assert contains_atom(cands.atoms_b, KET0.matrix)
        assert contains_atom(cands.atoms_b, KETP.matrix)
        assert contains_atom(cands.atoms_b, ETA.matrix)

    def test_two_symbol_target_recovers_conjugate_atom_by_peeling(
            self, example1_pair):
        ens, _ = example1_pair
        cands = propose_atoms(ens, max_merge_order=2)
        assert contains_atom(cands.atoms_b, KETP.matrix)
        assert "peeled" in cands.provenance_b

    def test_pure_conditionals_give_pure_atoms(self):
        ens, _ = phase_flip_pair(0.0)
        cands = propose_atoms(ens, max_merge_order=1)
        for atom in cands.atoms_b:
            vals = np.linalg.eigvalsh(atom.matrix)
            assert vals[-1] == pytest.approx(1.0, abs=1e-9)

    def test_product_target_includes_average_atom(self):
        ens, _ = phase_flip_pair(0.5)
        cands = propose_atoms(ens, max_merge_order=2)
        assert contains_atom(cands.atoms_b,
                             DensityOperator.maximally_mixed(2).matrix)

    def test_dedup(self, example1_three_symbol):
        ens, _ = example1_three_symbol
        cands = propose_atoms(ens, max_merge_order=2)
        for i, a in enumerate(cands.atoms_b):
            for b in cands.atoms_b[i + 1:]:
                assert trace_norm_distance(a.matrix, b.matrix) >= 1e-9


class TestMinimizeConditional:
    def test_shared_atoms_forced_point(self, example1_pair):
        ens, _ = example1_pair
        atoms = AtomCandidateSet(atoms_b=(KET0, KETP),
                                 provenance_b=("user", "user"))
        res = minimize_conditional(ens, atoms, kind="two-node")
        assert res.feasible
        assert res.value == pytest.approx(binary_entropy(0.25) - 0.5,
                                          abs=1e-6)
        # the feasibility system pins the conditionals uniquely
        assert res.conditional[1] == pytest.approx([0.5, 0.5], abs=1e-7)

    def test_copy_atoms_upper_bound(self, example1_three_symbol):
        ens, _ = example1_three_symbol
        atoms = AtomCandidateSet(atoms_b=(KET0, KET0, KETP),
                                 provenance_b=("user",) * 3)
        res = minimize_conditional(ens, atoms, kind="two-node")
        assert res.feasible
        assert res.value <= 1.5 + 1e-9

    @pytest.mark.parametrize("p", [0.1, 0.25, 0.5])
    def test_phase_flip_closed_form(self, p):
        ens, _ = phase_flip_pair(p)
        atoms = AtomCandidateSet(atoms_b=(KETP, KETM),
                                 provenance_b=("user", "user"))
        res = minimize_conditional(ens, atoms, kind="two-node")
        assert res.feasible
        assert res.value == pytest.approx(1 - binary_entropy(p), abs=1e-9)

    def test_objective_trace_monotone(self, example1_pair):
        ens, _ = example1_pair
        res = minimize_conditional(ens, propose_atoms(ens, 2),
                                   kind="two-node")
        trace = res.objective_trace
        assert all(trace[i + 1] <= trace[i] + 1e-9
                   for i in range(len(trace) - 1))

    def test_result_passes_validation(self, example1_pair):
        ens, _ = example1_pair
        res = minimize_conditional(ens, propose_atoms(ens, 2),
                                   kind="two-node")
        assert res.feasible
        report = validate_extension(res.extension, ens, tol=1e-6)
        assert report.passed

    def test_infeasible_atom_set_reported(self, example1_pair):
        ens, _ = example1_pair
        atoms = AtomCandidateSet(atoms_b=(KET0, KET1),
                                 provenance_b=("user", "user"))
        res = minimize_conditional(ens, atoms, kind="two-node")
        assert not res.feasible
        assert res.max_residual > 1e-8
        assert res.extension is None

    def test_feasibility_residual_below_tolerance(self, example1_pair):
        ens, _ = example1_pair
        res = minimize_conditional(ens, propose_atoms(ens, 2),
                                   kind="two-node")
        assert res.max_residual <= 1e-8

    def test_deterministic(self, example1_pair):
        ens, _ = example1_pair
        atoms = propose_atoms(ens, 2)
        r1 = minimize_conditional(ens, atoms, kind="two-node")
        r2 = minimize_conditional(ens, atoms, kind="two-node")
        assert r1.value == r2.value
        assert np.array_equal(r1.conditional, r2.conditional)


class TestOptimizePipeline:
    def test_example1_full_pipeline(self, example1_pair):
        ens, _ = example1_pair
        res = optimize(ens, kind="two-node", max_merge_order=3)
        assert res.feasible
        assert res.value <= 0.3113 + 1e-3
        assert res.value < 1.5

    def test_product_target_is_free(self):
        ens, _ = phase_flip_pair(0.5)
        res = optimize(ens, kind="two-node", max_merge_order=2)
        assert res.feasible
        assert res.value == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("p", [0.1])
    def test_phase_flip_pipeline(self, p):
        ens, _ = phase_flip_pair(p)
        res = optimize(ens, kind="two-node", max_merge_order=2)
        assert res.feasible
        assert res.value == pytest.approx(1 - binary_entropy(p), abs=1e-6)

    def test_non_factorizable_target_certified_empty(self):
        x = Alphabet("X", ["x0"])
        correlated = DensityOperator(
            0.5 * tensor(KET0, KET0).matrix
            + 0.5 * tensor(KET1, KET1).matrix)
        ens = CqEnsemble(JointPmf([x], [1.0]), [correlated],
                         {"A": 2, "B": 2})
        res = optimize(ens, kind="two-node")
        assert not res.feasible
        assert res.certified_empty

    def test_pure_atom_value_dominates_merged(self, example1_pair):
        ens, _ = example1_pair
        full = propose_atoms(ens, max_merge_order=2)
        pure_only = AtomCandidateSet(
            atoms_b=tuple(a for a, p in zip(full.atoms_b, full.provenance_b)
                          if p == "spectral"),
            provenance_b=tuple(p for p in full.provenance_b
                               if p == "spectral"))
        res_pure = minimize_conditional(ens, pure_only, kind="two-node")
        res_full = minimize_conditional(ens, full, kind="two-node")
        assert res_pure.feasible and res_full.feasible
        assert res_pure.value >= res_full.value - 1e-9


class TestGridOracle:
    def test_example1_shared_atoms_match_oracle(self, example1_pair):
        ens, _ = example1_pair
        atoms = AtomCandidateSet(atoms_b=(KET0, KETP),
                                 provenance_b=("user", "user"))
        res = minimize_conditional(ens, atoms, kind="two-node")
        etas = [ens.conditional_part(i, "B").matrix for i in range(2)]
        oracle = grid_min_mutual_information(
            ens.source.table, [KET0.matrix, KETP.matrix], etas)
        assert oracle is not None
        assert oracle >= res.value - 1e-3

    def test_random_instances_never_beaten_by_grid(self):
        rng = np.random.default_rng(23)
        beaten = 0
        for trial in range(6):
            num_x = int(rng.integers(2, 4))
            num_y = int(rng.integers(2, 4))
            atoms = [random_pure(rng, 2) for _ in range(num_y)]
            cond = rng.dirichlet(np.ones(num_y), size=num_x)
            px = rng.dirichlet(np.ones(num_x))
            etas = [sum(c * a for c, a in zip(cond[i], atoms))
                    for i in range(num_x)]
            x = Alphabet("X", [f"x{i}" for i in range(num_x)])
            states = [tensor(DensityOperator.basis_state(2, 0),
                             DensityOperator(eta)) for eta in etas]
            ens = CqEnsemble(JointPmf([x], px), states, {"A": 2, "B": 2})
            cands = AtomCandidateSet(
                atoms_b=tuple(DensityOperator(a) for a in atoms),
                provenance_b=("user",) * num_y)
            res = minimize_conditional(ens, cands, kind="two-node")
            assert res.feasible
            oracle = grid_min_mutual_information(px, atoms, etas)
            assert oracle is not None
            if oracle < res.value - 1e-3:
                beaten += 1
        assert beaten == 0


class TestCascadeAndIsolatedOptimization:
    def test_cascade_scalarization(self):
        from conftest import cascade_flip_pair
        ens, ext = cascade_flip_pair(0.1)
        res = optimize(ens, kind="cascade", max_merge_order=2, lam=0.5)
        assert res.feasible
        assert res.rate_point is not None
        # the planted extension is admissible, so the optimizer cannot be
        # worse than its scalarized value
        from qcoord.coordination import cascade_rate_point
        pt = cascade_rate_point(ext)
        assert res.value <= pt.r12 + 0.5 * pt.r23 + 1e-6

    def test_isolated_restriction(self):
        x = Alphabet("X", ["x0", "x1"])
        plus = KETP
        states = [tensor(tensor(KET0, KET0), plus),
                  tensor(tensor(KET1, KET1), plus)]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        res = optimize(ens, kind="isolated", max_merge_order=2)
        assert res.feasible
        assert res.value == pytest.approx(1.0, abs=1e-6)
        report = validate_extension(res.extension, ens, tol=1e-6)
        assert report.passed

    def test_isolated_varying_relay_reported_infeasible(self):
        x = Alphabet("X", ["x0", "x1"])
        states = [tensor(tensor(KET0, KET0), KET0),
                  tensor(tensor(KET1, KET1), KET1)]
        ens = CqEnsemble(JointPmf([x], [0.5, 0.5]), states,
                         {"A": 2, "B": 2, "C": 2})
        res = optimize(ens, kind="isolated", max_merge_order=2)
        assert not res.feasible
