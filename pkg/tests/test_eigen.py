import numpy as np
import pytest

from dicke_ed.errors import ConvergenceError
from dicke_ed.eigen import MatrixOperator, ground_state, lowest_pair
from dicke_ed.hamiltonian import assemble_dcs, project_parity
from dicke_ed.model import ModelParams, critical_coupling


def random_symmetric(dim, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim))
    return MatrixOperator(0.5 * (A + A.T))


class TestGroundState:
    def test_decoupled_limit_lanczos(self):
        p = ModelParams(16, 1.0, 1.3, 0.0)
        gs = ground_state(assemble_dcs(p, 10), dense_cutoff=0)
        assert gs.energy == pytest.approx(-p.j * p.delta, abs=1e-10)
        assert gs.method == "lanczos"

    def test_random_matrix_against_dense(self):
        op = random_symmetric(50, seed=7)
        gs = ground_state(op, dense_cutoff=0)
        exact = np.linalg.eigvalsh(op.matrix)[0]
        assert gs.energy == pytest.approx(exact, abs=1e-10)

    def test_state_invariants(self):
        p = ModelParams(12, 1.0, 1.0, 0.6)
        h = project_parity(assemble_dcs(p, 12), "even")
        gs = ground_state(h, dense_cutoff=0)
        assert np.linalg.norm(gs.vector) == pytest.approx(1.0, abs=1e-12)
        assert gs.residual < 1e-10 * h.norm_estimate() * 10
        assert gs.sector == "even"
        assert gs.basis == "dcs"
        assert gs.table.shape == (13, 13)

    def test_dense_and_lanczos_agree(self):
        p = ModelParams(10, 1.0, 1.0, 0.7)
        h = assemble_dcs(p, 9)
        gd = ground_state(h)  # dim 110 -> dense
        gl = ground_state(h, dense_cutoff=0)
        assert gd.method == "dense" and gl.method == "lanczos"
        assert gd.energy == pytest.approx(gl.energy, abs=1e-10)
        overlap = abs(gd.vector @ gl.vector)
        assert overlap == pytest.approx(1.0, abs=1e-8)

    def test_seed_independence(self):
        op = random_symmetric(120, seed=1)
        tol = 1e-10
        e1 = ground_state(op, tol=tol, seed=0, dense_cutoff=0).energy
        e2 = ground_state(op, tol=tol, seed=12345, dense_cutoff=0).energy
        assert abs(e1 - e2) <= 10 * tol * op.norm_estimate()

    def test_deterministic_for_fixed_seed(self):
        p = ModelParams(14, 1.0, 1.0, 0.8)
        h = project_parity(assemble_dcs(p, 10), "even")
        g1 = ground_state(h, seed=3, dense_cutoff=0)
        g2 = ground_state(h, seed=3, dense_cutoff=0)
        assert g1.energy == g2.energy
        assert np.array_equal(g1.vector, g2.vector)

    def test_ritz_history_monotone(self):
        op = random_symmetric(200, seed=2)
        gs = ground_state(op, dense_cutoff=0)
        hist = np.asarray(gs.ritz_history)
        assert len(hist) > 3
        assert np.all(np.diff(hist) <= 1e-11)

    def test_warm_start_converges_faster(self):
        p = ModelParams(64, 1.0, 1.0, 0.5)
        h = project_parity(assemble_dcs(p, 10), "even")
        cold = ground_state(h, dense_cutoff=0)
        gs_small = ground_state(project_parity(assemble_dcs(p, 8), "even"), dense_cutoff=0)
        padded = np.zeros((65, 11))
        padded[:, :9] = gs_small.table
        v0 = h.restrict(padded.reshape(-1))
        warm = ground_state(h, dense_cutoff=0, v0=v0)
        assert warm.energy == pytest.approx(cold.energy, abs=1e-9)
        assert warm.iterations <= cold.iterations

    def test_nonconvergence_raises_with_residual(self):
        op = random_symmetric(300, seed=4)
        with pytest.raises(ConvergenceError) as info:
            ground_state(op, tol=1e-12, max_iter=5, dense_cutoff=0)
        assert info.value.residual is not None and info.value.residual > 0

    def test_bad_tolerance(self):
        op = random_symmetric(10, seed=0)
        with pytest.raises(ValueError):
            ground_state(op, tol=0.0)


class TestLowestPair:
    def test_decoupled_gap(self):
        p = ModelParams(4, 1.0, 0.7, 0.0)
        g0, g1 = lowest_pair(assemble_dcs(p, 8))
        assert g1.energy - g0.energy == pytest.approx(0.7, abs=1e-8)

    def test_strong_coupling_doublet(self):
        p = ModelParams(8, 1.0, 1.0, 1.0)  # alpha = 4
        g0, g1 = lowest_pair(assemble_dcs(p, 24))
        assert g1.energy - g0.energy < 1e-6
        assert abs(g0.vector @ g1.vector) < 1e-8

    def test_lanczos_pair_matches_dense(self):
        op = random_symmetric(150, seed=8)
        exact = np.linalg.eigvalsh(op.matrix)[:2]
        g0, g1 = lowest_pair(op, dense_cutoff=0)
        assert g0.energy == pytest.approx(exact[0], abs=1e-9)
        assert g1.energy == pytest.approx(exact[1], abs=1e-9)
        assert abs(g0.vector @ g1.vector) < 1e-8

    def test_gap_minimum_sits_in_critical_window(self):
        """Within-sector excitation gap versus coupling dips near the critical
        point (precursor of the transition); doublet partner excluded by
        projecting, so the strong-coupling side rises again."""
        lam_c = critical_coupling(1.0, 1.0)
        fracs = (0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0)
        gaps = []
        for f in fracs:
            p = ModelParams(16, 1.0, 1.0, f * lam_c)
            g0, g1 = lowest_pair(project_parity(assemble_dcs(p, 32), "even"))
            gaps.append(g1.energy - g0.energy)
        best = fracs[int(np.argmin(gaps))]
        assert 0.9 <= best <= 1.5
