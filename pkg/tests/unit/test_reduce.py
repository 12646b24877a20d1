import numpy as np
import pytest

from src.core.errors import PowerFlowDivergedError, ZeroPivotError
from src.core.powerflow import AdmittanceMatrix, build_admittance, solve_power_flow
from src.core.reduce import (
    boundary_buses,
    expand_step,
    fold_constant_elements,
    generator_injections,
    kron_reduce,
)


def _schur(Y, keep):
    drop = [k for k in range(Y.shape[0]) if k not in keep]
    return (Y[np.ix_(keep, keep)]
            - Y[np.ix_(keep, drop)] @ np.linalg.solve(Y[np.ix_(drop, drop)], Y[np.ix_(drop, keep)]))


class TestKronReduce:
    def test_equals_schur_complement(self, study9):
        folded = study9.folded
        boundary = list(study9.reduced.boundary_buses)
        keep = [folded.index(bus) for bus in boundary]
        expected = _schur(folded.Y, keep)
        assert np.abs(study9.reduced.Y_red - expected).max() <= 1e-9

    def test_eliminates_in_ascending_order(self, study9):
        assert study9.reduced.boundary_buses == (1, 2, 3)
        assert study9.reduced.elimination_log == [4, 5, 6, 7, 8, 9]

    def test_boundary_ordering_is_respected(self, study9):
        red = kron_reduce(study9.folded, [3, 1, 2])
        base = study9.reduced.Y_red
        perm = [2, 0, 1]
        assert np.allclose(red.Y_red, base[np.ix_(perm, perm)])

    def test_keeping_everything_is_identity(self, study9):
        folded = study9.folded
        red = kron_reduce(folded, list(folded.bus_ids))
        assert red.steps == ()
        assert np.array_equal(red.Y_red, folded.Y)

    def test_elimination_order_does_not_matter(self, study9):
        red = kron_reduce(study9.folded, [1, 2, 3], order=[9, 4, 7, 5, 8, 6])
        assert red.elimination_log == [9, 4, 7, 5, 8, 6]
        assert np.abs(red.Y_red - study9.reduced.Y_red).max() <= 1e-10

    def test_order_must_cover_the_interior(self, study9):
        with pytest.raises(ValueError):
            kron_reduce(study9.folded, [1, 2, 3], order=[4, 5, 6])
        with pytest.raises(ValueError):
            kron_reduce(study9.folded, [1, 2, 3], order=[4, 5, 6, 7, 8, 9, 1])

    def test_isolated_interior_bus_leaves_boundary_block_alone(self):
        # bus 2 carries only a shunt: no coupling to either neighbour
        Y = np.array([[2.0 - 5j, 0, -2.0 + 5j],
                      [0, 0.1 - 0.5j, 0],
                      [-2.0 + 5j, 0, 2.0 - 5j]], dtype=complex)
        red = kron_reduce(AdmittanceMatrix(bus_ids=(1, 2, 3), Y=Y), [1, 3])
        assert np.array_equal(red.Y_red, Y[np.ix_([0, 2], [0, 2])])

    def test_isolated_bus_added_to_stock_network(self, study9):
        folded = study9.folded
        n = folded.order
        Y = np.zeros((n + 1, n + 1), dtype=complex)
        Y[:n, :n] = folded.Y
        Y[n, n] = 0.2 - 1.0j
        augmented = AdmittanceMatrix(bus_ids=folded.bus_ids + (10,), Y=Y)
        red = kron_reduce(augmented, [1, 2, 3])
        assert red.elimination_log == [4, 5, 6, 7, 8, 9, 10]
        assert np.abs(red.Y_red - study9.reduced.Y_red).max() <= 1e-12

    def test_zero_pivot(self):
        # bus 2 is isolated
        Y = np.array([[2.0 - 5j, 0, -2.0 + 5j],
                      [0, 0, 0],
                      [-2.0 + 5j, 0, 2.0 - 5j]], dtype=complex)
        with pytest.raises(ZeroPivotError) as exc:
            kron_reduce(AdmittanceMatrix(bus_ids=(1, 2, 3), Y=Y), [1, 3])
        assert exc.value.bus == 2

    def test_unknown_boundary_bus(self, study9):
        with pytest.raises(KeyError):
            kron_reduce(study9.folded, [1, 42])

    def test_expand_step_undoes_elimination(self, study9):
        folded = study9.folded
        red = kron_reduce(folded, [1, 2, 3, 5, 6, 7, 8, 9])
        step = red.steps[0]
        assert step.bus == 4
        # Y_red is in boundary order, which here equals the post-step ordering
        assert np.allclose(expand_step(red.Y_red, step), folded.Y)

    def test_to_dict(self, study9):
        payload = study9.reduced.to_dict()
        assert payload['boundary_buses'] == [1, 2, 3]
        assert len(payload['Y_red']) == 3
        assert payload['elimination_log'] == [4, 5, 6, 7, 8, 9]


class TestFolding:
    def test_load_becomes_admittance(self, case9, study9):
        sol = study9.solution
        k = study9.admittance.index(5)
        added = study9.folded.Y[k, k] - study9.admittance.Y[k, k]
        assert added == pytest.approx(np.conj(0.9 + 0.3j) / sol.vm[k] ** 2)

    def test_bus_without_load_is_unchanged(self, study9):
        k = study9.admittance.index(4)
        assert study9.folded.Y[k, k] == study9.admittance.Y[k, k]

    def test_gfl_is_folded_and_not_a_boundary(self, chain_case):
        Y = build_admittance(chain_case)
        sol = solve_power_flow(chain_case, Y)
        assert boundary_buses(chain_case) == [1, 3]
        injections = generator_injections(chain_case, sol)
        assert injections[2].real == pytest.approx(0.2)
        folded = fold_constant_elements(chain_case, Y, sol)
        k = Y.index(2)
        net = complex(1.1, 0.3) - injections[2]
        assert folded.Y[k, k] - Y.Y[k, k] == pytest.approx(np.conj(net) / sol.vm[k] ** 2)

    def test_requires_converged_solution(self, case9):
        Y = build_admittance(case9)
        sol = solve_power_flow(case9, Y, max_iter=1)
        with pytest.raises(PowerFlowDivergedError):
            fold_constant_elements(case9, Y, sol)

    def test_generator_injections_split_bus_generation(self, case9, study9):
        injections = generator_injections(case9, study9.solution)
        assert injections[2].real == pytest.approx(1.63, abs=1e-7)
        assert injections[1].real == pytest.approx(study9.solution.injections[0].real)
