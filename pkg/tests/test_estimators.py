import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from kooploop.estimators import CyclicLoopPlanner, KoopmanReducer

from conftest import linear_trajectory, particle_trajectory


class TestKoopmanReducer:
    def test_fit_transform_round_trip(self, rng):
        traj = linear_trajectory(rng, n=12, r=3, frames=25)
        reducer = KoopmanReducer(rank=3).fit(traj.frames)
        z = reducer.transform(traj.frames)
        assert z.shape == (25, 3)
        back = reducer.inverse_transform(z)
        # exact rank-3 data reconstructs exactly
        np.testing.assert_allclose(back, traj.frames, atol=1e-9)

    def test_predict_is_one_step_surrogate(self, rng):
        traj = linear_trajectory(rng, n=10, r=2, frames=20)
        reducer = KoopmanReducer(rank=2).fit(traj.frames)
        pred = reducer.predict(traj.frames[:-1])
        np.testing.assert_allclose(pred, traj.frames[1:], atol=1e-8)

    def test_auto_rank(self, rng):
        traj = linear_trajectory(rng, n=14, r=4, frames=30)
        reducer = KoopmanReducer(rank=None).fit(traj.frames)
        assert reducer.model_.rank == 4

    def test_sklearn_protocol(self, rng):
        reducer = KoopmanReducer(rank=5, energy=0.99)
        params = reducer.get_params()
        assert params["rank"] == 5 and params["energy"] == 0.99
        cloned = clone(reducer)
        assert cloned.get_params() == params
        with pytest.raises(Exception):
            KoopmanReducer().transform(np.zeros((4, 3)))  # not fitted

    def test_dimension_check_on_transform(self, rng):
        traj = particle_trajectory(rng, particles=2, frames=15)
        reducer = KoopmanReducer(rank=3).fit(traj.frames)
        with pytest.raises(ValueError):
            reducer.transform(np.zeros((4, traj.n + 1)))


class TestCyclicLoopPlanner:
    def test_fit_transform_closes_loop(self, rng):
        traj = particle_trajectory(rng, particles=2, frames=31)
        planner = CyclicLoopPlanner(rank=3, harmonics=4)
        loop = planner.fit_transform(traj.frames)
        assert loop.shape == (31, traj.n)
        assert planner.closure_residual_ <= 1e-8 * (1 + np.linalg.norm(planner.z1_))
        np.testing.assert_allclose(loop[0], loop[-1], atol=1e-8)

    def test_matches_functional_pipeline(self, rng):
        from kooploop.cyclic_solver import SolverWeights, solve_cyclic

        traj = particle_trajectory(rng, particles=2, frames=25)
        planner = CyclicLoopPlanner(rank=3, harmonics=3, w_red=0.05, w_u=2.0)
        loop = planner.fit_transform(traj.frames)
        solution = solve_cyclic(traj, rank=3, harmonics=3,
                                weights=SolverWeights(w_red=0.05, w_u=2.0))
        np.testing.assert_allclose(loop, solution.full_cycle.frames, atol=1e-9)

    def test_pipeline_composition(self, rng):
        traj = particle_trajectory(rng, particles=2, frames=21)
        pipe = Pipeline([("loop", CyclicLoopPlanner(rank=2, harmonics=2))])
        loop = pipe.fit_transform(traj.frames)
        assert loop.shape[0] == 21

    def test_clone_and_params(self):
        planner = CyclicLoopPlanner(rank=4, harmonics=5, w_u=7.0)
        cloned = clone(planner)
        assert cloned.get_params()["w_u"] == 7.0
        assert cloned.get_params()["harmonics"] == 5

    def test_transform_requires_fit(self, rng):
        with pytest.raises(Exception):
            CyclicLoopPlanner().transform(np.zeros((10, 4)))

    def test_harmonics_guard(self, rng):
        traj = particle_trajectory(rng, particles=1, frames=9)
        with pytest.raises(ValueError):
            CyclicLoopPlanner(rank=2, harmonics=4).fit(traj.frames)
