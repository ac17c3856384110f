import numpy as np
import pytest

from rydopt.basis import Truncation
from rydopt.errors import ConfigError
from rydopt.lattice import build_corner_square, build_custom
from rydopt.model import default_model
from rydopt.observables import TargetState
from rydopt.optimizer import (
    EnsembleObjective,
    JsonlTraceWriter,
    OptimizationProblem,
    dcrab_optimize,
    nelder_mead,
)
from rydopt.pulse import ControlConstraints, FieldParams, Guess, PulseParams


def test_quadratic():
    res = nelder_mead(lambda x: (x[0] - 2.0) ** 2, [0.0], 0.5, budget=500, tol=1e-14)
    assert res.x[0] == pytest.approx(2.0, abs=1e-6)
    assert res.reason in {"spread", "diameter"}


def test_rosenbrock():
    def rosen(x):
        return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

    res = nelder_mead(rosen, [-1.2, 1.0], 0.1, budget=2000, tol=1e-14)
    assert res.f < 1e-6
    assert res.n_evals <= 2000


def test_constant_function_stops_on_spread():
    res = nelder_mead(lambda x: 3.0, np.zeros(4), 1.0, budget=100)
    assert res.reason == "spread"
    assert res.n_evals == 5


def test_budget_respected():
    calls = []
    res = nelder_mead(lambda x: calls.append(1) or float(np.sum(x**2)), np.ones(3), 0.1, budget=17, tol=0)
    assert len(calls) == res.n_evals == 17
    assert res.reason == "budget"
    assert res.trace[0] == pytest.approx(3.0)


def pi_pulse_problem(**kw):
    cons = ControlConstraints()
    guess = PulseParams(3.0, FieldParams(Guess("constant", 0.3 * cons.omega_max)), FieldParams())
    defaults = dict(budget=200, n_super_iterations=2, n_freqs=2, seed=3, dt=1e-2)
    defaults.update(kw)
    return OptimizationProblem(build_custom([(0, 0)]), default_model(), TargetState("crystal", 1), guess, cons, **defaults)


def test_zero_super_iterations_returns_guess():
    prob = pi_pulse_problem(n_super_iterations=0)
    run = dcrab_optimize(prob)
    assert run.best_fom == run.guess_fom
    assert len(run.trace) == 1


def test_pi_pulse_reached_and_monotone():
    run = dcrab_optimize(pi_pulse_problem())
    assert 1 - run.fidelity < 1e-3
    hist = run.incumbent_history()
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_budget_below_simplex_rejected():
    with pytest.raises(ConfigError):
        pi_pulse_problem(budget=5, n_freqs=2)


def test_trace_writer(tmp_path):
    path = tmp_path / "trace.jsonl"
    writer = JsonlTraceWriter(path)
    run = dcrab_optimize(pi_pulse_problem(n_super_iterations=1, budget=20), on_eval=writer)
    writer.close()
    lines = path.read_text().splitlines()
    assert len(lines) == len(run.trace)


def ensemble_problem(model):
    cons = ControlConstraints()
    guess = PulseParams(3.0, FieldParams(Guess("constant", 0.5 * cons.omega_max)), FieldParams(Guess("constant", 1.0)))
    return OptimizationProblem(
        build_corner_square(10, 2),
        model,
        TargetState("ghz", theta=np.pi / 2),
        guess,
        cons,
        filling=0.9,
        n_realizations=4,
        ensemble_seed=5,
        budget=30,
        n_super_iterations=2,
        n_freqs=2,
        seed=9,
        dt=1e-2,
    )


def test_determinism_across_worker_counts(model):
    prob = ensemble_problem(model)
    a = dcrab_optimize(prob, workers=1)
    b = dcrab_optimize(prob, workers=3)
    assert a.best_fom == b.best_fom
    np.testing.assert_array_equal(a.realization_fidelities, b.realization_fidelities)
    assert [r["fom"] for r in a.trace] == [r["fom"] for r in b.trace]


def test_identical_realizations_deduplicated(model):
    prob = ensemble_problem(model)
    prob.filling = 1.0
    obj = EnsembleObjective(prob)
    assert len(obj.members) == 1 and len(obj.realizations) == 4


def test_truncation_passthrough(model):
    prob = ensemble_problem(model)
    prob.truncation = Truncation(max_excitations=4)
    assert EnsembleObjective(prob).members[0].terms.dim == 16
