"""Command-line drivers.

Each subcommand reads one YAML run config, writes CSV/JSON reports (plus
optional figures) into the output directory, and finishes with a manifest
that records the resolved config, seeds and package versions.

Exit codes: 0 success, 2 config/input error, 3 numerical failure,
4 constraint violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import shutil
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from rydopt import reports
from rydopt.basis import ground_config
from rydopt.config import (
    RunConfig,
    build_constraints,
    build_model,
    build_problem,
    load_config,
    perfect_terms,
)
from rydopt.detection import detection_evolution, deviation_map, extract_subspace
from rydopt.errors import ConfigError, DomainError, RydoptError
from rydopt.hamiltonian import classical_spectrum, critical_detuning
from rydopt.lattice import build_bar
from rydopt.model import angular_to_mhz, mhz_to_angular
from rydopt.observables import (
    decay_probability,
    ensemble_density_matrix,
    excitation_density,
    excitation_distribution,
    fidelity,
    live_mask,
    mean_excitation,
    measure_ensemble,
    resolve_target,
)
from rydopt.optimizer import EnsembleObjective, JsonlTraceWriter, dcrab_optimize
from rydopt.propagator import adiabaticity_trace, evolve
from rydopt.pulse import SampledPulse, linear_chirp_reference, synthesize

log = logging.getLogger("rydopt")


@dataclass
class Context:
    command: str
    cfg: RunConfig
    out: Path
    workers: int
    figures: bool
    inputs: dict = field(default_factory=dict)

    def figure(self, name: str) -> Path:
        return self.out / f"{name}.{self.cfg.output.figure_format}"


def _bitstring(mask: int, n: int) -> str:
    # unit 0 printed first
    return "".join(str((int(mask) >> i) & 1) for i in range(n))


# --- shared pieces -----------------------------------------------------------


def _trajectory_reports(ctx: Context, terms, pulse: SampledPulse, target=None) -> dict:
    """Perfect-lattice trajectory, P_n(tau), n_e(x) and adiabaticity diagnostics."""
    cfg = ctx.cfg
    model = build_model(cfg)
    interval = cfg.simulate.record_interval_us
    n_stride = max(1, int(round(interval / pulse.dt)))
    traj = evolve(
        ground_config(terms.basis),
        terms,
        pulse,
        record_interval=n_stride * pulse.dt,
        store_states=cfg.simulate.adiabaticity,
    )
    p_decay = decay_probability(traj.times, traj.n_exc, model.gamma_decay)
    header = ["t_us", "mean_n_exc", "p_decay", "norm"]
    cols = [traj.times, traj.n_exc, p_decay, traj.norms]
    overlap = None
    if cfg.simulate.adiabaticity:
        adi = adiabaticity_trace(traj, terms, pulse)
        overlap = adi.overlap
        header += ["energy_mhz", "ground_energy_mhz", "gap_mhz", "ground_overlap"]
        cols += [angular_to_mhz(adi.energy), angular_to_mhz(adi.ground_energy), angular_to_mhz(adi.gap), adi.overlap]
    reports.write_csv(ctx.out / "trajectory.csv", header, zip(*cols))

    final = traj.final
    p_n = excitation_distribution(final)
    reports.write_csv(ctx.out / "populations.csv", ["n_exc", "probability"], enumerate(p_n))
    n_x = excitation_density(final)
    reports.write_csv(ctx.out / "density.csv", ["unit", "n_e"], enumerate(n_x))
    if ctx.figures:
        from rydopt import plotting

        plotting.pulse(pulse.t, angular_to_mhz(pulse.omega), angular_to_mhz(pulse.delta), ctx.figure("pulse"))
        plotting.trajectory(traj.times, traj.n_exc, p_decay, ctx.figure("trajectory"), overlap)
        plotting.bars(np.arange(len(p_n)), p_n, r"$n$", r"$P_n$", ctx.figure("populations"))
        plotting.bars(np.arange(len(n_x)), n_x, "unit", r"$n_e$", ctx.figure("density"))
    single = fidelity(final, target) if target is not None else math.nan
    return {
        "trajectory": traj,
        "F_s": single,
        "P_d": float(p_decay[-1]),
        "mean_n_exc": mean_excitation(final),
        "P_n": p_n,
    }


def _optimize(ctx: Context) -> dict:
    cfg = ctx.cfg
    problem = build_problem(cfg)
    writer = JsonlTraceWriter(ctx.out / "trace.jsonl")
    try:
        run = dcrab_optimize(problem, workers=ctx.workers, on_eval=writer)
    finally:
        writer.close()
    report_dt = cfg.pulse.report_dt_us or cfg.pulse.dt_us
    pulse = synthesize(run.best_params, problem.constraints, report_dt)
    pulse.to_csv(ctx.out / "pulse.csv")

    objective = EnsembleObjective(problem, workers=ctx.workers)
    fids, states = objective.evaluate(pulse, keep_states=True)
    terms = perfect_terms(cfg, problem.model, problem.geometry)
    target = resolve_target(problem.target, terms, problem.final_delta)
    metrics = _trajectory_reports(ctx, terms, pulse, target)
    row = reports.summary_table(fids.mean(), metrics["F_s"], metrics["P_d"], metrics["mean_n_exc"], problem.duration)
    reports.write_summary(ctx.out, row, ctx.command)
    reports.write_csv(
        ctx.out / "realizations.csv",
        ["realization", "seed", "n_occupied", "fidelity"],
        [(i, r.seed, r.n_occupied, f) for i, (r, f) in enumerate(zip(objective.realizations, fids))],
    )
    reports.write_json(
        ctx.out / "run.json",
        {
            "guess_fom": run.guess_fom,
            "best_fom_optimization_dt": run.best_fom,
            "fom_report_dt": 1.0 - float(fids.mean()),
            "target_convention": "per-realization (dead units never excited)",
            "optimization_dt_us": problem.dt,
            "report_dt_us": report_dt,
            "n_evaluations": len(run.trace),
            "wall_time_s": run.wall_time,
            "super_iterations": run.super_iterations,
        },
    )
    if ctx.figures:
        from rydopt import plotting

        evals = np.array([r["eval"] for r in run.trace])
        fom = np.array([r["fom"] for r in run.trace])
        plotting.convergence(evals, fom, np.minimum.accumulate(fom), ctx.figure("convergence"))
    log.info("F = %.6f, F_s = %.6f, P_d = %.4f", row["F"], row["F_s"], row["P_d"])
    return {"problem": problem, "run": run, "pulse": pulse, "objective": objective, "fids": fids,
            "states": states, "terms": terms, "row": row}


def _seeds(cfg: RunConfig) -> dict:
    return {"ensemble": cfg.ensemble.seed, "optimizer": cfg.optimizer.seed, "shots": cfg.detection.shot_seed}


# --- commands ----------------------------------------------------------------


def cmd_spectrum(ctx: Context) -> None:
    cfg = ctx.cfg
    s = cfg.spectrum
    terms = perfect_terms(cfg)
    n = terms.chain.n_units
    alive = terms.chain.alive
    v = terms.pair_interactions[np.ix_(alive, alive)]
    v_l = float(np.min(v[np.triu_indices(len(v), 1)])) if n > 1 else 1.0
    if s.n_points < 1:
        raise ConfigError("spectrum.n_points must be at least 1")
    n_points = 1 if s.delta_min_mhz == s.delta_max_mhz else s.n_points
    deltas = mhz_to_angular(np.linspace(s.delta_min_mhz, s.delta_max_mhz, n_points))
    configs = terms.basis.configs
    energies = np.array([terms.diagonal(d) for d in deltas])
    rows = []
    ground = []
    for d, e in zip(deltas, energies):
        for c, k, en in zip(configs, terms.basis.n_exc, e):
            rows.append((angular_to_mhz(d), d / v_l, _bitstring(c, n), int(k), angular_to_mhz(en), en / v_l))
        _, cfgs, nex = classical_spectrum(terms, d)
        ground.append((angular_to_mhz(d), d / v_l, _bitstring(cfgs[0], n), int(nex[0])))
    reports.write_csv(
        ctx.out / "spectrum.csv",
        ["delta_mhz", "delta_over_vl", "config", "n_exc", "energy_mhz", "energy_over_vl"],
        rows,
    )
    reports.write_csv(ctx.out / "ground.csv", ["delta_mhz", "delta_over_vl", "ground_config", "ground_n_exc"], ground)

    # exact ground-state crossings inside the sweep
    crossings = []
    for (d0, _, c0, n0), (d1, _, c1, n1) in zip(ground, ground[1:]):
        if c0 != c1:
            i0 = terms.basis.index_of[int(c0[::-1], 2)]
            i1 = terms.basis.index_of[int(c1[::-1], 2)]
            dn = terms.n_exc[i1] - terms.n_exc[i0]
            at = (terms.diag_interaction[i1] - terms.diag_interaction[i0]) / dn if dn else math.nan
            crossings.append({"from": c0, "to": c1, "delta_mhz": angular_to_mhz(at)})
    info = {"v_l_mhz": angular_to_mhz(v_l), "n_units": n, "dim": terms.dim, "crossings": crossings}
    marks = []
    if cfg.geometry.kind == "corner_square" and int(alive.sum()) >= 2:
        dc = critical_detuning(terms)
        info["critical_detuning_mhz"] = angular_to_mhz(dc)
        marks.append(dc / v_l)
    reports.write_json(ctx.out / "spectrum.json", info)
    if ctx.figures:
        from rydopt import plotting

        plotting.spectrum(deltas / v_l, energies / v_l, terms.basis.n_exc, ctx.figure("spectrum"), marks)


def cmd_crystal(ctx: Context) -> None:
    res = _optimize(ctx)
    problem = res["problem"]
    cons = problem.constraints
    d0 = cons.delta_start if cons.delta_start is not None else -cons.delta_max
    d1 = cons.delta_end if cons.delta_end is not None else cons.delta_max
    baseline = linear_chirp_reference(problem.duration, d0, d1, cons.omega_max, cons, res["pulse"].dt)
    base_f = float(res["objective"].evaluate(baseline).mean())
    baseline.to_csv(ctx.out / "baseline_pulse.csv")
    reports.write_json(ctx.out / "baseline.json", {"kind": "linear_chirp", "F": base_f, "gain": res["row"]["F"] - base_f})


def cmd_ghz(ctx: Context) -> None:
    res = _optimize(ctx)
    det = ctx.cfg.detection
    objective, states = res["objective"], res["states"]
    n = res["terms"].chain.n_units
    hist = measure_ensemble(states, det.n_shots, det.shot_seed)
    reports.write_csv(ctx.out / "histogram.csv", ["config", "n_exc", "count"],
                      [(_bitstring(c, n), bin(c).count("1"), k) for c, k in hist.items()])
    rho = ensemble_density_matrix(states, n_units=n)
    idx = np.argwhere(np.abs(rho) > 1e-10)
    reports.write_csv(ctx.out / "density_matrix.csv", ["row", "col", "re", "im"],
                      [(_bitstring(i, n), _bitstring(j, n), rho[i, j].real, rho[i, j].imag) for i, j in idx])
    if ctx.figures:
        from rydopt import plotting

        keep = sorted({0, (1 << n) - 1} | {int(c) for c in hist})
        plotting.matrix(rho[np.ix_(keep, keep)], [_bitstring(c, n) for c in keep], ctx.figure("density_matrix"), r"$\rho$")

    lives = [live_mask(t) for t in objective.realization_terms()]
    try:
        sub, leak = extract_subspace(states, live_masks=lives)
    except DomainError as exc:
        # a poorly prepared state still gets its histogram and density matrix
        log.warning("skipping detection: %s", exc)
        reports.write_json(ctx.out / "subspace.json", {"error": str(exc)})
        return
    reports.write_json(ctx.out / "subspace.json", {"gamma": sub.gamma, "alpha": sub.alpha, "leakage": leak})

    terms = res["terms"]
    omega_m = mhz_to_angular(det.omega_m_mhz)
    trace = detection_evolution(sub, terms, omega_m, det.t_max_us, det.dt_us, det.theta_target, det.unit)
    reports.write_csv(ctx.out / "detection.csv", ["t_us", "excitation", "ghz_reference", "deviation"],
                      zip(trace.times, trace.excitation, trace.reference, trace.deviation))
    gammas = np.linspace(0.0, 0.5, det.n_gamma)
    alphas = np.linspace(0.0, 2 * math.pi, det.n_alpha)
    dmap = deviation_map(terms, omega_m, det.theta_target, gammas, alphas, det.t_max_us, det.dt_us, det.unit)
    reports.write_csv(ctx.out / "deviation_map.csv", ["gamma", "alpha", "max_deviation"],
                      [(g, a, dmap[i, j]) for i, g in enumerate(gammas) for j, a in enumerate(alphas)])
    reports.write_json(ctx.out / "detection.json",
                       {"max_deviation": trace.max_deviation, "argmax_time_us": trace.argmax_time, "unit": det.unit,
                        "latency_us": det.latency_us})
    if ctx.figures:
        plotting.detection(trace.times, trace.excitation, trace.reference, ctx.figure("detection"))
        plotting.heatmap(alphas, gammas, dmap, r"$\alpha$", r"$\gamma$", r"$|D|$", ctx.figure("deviation_map"),
                         point=(sub.alpha, sub.gamma))


def _dicke_projection(states, n: int) -> np.ndarray:
    """Averaged density matrix in the symmetric basis |s_0>..|s_n>."""
    rho = np.zeros((n + 1, n + 1), dtype=complex)
    for psi in states:
        c = np.zeros(n + 1, dtype=complex)
        for k in range(n + 1):
            sel = psi.basis.n_exc == k
            c[k] = psi.amplitudes[sel].sum() / math.sqrt(math.comb(n, k))
        rho += np.outer(c, c.conj())
    return rho / len(states)


def cmd_arbitrary(ctx: Context) -> None:
    if ctx.cfg.target.kind != "symmetric":
        raise ConfigError("arbitrary expects target.kind: symmetric")
    res = _optimize(ctx)
    n = res["terms"].chain.n_units
    rho = _dicke_projection(res["states"], n)
    a = np.zeros(n + 1)
    coeffs = np.asarray(res["problem"].target.coefficients, dtype=float)[: n + 1]
    a[: len(coeffs)] = coeffs
    a /= np.linalg.norm(a)
    diff = rho - np.outer(a, a)
    reports.write_csv(ctx.out / "state_difference.csv", ["n", "m", "re", "im"],
                      [(i, j, diff[i, j].real, diff[i, j].imag) for i in range(n + 1) for j in range(n + 1)])
    reports.write_json(ctx.out / "state_difference.json",
                       {"basis": "symmetric", "max_abs": float(np.abs(diff).max()), "target": a})
    if ctx.figures:
        from rydopt import plotting

        plotting.matrix(diff, [f"s{k}" for k in range(n + 1)], ctx.figure("state_difference"), r"$\rho - \rho_t$")


def _load_pulse(ctx: Context, path) -> SampledPulse:
    if path is None:
        raise ConfigError(f"{ctx.command} needs --pulse FILE")
    pulse = SampledPulse.from_csv(path)
    pulse.check(build_constraints(ctx.cfg), atol=1e-9)
    copy = ctx.out / "input_pulse.csv"
    if Path(path).resolve() != copy.resolve():
        shutil.copyfile(path, copy)
    ctx.inputs["pulse"] = {"path": str(copy.resolve()), "source": str(path), "sha256": reports.sha256_file(copy)}
    return pulse


def cmd_staircase(ctx: Context, pulse_path) -> None:
    cfg = ctx.cfg
    pulse = _load_pulse(ctx, pulse_path)
    model = build_model(cfg)
    delta = mhz_to_angular(cfg.staircase.delta_mhz) if cfg.staircase.delta_mhz is not None else float(pulse.delta[-1])
    rows = []
    for n in cfg.staircase.lengths:
        if n < 1:
            raise ConfigError(f"staircase length {n} must be positive")
        terms = perfect_terms(cfg, model, build_bar(cfg.staircase.rows, n))
        psi = evolve(ground_config(terms.basis), terms, pulse).final
        _, cfgs, nex = classical_spectrum(terms, delta)
        p_n = excitation_distribution(psi)
        rows.append((n, mean_excitation(psi), int(nex[0]), _bitstring(cfgs[0], n), float(p_n.max())))
        log.info("N = %d: <N_e> = %.4f, classical %d", n, rows[-1][1], rows[-1][2])
    reports.write_csv(ctx.out / "staircase.csv",
                      ["n_units", "mean_n_exc", "classical_n_exc", "classical_config", "max_sector_probability"], rows)
    reports.write_json(ctx.out / "staircase.json", {"classical_delta_mhz": angular_to_mhz(delta)})
    if ctx.figures:
        from rydopt import plotting

        lengths, mean, classical = zip(*[(r[0], r[1], r[2]) for r in rows])
        plotting.staircase(lengths, mean, classical, ctx.figure("staircase"))


def cmd_simulate(ctx: Context, pulse_path) -> None:
    cfg = ctx.cfg
    pulse = _load_pulse(ctx, pulse_path)
    problem = build_problem(cfg)
    if problem.final_delta is None:
        problem.final_delta = float(pulse.delta[-1])
    objective = EnsembleObjective(problem, workers=ctx.workers)
    fids = objective.evaluate(pulse)
    terms = perfect_terms(cfg, problem.model, problem.geometry)
    target = resolve_target(problem.target, terms, problem.final_delta)
    metrics = _trajectory_reports(ctx, terms, pulse, target)
    row = reports.summary_table(fids.mean(), metrics["F_s"], metrics["P_d"], metrics["mean_n_exc"], pulse.duration)
    reports.write_summary(ctx.out, row, ctx.command)
    reports.write_json(ctx.out / "run.json", {"fom": 1.0 - float(fids.mean()), "realization_fidelities": fids})


COMMANDS = {
    "spectrum": "classical spectrum over a detuning sweep",
    "crystal": "optimize crystalline ground-state preparation",
    "staircase": "apply a fixed pulse to chains of several lengths",
    "ghz": "optimize GHZ preparation and run the detection protocol",
    "arbitrary": "optimize a symmetric superposition target",
    "simulate": "replay a pulse file and report observables",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydopt", description="Optimal control of Rydberg super-atom lattices")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--workers", type=int, default=1, help="parallel ensemble workers")
        p.add_argument("--seed-override", type=int, help="replace the ensemble and optimizer seeds")
        p.add_argument("--budget-override", type=int, help="replace optimizer.budget")
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        if name in ("staircase", "simulate"):
            p.add_argument("--pulse", required=True, help="pulse CSV (t_us, omega/2pi MHz, delta/2pi MHz)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg.ensemble.seed = args.seed_override
        cfg.optimizer.seed = args.seed_override
    if args.budget_override is not None:
        cfg.optimizer.budget = args.budget_override
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.output.dir = str(out)
    config_text = cfg.to_yaml()
    (out / "config.resolved.yaml").write_text(config_text)
    ctx = Context(args.command, cfg, out, max(1, args.workers), cfg.output.figures and not args.no_figures)
    handler = globals()[f"cmd_{args.command}"]
    if args.command in ("staircase", "simulate"):
        handler(ctx, args.pulse)
    else:
        handler(ctx)
    reports.write_manifest(out, args.command, config_text, _seeds(cfg), ctx.inputs, time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except RydoptError as exc:
        print(f"rydopt: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
