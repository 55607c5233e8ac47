"""Command-line entry point.

Subcommands: ``solve-beta``, ``simulate``, ``estimate-ruin``, ``tail-fit``,
``verify``. Exit codes: 0 success, 1 configuration error, 2 model outside the
power-law regime, 3 insufficient data, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from .analytic import (
    check_positivity_identities,
    expected_discount_integral,
    mgf_f,
    solve_beta,
)
from .errors import (
    ConfigError,
    DegenerateRegimes,
    IdentityViolated,
    PreconditionViolated,
    TailEstimationError,
)
from .estimate import (
    default_u_grid,
    kesten_from_cycles,
    ruin_from_batches,
    tail_report,
)
from .model import canonicalize, validate_model
from .pathsim import quadrature_check, simulate_cycles, simulate_paths

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3, 4
MIN_TAIL_SAMPLES = 10_000


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(value) -> str:
    """Locale-independent rendering with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, run: "cfgmod.RunConfig", files: Sequence[Path],
                   started: float, extra: Optional[dict] = None) -> Path:
    """Record this command's inputs and output digests in ``out/manifest.json``."""
    path = out / "manifest.json"
    manifest = {"tool": "ruintail", "version": __version__, "runs": {}}
    if path.exists():
        try:
            old = json.loads(path.read_text())
            manifest["runs"] = old.get("runs", {})
        except json.JSONDecodeError:
            pass
    entry = {
        "command": command,
        "config": run.resolved,
        "seed": run.sim.seed,
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_s": round(time.time() - started, 3),
        "outputs": {f.name: _digest(f) for f in files},
    }
    if extra:
        entry.update(extra)
    manifest["runs"][command] = entry
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _load(args, command: str) -> "cfgmod.RunConfig":
    if args.config is None:
        raise _Exit(EXIT_CONFIG, "a --config file is required")
    overrides: dict = {"simulation": {}}
    if args.seed is not None:
        overrides["simulation"]["seed"] = args.seed
    if args.paths is not None:
        overrides["simulation"]["n_paths"] = args.paths
    if args.workers is not None:
        overrides["simulation"]["workers"] = args.workers
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    return cfgmod.load(Path(args.config), command, overrides)


def _out_dir(run: "cfgmod.RunConfig") -> Path:
    run.output_dir.mkdir(parents=True, exist_ok=True)
    return run.output_dir


def _canonical_beta(run: "cfgmod.RunConfig"):
    """Canonicalize and solve; maps applicability problems to exit code 2."""
    try:
        regimes, swapped = canonicalize(run.model.regimes)
        return regimes, swapped, solve_beta(regimes)
    except DegenerateRegimes as exc:
        raise _Exit(EXIT_PRECONDITION, f"{exc}. The two-regime analysis does not apply.")
    except PreconditionViolated as exc:
        raise _Exit(EXIT_PRECONDITION, f"{exc}. The power-law asymptotics need 0 < beta0 < beta1.")


# ---------------------------------------------------------------------------
# commands


def cmd_solve_beta(args) -> int:
    started = time.time()
    run = _load(args, "solve-beta")
    regimes, swapped, sol = _canonical_beta(run)
    try:
        check_positivity_identities(sol.beta, regimes)
        identities = "ok"
    except IdentityViolated as exc:
        identities = f"FAILED ({exc})"
    in_dom = mgf_f(regimes.beta1, regimes).in_domain

    print(f"beta0            {fmt(regimes.beta0)}")
    print(f"beta1            {fmt(regimes.beta1)}")
    print(f"beta             {fmt(sol.beta)}")
    print(f"residual |f-1|   {sol.residual_f:.3e}")
    print(f"residual |cubic| {sol.residual_cubic:.3e}")
    print(f"beta1 in dom f   {'yes' if in_dom else 'no'}")
    print(f"identities       {identities}")
    if swapped:
        print("note             regime labels were exchanged so that beta0 < beta1")

    out = _out_dir(run)
    path = out / "beta.csv"
    write_csv(path, ["beta0", "beta1", "beta", "residual_f", "residual_cubic"],
              [[regimes.beta0, regimes.beta1, sol.beta, sol.residual_f, sol.residual_cubic]])
    write_manifest(out, "solve-beta", run, [path], started)
    return EXIT_OK


def _simulate_all(run):
    return {i: simulate_paths(run.model.with_initial_regime(i), run.sim) for i in run.initial_regimes}


def cmd_simulate(args) -> int:
    started = time.time()
    run = _load(args, "simulate")
    batches = _simulate_all(run)
    out = _out_dir(run)
    path = out / "y_samples.csv"

    def rows():
        for i, b in batches.items():
            for pid in range(b.n_paths):
                yield [pid, i, b.y_inf[pid], b.y_sup[pid], b.n_cycles[pid], b.truncation_bound[pid]]

    write_csv(path, ["path_id", "initial_regime", "y_inf", "y_sup", "n_cycles_used", "truncation_bound"], rows())
    unconverged = sum(int(np.count_nonzero(~b.converged)) for b in batches.values())
    if unconverged:
        print(f"warning: {unconverged} path(s) hit n_cycles_max before the prefix product fell "
              f"below trunc_eps; see truncation_bound", file=sys.stderr)
    write_manifest(out, "simulate", run, [path], started)
    print(f"wrote {path} ({sum(b.n_paths for b in batches.values())} rows)")
    return EXIT_OK


def cmd_estimate_ruin(args) -> int:
    started = time.time()
    run = _load(args, "estimate-ruin")
    if run.u_grid is None:
        raise _Exit(EXIT_CONFIG, "[grids] u is required for estimate-ruin")
    u = sorted(run.u_grid)
    batches = {i: simulate_paths(run.model.with_initial_regime(i), run.sim) for i in (0, 1)}
    est = ruin_from_batches(batches, u)
    out = _out_dir(run)
    path = out / "ruin.csv"
    rows = []
    for i in run.initial_regimes:
        hi = est.sandwich_high(i)
        for j, uj in enumerate(est.u_grid):
            rows.append([uj, i, est.psi_hat[i][j], est.ci_lo[i][j], est.ci_hi[i][j],
                         est.sandwich_low(i)[j], hi[j], est.truncation_bias_bound[i][j]])
    write_csv(path, ["u", "initial_regime", "psi_hat", "ci_lo", "ci_hi", "sandwich_lo", "sandwich_hi",
                     "trunc_bias"], rows)
    write_manifest(out, "estimate-ruin", run, [path], started)
    print(f"{'u':>10} {'i':>2} {'psi_hat':>12} {'sandwich_lo':>12} {'sandwich_hi':>12}")
    for r in rows:
        print(f"{r[0]:>10.4g} {r[1]:>2d} {r[2]:>12.4e} {r[5]:>12.4e} {r[6]:>12.4e}")
    return EXIT_OK


def _read_samples(path: Path) -> tuple[np.ndarray, Optional[np.ndarray]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "y_inf" not in reader.fieldnames:
                raise _Exit(EXIT_CONFIG, f"{path}: expected a 'y_inf' column")
            ys, regs = [], []
            for row in reader:
                ys.append(float(row["y_inf"]))
                if "initial_regime" in row and row["initial_regime"] not in (None, ""):
                    regs.append(int(row["initial_regime"]))
    except OSError as exc:
        raise _Exit(EXIT_CONFIG, f"cannot read {path}: {exc}")
    except ValueError as exc:
        raise _Exit(EXIT_CONFIG, f"{path}: {exc}")
    return np.array(ys), (np.array(regs) if len(regs) == len(ys) else None)


def cmd_tail_fit(args) -> int:
    started = time.time()
    run = _load(args, "tail-fit") if args.config is not None else None
    if run is None and args.samples is None:
        raise _Exit(EXIT_CONFIG, "tail-fit needs --config, --samples, or both")

    beta = None
    if run is not None:
        _, _, sol = _canonical_beta(run)
        beta = sol.beta

    if args.samples is not None:
        y, regs = _read_samples(Path(args.samples))
        if regs is not None and run is not None:
            y = y[regs == run.initial_regimes[0]]
        elif regs is not None:
            y = y[regs == regs[0]]
    else:
        y = simulate_paths(run.model.with_initial_regime(run.initial_regimes[0]), run.sim).y_inf

    if y.size < MIN_TAIL_SAMPLES:
        raise _Exit(EXIT_DATA, f"InsufficientTailPoints: {y.size} samples, need at least {MIN_TAIL_SAMPLES}")
    per_decade = run.per_decade if run else 20
    u_min_q = run.u_min_quantile if run else 0.99
    hill_k = run.hill_k if run else None
    try:
        grid = default_u_grid(y, per_decade=per_decade)
        rep = tail_report(y, beta if beta is not None else 1.0, u_grid=grid, k=hill_k, u_min_quantile=u_min_q)
        if beta is None:
            rep = tail_report(y, rep.beta_hat_hill, u_grid=grid, k=hill_k, u_min_quantile=u_min_q)
    except TailEstimationError as exc:
        raise _Exit(EXIT_DATA, f"{type(exc).__name__}: {exc}")

    plateau_beta = beta if beta is not None else rep.beta_hat_hill
    out = Path(args.out) if args.out is not None else (run.output_dir if run else Path("ruintail-out"))
    out.mkdir(parents=True, exist_ok=True)
    path = out / "tail.csv"
    t = rep.tail
    write_csv(path, ["u", "g_bar", "ci", "u_beta_gbar"],
              ([u, g, w, u**plateau_beta * g] for u, g, w in zip(t.u_grid, t.g_bar, t.ci_half_width)))
    summary = {
        "n_samples": int(y.size),
        "beta_analytic": beta,
        "beta_hill": rep.beta_hat_hill,
        "hill_k": rep.k_used,
        "hill_sweep": rep.hill_sweep,
        "beta_ols": rep.beta_hat_ols,
        "ols_r2": rep.ols.r2,
        "ols_curved": rep.ols.curved,
        "plateau_level": rep.plateau.level,
        "plateau_spread": rep.plateau.spread,
        "plateau_stable": rep.plateau.stable,
        "c_minus": None if rep.negative_plateau is None else rep.negative_plateau.level,
    }
    summary_path = out / "tail_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if run is not None:
        write_manifest(out, "tail-fit", run, [path, summary_path], started,
                       {"samples": None if args.samples is None else str(args.samples)})

    print(f"samples          {y.size}")
    print(f"beta_analytic    {'n/a' if beta is None else fmt(beta)}")
    print(f"beta_hill        {rep.beta_hat_hill:.6f}  (k = {rep.k_used})")
    for label, val in rep.hill_sweep.items():
        print(f"  hill k={label:<6} {val:.6f}")
    print(f"beta_ols         {rep.beta_hat_ols:.6f}  (r2 = {rep.ols.r2:.5f})")
    print(f"plateau level    {rep.plateau.level:.6g}  (max/min = {rep.plateau.spread:.3f}, "
          f"{'stable' if rep.plateau.stable else 'UNSTABLE'})")
    print(f"C- (neg. tail)   {'not estimable' if rep.negative_plateau is None else f'{rep.negative_plateau.level:.6g}'}")
    return EXIT_OK


def run_verification(run: "cfgmod.RunConfig") -> list[tuple[str, bool, str]]:
    """Reduced-scale invariant suite; returns ``(item, passed, detail)`` rows."""
    items: list[tuple[str, bool, str]] = []
    regimes, swapped, sol = _canonical_beta(run)
    beta = sol.beta
    spec = run.model.with_initial_regime(run.initial_regimes[0])
    user_regimes = spec.regimes

    report = validate_model(spec, beta=beta)
    for it in report.items:
        items.append((f"assumption: {it.name}", it.status == "pass", it.detail))

    items.append(("solver residuals", sol.residual_f <= 1e-12 and sol.residual_cubic <= 1e-10,
                  f"|f-1| = {sol.residual_f:.2e}, |cubic| = {sol.residual_cubic:.2e}"))
    try:
        check_positivity_identities(beta, regimes)
        items.append(("positivity identities", True, ""))
    except IdentityViolated as exc:
        items.append(("positivity identities", False, str(exc)))

    n = run.n_cycles
    cycles = simulate_cycles(spec, run.sim, n, disc_q=beta)
    qs = run.q_grid if run.q_grid is not None else (regimes.beta0 / 2, regimes.beta0)
    for q in qs:
        exact = mgf_f(q, user_regimes)
        x = cycles.m**q
        mean, se = x.mean(), x.std(ddof=1) / math.sqrt(n)
        ok = exact.in_domain and abs(mean - exact.value) <= 4 * se
        items.append((f"E M^q vs f(q), q={q:.4g}", bool(ok), f"MC {mean:.6g} +- {se:.2g}, exact {float(exact):.6g}"))

    kr = kesten_from_cycles(cycles, beta)
    items.append(("E M^beta = 1", kr.m_beta_ok(), f"MC {kr.m_beta_mean:.6g} +- {kr.m_beta_se:.2g}"))

    exact_disc = expected_discount_integral(beta, user_regimes, spec.initial_regime)
    dmean, dse = cycles.disc.mean(), cycles.disc.std(ddof=1) / math.sqrt(n)
    items.append(("discount integral vs closed form", bool(exact_disc.in_domain and abs(dmean - exact_disc.value) <= 4 * dse),
                  f"MC {dmean:.6g} +- {dse:.2g}, exact {float(exact_disc):.6g}"))

    qc = quadrature_check(spec, run.sim, min(n, 10_000))
    items.append(("quadrature h-halving", qc.passed(),
                  f"rel delta {qc.rel_delta[0]:.2e} -> {qc.rel_delta[1]:.2e}, order {qc.order:.2f}"))

    u3 = run.u_grid[:3] if run.u_grid is not None else (10.0, 20.0, 50.0)
    batches = {i: simulate_paths(spec.with_initial_regime(i), run.sim) for i in (0, 1)}
    est = ruin_from_batches(batches, u3)
    for i in (0, 1):
        holds = est.sandwich_holds(i)
        items.append((f"ruin sandwich, initial regime {i}", bool(holds.all()),
                      ", ".join(f"u={u:g}: {p:.3g} in [{lo:.3g}, {hi:.3g}]" for u, p, lo, hi in
                                zip(est.u_grid, est.psi_hat[i], est.sandwich_low(i), est.sandwich_high(i)))))
    return items


def cmd_verify(args) -> int:
    started = time.time()
    run = _load(args, "verify")
    items = run_verification(run)
    out = _out_dir(run)
    path = out / "verify.csv"
    write_csv(path, ["item", "status", "detail"], ([name, "PASS" if ok else "FAIL", d] for name, ok, d in items))
    width = max(len(name) for name, _, _ in items)
    for name, ok, detail in items:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    write_manifest(out, "verify", run, [path], started)
    failed = sum(not ok for _, ok, _ in items)
    print(f"{len(items) - failed}/{len(items)} passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ruintail",
        description="Ruin-probability exponent and Monte Carlo verification for a reserve "
        "invested in a regime-switching asset.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML config file (or a manifest.json from a previous run)")
    common.add_argument("--seed", type=int, help="override [simulation] seed")
    common.add_argument("--paths", type=int, help="override [simulation] n_paths")
    common.add_argument("--workers", type=int, help="override [simulation] workers (processes)")
    common.add_argument("--out", help="override output_dir")

    commands = {
        "solve-beta": (cmd_solve_beta, "solve the characteristic equation for the exponent beta"),
        "simulate": (cmd_simulate, "simulate perpetuity paths and write y_samples.csv"),
        "estimate-ruin": (cmd_estimate_ruin, "estimate ruin probabilities with sandwich bounds (ruin.csv)"),
        "tail-fit": (cmd_tail_fit, "fit the tail of perpetuity samples (tail.csv)"),
        "verify": (cmd_verify, "run the reduced-scale verification suite (verify.csv)"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "tail-fit":
            p.add_argument("--samples", help="y_samples.csv (or any CSV with a y_inf column)")
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
