"""Command-line entry point.

Every subcommand accepts ``--config <ini>``, ``--seed`` and ``--out``.  A
config file holds one section per subcommand (``[simulate]``,
``[verify.dispersive]``, ``[illposed.sweep]``, ...) with keys named like the
long flags (dashes or underscores); flags given on the command line
override the file.  Each run writes CSV files and a JSON manifest naming the
config hash; the exit status is 0 exactly when every verdict passes.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .fieldio import write_manifest
from .reports import fmt, write_report, write_rows

log = logging.getLogger("nvlab")

USAGE_ERROR = 2


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Opt:
    """One numeric or textual option of a subcommand."""

    name: str
    type: Callable[[str], Any]
    default: Any
    help: str = ""

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


COMMON = [Opt("seed", int, 0, "random seed"), Opt("out", str, None, "output directory")]

COMMANDS: dict[str, list[Opt]] = {
    "simulate": [
        Opt("nx", int, 64, "grid points per direction"),
        Opt("box", float, 4.0, "box side in units of 2 pi"),
        Opt("dt", float, 1e-3, "time step"),
        Opt("t-end", float, 0.1, "final time"),
        Opt("equation", str, "NV", "NV or mNV"),
        Opt("integrator", str, "ETDRK4", "ETDRK4 or IFRK4"),
        Opt("amplitude", float, 0.1, "L2 norm of the random datum"),
        Opt("save-every", int, 10, "store every n-th step"),
    ],
    "picard": [
        Opt("nx", int, 32, "grid points per direction"),
        Opt("box", float, 4.0, "box side in units of 2 pi"),
        Opt("delta", float, 0.1, "time window"),
        Opt("eps", float, 1e-3, "L2 norm of the random datum"),
        Opt("n-iter", int, 6, "iterations"),
        Opt("n-samples", int, 201, "odd number of time samples"),
        Opt("equation", str, "NV", "NV or mNV"),
    ],
    "verify.dispersive": [
        Opt("k", int, 1, "shell index"),
        Opt("box", float, 256.0, "box side in units of 2 pi"),
        Opt("nx", int, 4096, "grid points per direction"),
        Opt("t-max", float, 64.0, "largest time (times are powers of 2 from 1)"),
        Opt("box-check", _flag, True, "repeat on a doubled box"),
    ],
    "verify.strichartz": [
        Opt("p", float, 5.0, "time exponent"),
        Opt("q", float, 5.0, "space exponent"),
        Opt("gamma", float, 0.0, "derivative index"),
        Opt("trials", int, 4, "random data"),
        Opt("t-max", float, 64.0, "time window"),
        Opt("n-times", int, 257, "time samples"),
        Opt("box", float, 512.0, "box side"),
        Opt("nx", int, 512, "grid points per direction"),
    ],
    "verify.ckz": [
        Opt("trials", int, 50, "random data"),
        Opt("box", float, 128.0, "box side"),
        Opt("nx", int, 256, "grid points per direction"),
        Opt("t-max", float, 4.0, "time window"),
        Opt("n-times", int, 65, "time samples"),
    ],
    "verify.bilinear": [
        Opt("k-f", _int_list, (3, 4, 5, 6, 7), "comma-separated sweep of k_f"),
        Opt("k-g", int, 1, "low frequency level"),
        Opt("l-cap", int, 3, "largest modulation level"),
        Opt("trials", int, 20, "trials per sweep point"),
        Opt("samples", int, 400, "Monte Carlo samples per trial"),
    ],
    "verify.trilinear": [
        Opt("variant", int, 2, "1 or 2"),
        Opt("k-g", _int_list, None, "comma-separated sweep of k_g"),
        Opt("k-f", int, None, "level of f and h"),
        Opt("l-cap", int, 2, "largest modulation level"),
        Opt("trials", int, 8, "trials per sweep point"),
        Opt("samples", int, 200, "Monte Carlo samples per trial"),
        Opt("third", int, 12, "lines through the third frequency"),
    ],
    "verify.xsb-bilinear": [
        Opt("s", float, 0.75, "Sobolev index"),
        Opt("eps", float, 0.1, "epsilon"),
        Opt("trials", int, 100, "random pairs"),
        Opt("band", int, 8, "base band radius"),
        Opt("contrast", _flag, False, "add the homogeneous counterexample contrast"),
    ],
    "verify.xsb-trilinear": [
        Opt("s", float, 1.25, "Sobolev index"),
        Opt("eps", float, 0.1, "epsilon"),
        Opt("trials", int, 100, "random triples"),
        Opt("band", int, 8, "base band radius"),
        Opt("l6", _flag, True, "include the L6 shell sweep"),
    ],
    "verify.measures": [
        Opt("k-f", int, 6, "high level"),
        Opt("k-g", int, 2, "low level"),
        Opt("l-f", int, 0, "modulation level of f"),
        Opt("l-g", int, 0, "modulation level of g"),
        Opt("trials", int, 16, "random outputs"),
        Opt("strata", int, 2 ** 16, "strata per volume"),
    ],
    "resonance.map": [
        Opt("xi", float, 16.0, "output frequency xi"),
        Opt("mu", float, 3.0, "output frequency mu"),
        Opt("n", int, 65, "map resolution per direction"),
        Opt("k-f", int, 5, "level for the derivative bounds"),
        Opt("samples", int, 10_000, "samples per derivative bound"),
    ],
    "illposed.sweep": [
        Opt("s", float, -1.5, "Sobolev index"),
        Opt("N", _float_list, (16, 32, 64, 128), "comma-separated geometric sweep"),
        Opt("t", float, 1.0, "time in (0, 1]"),
        Opt("nodes", int, 8, "Gauss-Legendre nodes per box dimension"),
    ],
    "scaling.check": [
        Opt("lambdas", _float_list, (2, 4), "comma-separated powers of 2"),
    ],
}


class UsageError(Exception):
    """Invalid command line or configuration."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvlab", description="Novikov-Veselov simulation and "
                                     "estimate-verification laboratory.")
    top = parser.add_subparsers(dest="command", metavar="command")
    groups: dict[str, argparse._SubParsersAction] = {}
    for key, opts in COMMANDS.items():
        head, _, tail = key.partition(".")
        if tail:
            if head not in groups:
                groups[head] = top.add_parser(head, help=f"{head} subcommands").add_subparsers(
                    dest="sub", metavar="name")
            p = groups[head].add_parser(tail, help=f"{head} {tail}")
        else:
            p = top.add_parser(head, help=head)
        p.set_defaults(key=key)
        p.add_argument("--config", type=str, default=None, help="INI file with per-command sections")
        for o in COMMON + opts:
            p.add_argument(f"--{o.name}", dest=o.dest, type=str, default=None,
                           help=f"{o.help} (default {o.default})")
    return parser


def resolve(key: str, args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config section for ``key`` and explicit flags."""
    opts = {o.dest: o for o in COMMON + COMMANDS[key]}
    values = {d: o.default for d, o in opts.items()}
    raw: dict[str, str] = {}
    if args.config:
        cp = configparser.ConfigParser()
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise UsageError(f"cannot parse config: {exc}") from exc
        if cp.sections() == [] and not cp.defaults():
            raise UsageError("config file is empty")
        for section in ("run", key):
            if cp.has_section(section):
                for k, v in cp.items(section):
                    d = k.replace("-", "_")
                    if d not in opts:
                        raise UsageError(f"unknown key {k!r} in section [{section}]")
                    raw[d] = v
    for d in opts:
        v = getattr(args, d, None)
        if v is not None:
            raw[d] = v
    for d, v in raw.items():
        try:
            values[d] = opts[d].type(v)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {d}: {v!r} ({exc})") from exc
    return values


# ---------------------------------------------------------------------------
# command implementations; each returns (verdict, files written)
# ---------------------------------------------------------------------------

def _grid(nx: int, box: float):
    from .spectral import GridSpec
    return GridSpec(nx, nx, 2 * np.pi * box, 2 * np.pi * box)


def _random_datum(grid, rng, norm: float, fraction: float):
    from .spectral import random_field
    phi = random_field(grid, rng, grid.band_mask(fraction), real=True)
    return phi * (norm / phi.l2_norm())


def cmd_simulate(cfg: dict, out: Path):
    from .timestepper import EvolutionConfig, dump_trajectory, evolve
    ecfg = EvolutionConfig(dt=cfg["dt"], t_end=cfg["t_end"], equation=cfg["equation"],
                           integrator=cfg["integrator"], save_every=cfg["save_every"])
    grid = _grid(cfg["nx"], cfg["box"])
    phi = _random_datum(grid, np.random.default_rng(cfg["seed"]), cfg["amplitude"],
                        ecfg.band_fraction())
    traj = evolve(phi, ecfg)
    mean0 = phi.mean()
    rows = [(t, F.l2_norm(), abs(F.mean() - mean0)) for t, F in traj]
    diag = write_rows(out / "diagnostics.csv", ["t", "l2_norm", "mean_drift"], rows)
    dump_trajectory(traj, out, cfg)
    drift = max(r[2] for r in rows)
    return bool(drift < 1e-10), [diag], {"max_mean_drift": drift}


def cmd_picard(cfg: dict, out: Path):
    from .timestepper import PicardConfig, picard_iterate
    pcfg = PicardConfig(delta=cfg["delta"], n_iter=cfg["n_iter"], n_samples=cfg["n_samples"],
                        equation=cfg["equation"])
    grid = _grid(cfg["nx"], cfg["box"])
    band = 2.0 / 3.0 if cfg["equation"] == "NV" else 0.5
    phi = _random_datum(grid, np.random.default_rng(cfg["seed"]), cfg["eps"], band)
    res = picard_iterate(phi, pcfg)
    ratios = res.ratios()
    rows = [(i + 1, d, ratios[i - 1] if 0 < i <= ratios.size else float("nan"))
            for i, d in enumerate(res.differences)]
    path = write_rows(out / "picard.csv", ["iteration", "difference", "ratio"], rows)
    return bool(res.contracted), [path], {"contracted": res.contracted}


def _verify(cfg: dict, out: Path, key: str):
    from . import estimates as E
    seed = cfg["seed"]
    if key == "verify.dispersive":
        n = int(np.floor(np.log2(cfg["t_max"]))) + 1
        rep = E.dispersive_decay_test(cfg["k"], tuple(2.0 ** np.arange(n)), cfg["box"], cfg["nx"],
                                      cfg["box_check"])
    elif key == "verify.strichartz":
        rep = E.strichartz_test(cfg["p"], cfg["q"], cfg["gamma"], cfg["trials"], t_max=cfg["t_max"],
                                n_times=cfg["n_times"], box=cfg["box"], nx=cfg["nx"], seed=seed)
    elif key == "verify.ckz":
        rep = E.ckz_l4_test(cfg["trials"], box=cfg["box"], nx=cfg["nx"], t_max=cfg["t_max"],
                            n_times=cfg["n_times"], seed=seed)
    elif key == "verify.bilinear":
        rep = E.bilinear_test(cfg["k_f"], cfg["k_g"], cfg["l_cap"], cfg["trials"], cfg["samples"], seed)
    elif key == "verify.trilinear":
        rep = E.trilinear_test(cfg["variant"], cfg["k_g"], cfg["k_f"], cfg["l_cap"], cfg["trials"],
                               cfg["samples"], cfg["third"], seed)
    elif key == "verify.xsb-bilinear":
        rep = E.xsb_bilinear_test(cfg["s"], cfg["eps"], cfg["trials"], cfg["band"], seed,
                                  contrast=cfg["contrast"])
    elif key == "verify.xsb-trilinear":
        rep = E.xsb_trilinear_test(cfg["s"], cfg["eps"], cfg["trials"], cfg["band"], seed,
                                   l6=cfg["l6"])
    elif key == "verify.measures":
        rep = E.measure_bound_check(cfg["k_f"], cfg["k_g"], cfg["l_f"], cfg["l_g"], cfg["trials"],
                                    cfg["strata"], seed)
    else:
        raise UsageError(f"unknown check {key}")
    write_report(rep, out, cfg)
    return rep.verdict, [], rep.summary


def cmd_resonance_map(cfg: dict, out: Path):
    from .resonance import resonance, resonance_grad, sample_regime
    xi, mu, n = cfg["xi"], cfg["mu"], cfg["n"]
    r = np.hypot(xi, mu)
    g = np.linspace(-r, r, n)
    X1, Y1 = np.meshgrid(g, g, indexing="ij")
    R = resonance(xi, X1, mu, Y1)
    dx, dy = resonance_grad(xi, X1, mu, Y1)
    rows = zip(X1.ravel(), Y1.ravel(), R.ravel(), dx.ravel(), dy.ravel())
    path = write_rows(out / "resonance_map.csv", ["xi1", "mu1", "R", "dR_dxi1", "dR_dmu1"], rows)
    rng = np.random.default_rng(cfg["seed"])
    k = cfg["k_f"]
    mins = {}
    for regime in ("xi-dominant", "mu-dominant", "comparable"):
        a = sample_regime(rng, cfg["samples"], k, regime=regime)
        d_xi, d_mu = resonance_grad(*a)
        d = d_mu if regime == "comparable" else d_xi
        mins[regime] = float(np.min(np.abs(d)) / 4.0 ** k)
    rows = [(k_, v) for k_, v in mins.items()]
    bounds = write_rows(out / "derivative_bounds.csv", ["regime", "min_ratio"], rows)
    return bool(min(mins.values()) >= 0.1), [path, bounds], mins


def cmd_illposed(cfg: dict, out: Path):
    from .illposed import illposed_sweep
    rep = illposed_sweep(cfg["s"], cfg["N"], cfg["t"], cfg["nodes"])
    rows = [(a.N, a.I, a.II, a.III, b.I, b.II, b.III, res["max_over_min"])
            for a, b, res in zip(rep.rows, rep.envelope_rows, rep.resonance)]
    path = write_rows(out / "illposed.csv", ["N", "I", "II", "III", "I_envelope", "II_envelope",
                                             "III_envelope", "R_max_over_min"], rows)
    summary = {**{f"slope_{k}": v for k, v in rep.slopes.items()},
               **{f"envelope_slope_{k}": v for k, v in rep.envelope_slopes.items()},
               **{f"expected_{k}": v for k, v in rep.expected.items()}}
    spath = write_rows(out / "illposed_summary.csv", ["key", "value"], sorted(summary.items()))
    return rep.verdict, [path, spath], summary


def cmd_scaling(cfg: dict, out: Path):
    from .illposed import scaling_check
    res = scaling_check(cfg["lambdas"], seed=cfg["seed"])
    rows = zip(res["lambda"], res["nv_change"], res["mnv_change"])
    path = write_rows(out / "scaling.csv", ["lambda", "nv_rel_change", "mnv_rel_change"], rows)
    return res["verdict"], [path], {"verdict": res["verdict"]}


def dispatch(key: str, cfg: dict, out: Path):
    if key == "simulate":
        return cmd_simulate(cfg, out)
    if key == "picard":
        return cmd_picard(cfg, out)
    if key.startswith("verify."):
        return _verify(cfg, out, key)
    if key == "resonance.map":
        return cmd_resonance_map(cfg, out)
    if key == "illposed.sweep":
        return cmd_illposed(cfg, out)
    if key == "scaling.check":
        return cmd_scaling(cfg, out)
    raise UsageError(f"unknown command {key}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    key = getattr(args, "key", None)
    if key is None:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        cfg = resolve(key, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nvlab: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    out = Path(cfg["out"] or Path("nvlab_out") / key.replace(".", "-"))
    out.mkdir(parents=True, exist_ok=True)
    # the output location is not part of the recorded configuration, so reruns into
    # different directories produce identical files
    cfg = {"command": key, **{k: v for k, v in cfg.items() if k != "out"}}
    try:
        verdict, files, summary = dispatch(key, cfg, out)
    except ValueError as exc:
        print(f"nvlab: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if files:
        write_manifest(out, files, cfg, extra={"verdict": verdict})
    for k in sorted(summary):
        log.info("%s = %s", k, fmt(summary[k]))
    log.info("verdict: %s (outputs in %s)", "PASS" if verdict else "FAIL", out)
    return 0 if verdict else 1


if __name__ == "__main__":
    sys.exit(main())
