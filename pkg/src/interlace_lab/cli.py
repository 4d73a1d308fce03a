"""Command-line entry point ``interlace-lab``.

Grammar::

    interlace-lab <sample|evolve|verify|pde> <target> [flags]

Settings are resolved in this order (later wins): built-in defaults, the
flat ``key=value`` file given by ``--config``, then command-line flags.  The
seed falls back to the environment variable ``INTERLACE_LAB_SEED`` and then
to 0 when neither the file nor a flag sets it.

Exit codes: 0 success, 1 usage or configuration error, 2 a verification row
failed, 3 numeric failure (mass defect, step-halving exhaustion, eigenvalue
collision).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import core, links, matrix, multilevel, pde, rmt, sde, verify
from .core import HPParams

SAMPLE_TARGETS = ("hp", "cue", "gue", "link", "gt", "omega")
EVOLVE_TARGETS = ("hp", "dbm", "ou", "circle", "matrix", "multilevel", "pushblock")
PDE_TARGETS = ("density", "siegmund", "eq26", "block-kernel", "h-transform")
COMMANDS = {"sample": SAMPLE_TARGETS, "evolve": EVOLVE_TARGETS, "verify": verify.SUITE_NAMES, "pde": PDE_TARGETS}

ENV_SEED = "INTERLACE_LAB_SEED"

# key -> (type, default); these are the keys accepted in a config file
RUN_KEYS = {
    "seed": (int, None),
    "s_re": (float, 0.0),
    "s_im": (float, 0.0),
    "N": (int, 2),
    "c": (float, 0.5),
    "u": (float, -1.5),
    "u2": (float, -1.5),
    "v": (float, 0.5),
    "v2": (float, 0.5),
    "dt_base": (float, 1e-3),
    "T": (float, 0.25),
    "samples": (int, 1000),
    "h": (float, 0.01),
    "A": (float, 8.0),
    "out": (str, None),
    "format": (str, None),
    "method": (str, None),
    "workers": (int, None),
    "x": (str, None),
    "record_dt": (float, None),
    "variance": (float, 1.0),
    "gamma1": (float, 0.0),
    "gamma2": (float, 1.0),
    "alpha_plus": (str, ""),
    "alpha_minus": (str, ""),
    "dual": (bool, False),
    "circle_mode": (str, "direct"),
    "x0": (int, 10),
}
_POSITIVE = {"N", "dt_base", "T", "samples", "h", "A", "workers", "record_dt", "variance"}


class UsageError(Exception):
    """Bad command line or configuration (exit code 1)."""


@dataclass
class RunConfig:
    command: str
    subcommand: str
    seed: int
    values: dict
    suite_overrides: dict = field(default_factory=dict)

    def __getattr__(self, key):
        values = self.__dict__.get("values", {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    @property
    def params(self) -> HPParams:
        return HPParams(self.s_re, self.s_im, self.N)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="interlace-lab", description="Hua-Pickrell diffusions, interlacing links and their checks.")
    ap.add_argument("command", choices=tuple(COMMANDS), help="sample, evolve, verify or pde")
    ap.add_argument("target", help="what to sample, evolve, verify or solve")
    ap.add_argument("--config", help="flat key=value file; flags override it")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--s-re", dest="s_re", type=float)
    ap.add_argument("--s-im", dest="s_im", type=float)
    ap.add_argument("--n", "--N", dest="N", type=int, help="number of particles / top level")
    ap.add_argument("--c", type=float, help="OU rate")
    ap.add_argument("--u", type=float)
    ap.add_argument("--u2", "--u-prime", dest="u2", type=float)
    ap.add_argument("--v", type=float)
    ap.add_argument("--v2", "--v-prime", dest="v2", type=float)
    ap.add_argument("--dt-base", dest="dt_base", type=float)
    ap.add_argument("--T", "--t", dest="T", type=float, help="time horizon")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--h", type=float, help="PDE grid step in arsinh coordinates")
    ap.add_argument("--A", type=float, help="PDE half-width in arsinh coordinates")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--method", help="sampler method, e.g. cue-cayley or mh")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--x", help="comma-separated starting point or source configuration")
    ap.add_argument("--record-dt", dest="record_dt", type=float)
    ap.add_argument("--variance", type=float, help="GUE variance")
    ap.add_argument("--gamma1", type=float)
    ap.add_argument("--gamma2", type=float)
    ap.add_argument("--alpha-plus", dest="alpha_plus")
    ap.add_argument("--alpha-minus", dest="alpha_minus")
    ap.add_argument("--dual", action="store_const", const=True, default=None)
    ap.add_argument("--circle-mode", dest="circle_mode", choices=("direct", "pushforward"))
    ap.add_argument("--x0", type=int, help="push-block starting site")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="suite setting for verify (repeatable)")
    return ap


def read_config_file(path) -> dict:
    """Parse a flat ``key=value`` file; '#' starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected key=value")
            out[key.strip()] = value.strip()
    return out


def _convert(key, value):
    typ = RUN_KEYS[key][0]
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        low = str(value).lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{key}: expected a boolean")
    try:
        if typ is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return typ(value)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot parse {value!r}") from None


_NUMERIC_VALUE = re.compile(r"^-[0-9.]")


def _glue_negative_values(argv):
    """Turn ``--x -1,0,2`` into ``--x=-1,0,2``; argparse would read -1,0,2 as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NUMERIC_VALUE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def resolve(argv) -> RunConfig:
    """Parse argv and merge defaults, config file and flags."""
    ap = build_parser()
    ns = ap.parse_args(_glue_negative_values(list(argv)))
    if ns.target not in COMMANDS[ns.command]:
        raise UsageError(f"unknown target {ns.target!r} for {ns.command}; "
                         f"expected one of {', '.join(COMMANDS[ns.command])}")
    values = {k: d for k, (_, d) in RUN_KEYS.items()}
    suite_over = {}
    if ns.config:
        for k, v in read_config_file(ns.config).items():
            key = "N" if k == "n" else k
            if key in RUN_KEYS:
                values[key] = _convert(key, v)
            elif ns.command == "verify":
                suite_over[k] = v
            else:
                raise UsageError(f"unknown config key {k!r}")
    for key in RUN_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = _convert(key, v)
    for item in ns.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        if ns.command != "verify":
            raise UsageError("--set applies to verify only")
        suite_over[k.strip()] = v.strip()
    for key in _POSITIVE:
        if values[key] is not None and not values[key] > 0:
            raise UsageError(f"{key} must be positive")
    seed = values.pop("seed")
    if seed is None:
        env = os.environ.get(ENV_SEED)
        try:
            seed = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"{ENV_SEED} must be an integer") from None
    if seed < 0:
        raise UsageError("seed must be nonnegative")
    return RunConfig(ns.command, ns.target, seed, values, suite_over)


# ---------------------------------------------------------------- output helpers

def _open_out(cfg: RunConfig):
    if cfg.out in (None, "-"):
        return io.StringIO(), True
    return open(cfg.out, "w", newline=""), False


def _finish(fh, to_stdout):
    if to_stdout:
        sys.stdout.write(fh.getvalue())
    else:
        fh.close()


def write_table(cfg: RunConfig, header, rows):
    fh, std = _open_out(cfg)
    if (cfg.format or "csv") == "json":
        json.dump([dict(zip(header, r)) for r in rows], fh, indent=1)
        fh.write("\n")
    else:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _finish(fh, std)


def _sample_rows(x):
    x = np.atleast_2d(x)
    header = ["idx"] + [f"x{i + 1}" for i in range(x.shape[1])]
    return header, [[k] + [float(v) for v in row] for k, row in enumerate(x)]


def _path_rows(times, states):
    header = ["t"] + [f"x{i + 1}" for i in range(states.shape[-1])]
    return header, [[float(t)] + [float(v) for v in s] for t, s in zip(times, states)]


def _pattern_rows(times, levels_per_time):
    rows = []
    for t, levels in zip(times, levels_per_time):
        for n, lev in enumerate(levels, start=1):
            for i, v in enumerate(np.asarray(lev).reshape(-1)):
                rows.append([float(t), n, i + 1, v.item() if hasattr(v, "item") else v])
    return ["t", "level", "index", "value"], rows


def _floats(text):
    if text is None or str(text).strip() == "":
        return []
    return [float(v) for v in str(text).split(",")]


def _point(cfg, n=None):
    x = _floats(cfg.x)
    if not x:
        return None
    if n is not None and len(x) != n:
        raise UsageError(f"--x needs {n} values, got {len(x)}")
    return np.sort(np.array(x))


def _record_times(cfg):
    step = cfg.record_dt or cfg.T / 100.0
    return np.arange(step, cfg.T, step)


# ---------------------------------------------------------------- commands

def cmd_sample(cfg: RunConfig, rng):
    t, n, size = cfg.subcommand, cfg.N, cfg.samples
    if t == "hp":
        p = cfg.params
        method = cfg.method or ("cue-cayley" if p.s_re == 0 and p.s_im == 0 else "mh")
        x = links.hp_sample(p, method, rng, size)
    elif t == "cue":
        x = links.cue_sample(n, rng, size)
    elif t == "gue":
        x = rmt.eval_(rmt.gue_sample(n, cfg.variance, rng, size))
    elif t == "link":
        src = _point(cfg)
        if src is None:
            raise UsageError("sample link needs --x with the N+1 source points")
        x = links.link_sample(np.broadcast_to(src, (size, src.size)).copy(), rng)
    elif t == "omega":
        ap = sorted(_floats(cfg.alpha_plus), reverse=True)
        am = sorted(_floats(cfg.alpha_minus), reverse=True)
        omega = core.OmegaPoint.from_gamma2(ap, am, cfg.gamma1, cfg.gamma2)
        x = links.boundary_link_sample(omega, n, rng, size)
    else:  # gt: the t column carries the draw index
        bottom = _point(cfg)
        if bottom is None:
            bottom = links.hp_sample(HPParams(0.0, 0.0, n), "cue-cayley", rng)
        levels = links.gt_uniform_sample(np.broadcast_to(bottom, (size, bottom.size)).copy(), rng)
        per = [[lev[k] for lev in levels] for k in range(size)]
        write_table(cfg, *_pattern_rows(range(size), per))
        return 0
    write_table(cfg, *_sample_rows(x))
    return 0


def cmd_evolve(cfg: RunConfig, rng):
    t, n, T = cfg.subcommand, cfg.N, cfg.T
    rec = _record_times(cfg)
    p = cfg.params
    if t in ("hp", "dbm", "ou", "circle"):
        x0 = _point(cfg, n)
        if x0 is None:
            if t == "hp":
                x0 = links.hp_sample(HPParams(0.0, 0.0, n), "cue-cayley", rng) if p.s_re == 0 and p.s_im == 0 \
                    else links.hp_sample(p, "mh", rng)
            elif t == "circle":
                x0 = links.cue_sample(n, rng)
            else:
                x0 = np.zeros(n)
        spec = sde.SDESystemSpec(t, p, c=cfg.c if t == "ou" else 0.0, dt_base=cfg.dt_base,
                                 circle_mode=cfg.circle_mode)
        if n > 1 and np.any(np.diff(x0) <= 0):
            path = sde.hp_start_degenerate(spec, x0, T, rng, record_times=rec)
        else:
            path = sde.simulate(spec, x0, T, rng, record_times=rec)
        write_table(cfg, *_path_rows(path.times, path.states[:, 0]))
    elif t == "matrix":
        x0 = _point(cfg, n)
        if x0 is None:
            X0 = matrix.matrix_hp_sample(p, rng, method="cayley" if p.s_re == 0 and p.s_im == 0 else "mh")
        else:
            U = rmt.haar_unitary(n, rng)
            X0 = rmt.hermitize((U * x0[None, :]) @ np.conj(U.T))
        path = matrix.matrix_simulate(matrix.MatrixSDESpec(n, p, dt_base=cfg.dt_base), X0, T, rng, rec)
        write_table(cfg, *_path_rows(path.times, path.eigenvalues[:, 0]))
    elif t == "multilevel":
        bottom = _point(cfg, n)
        if bottom is None:
            pat = multilevel.gibbs_sample(multilevel.hp_bottom_sampler(p), rng)
        else:
            pat = links.gt_uniform_sample(bottom, rng)
        path = multilevel.reflected_simulate(multilevel.ReflectedSpec(p, dt_base=cfg.dt_base), pat, T, rng, rec)
        levels = [[lev[k, 0] for lev in path.levels] for k in range(path.times.size)]
        write_table(cfg, *_pattern_rows(path.times, levels))
    else:  # pushblock
        params = multilevel.PushBlockParams(cfg.u, cfg.u2, cfg.v, cfg.v2, N=n)
        pattern = [np.array([cfg.x0 + 2 * i - k for i in range(1, k + 1)]) for k in range(1, n + 1)]
        path = multilevel.pushblock_simulate(params, pattern, T, rng, rec)
        write_table(cfg, *_pattern_rows(path.times, [path.levels_at(k) for k in range(path.times.size)]))
    return 0


PDE_THRESHOLDS = {"siegmund": 1e-3, "eq26": 5e-3, "block-kernel": 1e-2, "h-transform": 1e-3}


def cmd_pde(cfg: RunConfig, rng):
    gc = pde.GridConfig(A=cfg.A, h=cfg.h)
    t, p = cfg.T, cfg.params
    if cfg.subcommand == "density":
        grid = pde.solve_density(cfg.N, p, cfg.dual, t, gc)
        stride = max(1, int(round(0.05 / cfg.h)))
        idx = np.arange(0, grid.x_grid.size, stride)
        rows = [[float(grid.x_grid[i]), float(grid.x_grid[j]), float(grid.values[i, j])] for i in idx for j in idx]
        write_table(cfg, ["x", "y", "value"], rows)
        return 0
    if cfg.subcommand == "siegmund":
        res = pde.check_siegmund_pde(cfg.N, p, t, gc)
    elif cfg.subcommand == "eq26":
        res = pde.check_intermediate_intertwining(t, p, gc)
    elif cfg.subcommand == "block-kernel":
        res = pde.check_block_kernel(t, p, gc)
    else:
        res = pde.check_h_transform(t, 1, p, gc)
    row = verify.make_report(f"pde-{cfg.subcommand}", res.gap, PDE_THRESHOLDS[cfg.subcommand], 1, cfg.seed,
                             res.details)
    _write_reports(cfg, [row])
    return 0 if row.passed else 2


def _write_reports(cfg, reports):
    fh, std = _open_out(cfg)
    fh.write(verify.reports_to_json(reports) + "\n")
    _finish(fh, std)


def cmd_verify(cfg: RunConfig, rng):
    over = dict(cfg.suite_overrides)
    over.setdefault("seed", cfg.seed)
    over.setdefault("workers", cfg.workers or verify.default_workers())
    try:
        reports = verify.suite(cfg.subcommand, over)
    except ValueError as exc:
        if isinstance(exc, pde.GridError):
            raise
        raise UsageError(str(exc)) from None
    _write_reports(cfg, reports)
    for r in reports:
        print(f"{r.name}: {r.status} ({r.statistic:.4g} <= {r.threshold:.4g})", file=sys.stderr)
    return 0 if verify.all_passed(reports) else 2


def run(argv=None) -> int:
    """Execute one command; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = resolve(argv)
        if cfg.format == "csv" and cfg.command in ("verify",):
            raise UsageError("verify writes JSON reports only")
        rng = verify.seed_split(cfg.seed, 0)
        handler = {"sample": cmd_sample, "evolve": cmd_evolve, "verify": cmd_verify, "pde": cmd_pde}[cfg.command]
        return handler(cfg, rng)
    except UsageError as exc:
        print(f"interlace-lab: error: {exc}", file=sys.stderr)
        print(build_parser().format_usage(), file=sys.stderr, end="")
        return 1
    except (pde.GridError, sde.StepHalvingExhausted) as exc:
        print(f"interlace-lab: numeric failure: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"interlace-lab: numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"interlace-lab: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


__all__ = ["run", "main", "resolve", "RunConfig", "read_config_file", "build_parser", "UsageError"]


if __name__ == "__main__":
    main()
