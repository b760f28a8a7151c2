"""Command-line harness: ``converge``, ``tau-scan``, ``kernels``, ``coeffs``, ``verify``.

All tables are CSV with a ``#`` preamble echoing the resolved configuration.
Values are resolved in the order built-in defaults < preset < config file <
flags. Exit codes: 0 success, 1 usage or parameter error, 2 verification
failure, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ParameterError, SplittingError
from .operators import POTENTIALS, Grid1D, State, sine_packet
from .splitting import TAU_OPT, coefficients, evolve

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DIVERGENCE = 0, 1, 2, 3

H_LADDER = (1 / 40, 1 / 80, 1 / 160, 1 / 320, 1 / 640)
SCAN_TAUS = tuple(round(0.05 * k, 2) for k in range(10))
SAMPLE_TAUS = (0.0, 0.05, TAU_OPT, 0.2, 0.3, 0.4)

PRESETS = {
    "paper": dict(n=10000, xmin=-40.0, xmax=40.0, t0=0.0, tend=1.0),
    "desk": dict(n=2048, xmin=-20.0, xmax=20.0, t0=0.0, tend=0.5, tau_list=(0.0, 0.1127, 0.3, 0.4)),
    # same dx as "desk" on a domain wide enough that the packet never reaches the boundary
    "desk-wide": dict(n=6144, xmin=-60.0, xmax=60.0, t0=0.0, tend=0.5, tau_list=(0.0, 0.1127, 0.3, 0.4)),
}


@dataclass
class RunConfig:
    command: str
    n: int = 10000
    xmin: float = -40.0
    xmax: float = 40.0
    t0: float = 0.0
    tend: float = 1.0
    h: float = 1 / 160
    h_list: tuple = H_LADDER
    tau: float | None = None
    tau_list: tuple = (TAU_OPT,)
    potential: str = "moving-quadratic"
    out: str | None = None
    samples: str | None = None
    h_ref: float = 1e-4
    jobs: int = 1
    preset: str | None = None
    fast: bool = False
    flip_sign: bool = False
    explicit: frozenset = field(default_factory=frozenset)

    def grid(self) -> Grid1D:
        return Grid1D(self.n, self.xmin, self.xmax)

    def taus(self, fallback=(TAU_OPT,)):
        if self.tau is not None:
            return (self.tau,)
        return tuple(self.tau_list) if self.tau_list else tuple(fallback)

    def echo(self):
        skip = {"command", "explicit", "out", "samples", "jobs"}
        for f in dataclasses.fields(self):
            if f.name not in skip:
                yield f.name, getattr(self, f.name)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"not a number: {text!r}") from exc


def _number_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(_number(t) for t in text.split(","))


_CONVERTERS = {
    "n": lambda s: int(_number(s)),
    "xmin": _number,
    "xmax": _number,
    "t0": _number,
    "tend": _number,
    "h": _number,
    "h_list": _number_list,
    "tau": _number,
    "tau_list": _number_list,
    "potential": str,
    "out": str,
    "samples": str,
    "h_ref": _number,
    "jobs": lambda s: int(_number(s)),
    "preset": str,
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes and underscores are interchangeable."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONVERTERS[key](value)
    return values


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=_CONVERTERS["n"])
    common.add_argument("--xmin", type=_number)
    common.add_argument("--xmax", type=_number)
    common.add_argument("--t0", type=_number)
    common.add_argument("--tend", type=_number)
    common.add_argument("--h", type=_number)
    common.add_argument("--h-list", dest="h_list", type=_number_list)
    common.add_argument("--tau", type=_number)
    common.add_argument("--tau-list", dest="tau_list", type=_number_list)
    common.add_argument("--potential", choices=sorted(POTENTIALS))
    common.add_argument("--out")
    common.add_argument("--samples", help="kernels: path for the sampled kernel curves")
    common.add_argument("--config")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--h-ref", dest="h_ref", type=_number)
    common.add_argument("--jobs", type=_CONVERTERS["jobs"])
    common.add_argument("--fast", action="store_true", default=None, help="verify: n = 16 dense grids")
    common.add_argument("--flip-sign", dest="flip_sign", action="store_true", default=None,
                        help="verify: expect the opposite commutator sign (negative control)")
    parser = _Parser(prog="compact-splitting", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("converge", "tau-scan", "kernels", "coeffs", "verify"):
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    flags = {k: v for k, v in args.items() if v is not None}
    from_file = read_config_file(config_path) if config_path else {}
    preset = flags.get("preset", from_file.get("preset"))
    merged = dict(PRESETS[preset]) if preset else {}
    merged.update(from_file)
    merged.update(flags)
    explicit = frozenset(from_file) | frozenset(flags)
    if preset is None:
        merged.pop("preset", None)
    cfg = RunConfig(command=command, explicit=explicit, **merged)
    validate(cfg)
    return cfg


def _check_tau(tau):
    if not (0.0 <= tau <= 0.49):
        raise ParameterError(f"tau must lie in [0, 0.49], got {tau}")


def validate(cfg: RunConfig) -> None:
    """Reject bad numbers before any work starts."""
    if cfg.command in ("converge", "tau-scan"):
        cfg.grid()
        if not cfg.tend > cfg.t0:
            raise ParameterError(f"need tend > t0, got t0={cfg.t0}, tend={cfg.tend}")
        if cfg.potential not in POTENTIALS:
            raise ParameterError(f"unknown potential {cfg.potential!r}")
        if cfg.jobs < 1:
            raise ParameterError("jobs must be >= 1")
        if not cfg.h_ref > 0:
            raise ParameterError("h_ref must be positive")
    if cfg.command == "converge":
        hs = cfg.h_list
        if not hs or any(not h > 0 for h in hs):
            raise ParameterError("h-list must contain positive step sizes")
        if list(hs) != sorted(hs, reverse=True):
            raise ParameterError("h-list must be sorted in descending order")
        if not cfg.h_ref < min(hs) / 10:
            raise ParameterError(f"h_ref={cfg.h_ref} must be below min(h-list)/10 = {min(hs) / 10}")
    if cfg.command == "tau-scan":
        if not cfg.h > 0:
            raise ParameterError("h must be positive")
        if not cfg.h_ref < cfg.h / 10:
            raise ParameterError(f"h_ref={cfg.h_ref} must be below h/10 = {cfg.h / 10}")
    if cfg.command in ("converge", "tau-scan", "kernels", "coeffs"):
        taus = cfg.taus()
        if cfg.command == "tau-scan" and "tau_list" not in cfg.explicit and cfg.tau is None:
            taus = SCAN_TAUS
        for tau in taus:
            _check_tau(tau)
    if cfg.command == "verify" and "n" in cfg.explicit and not 16 <= cfg.n <= 128:
        raise ParameterError(f"verify runs on dense grids: need 16 <= n <= 128, got {cfg.n}")


def _fmt(x) -> str:
    return repr(float(x))


def _preamble(cfg: RunConfig) -> list[str]:
    try:
        from importlib.metadata import version

        ver = version("artifact")
    except Exception:  # not installed: running from a source tree
        ver = "unknown"
    lines = [f"# compact-splitting {cfg.command} version={ver}"]
    for key, value in cfg.echo():
        if isinstance(value, tuple):
            value = ",".join(_fmt(v) for v in value)
        lines.append(f"# {key}={value}")
    return lines


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run_one(job):
    n, xmin, xmax, t0, tend, h, tau, potential = job
    grid = Grid1D(n, xmin, xmax)
    u0 = State(sine_packet(grid.points), grid)
    rep = evolve(u0, t0, tend, h, coefficients(tau), POTENTIALS[potential]())
    return rep.state.values, rep.steps, rep.wall_time


def _run_many(jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def _reference(cfg: RunConfig):
    job = (cfg.n, cfg.xmin, cfg.xmax, cfg.t0, cfg.tend, cfg.h_ref, TAU_OPT, cfg.potential)
    try:
        values, _, _ = _run_one(job)
    except DivergenceError as exc:
        raise DivergenceError(f"reference run (h_ref={cfg.h_ref}) diverged at step {exc.step}", exc.step) from exc
    return values


def convergence_rows(cfg: RunConfig, hs, taus):
    """(h, tau, error_l2, steps, runtime_s) for every pair, sorted by tau then decreasing h."""
    grid = cfg.grid()
    ref = _reference(cfg)
    pairs = sorted({(tau, h) for tau in taus for h in hs}, key=lambda p: (p[0], -p[1]))
    jobs = [(cfg.n, cfg.xmin, cfg.xmax, cfg.t0, cfg.tend, h, tau, cfg.potential) for tau, h in pairs]
    rows = []
    for (tau, h), (values, steps, runtime) in zip(pairs, _run_many(jobs, cfg.jobs)):
        rows.append((h, tau, grid.norm(values - ref), steps, runtime))
    return rows


def fitted_slopes(rows):
    from .checks import slope

    out = {}
    for tau in sorted({r[1] for r in rows}):
        sel = [r for r in rows if r[1] == tau]
        if len(sel) >= 2:
            out[tau] = slope([r[0] for r in sel], [r[2] for r in sel])
    return out


def cmd_converge(cfg: RunConfig) -> int:
    rows = convergence_rows(cfg, cfg.h_list, cfg.taus())
    buf = io.StringIO()
    buf.write("\n".join(_preamble(cfg)) + "\n")
    buf.write("h,tau,error_l2,steps,runtime_s\n")
    for h, tau, err, steps, runtime in rows:
        buf.write(f"{_fmt(h)},{_fmt(tau)},{_fmt(err)},{steps},{runtime:.6f}\n")
    for tau, s in fitted_slopes(rows).items():
        buf.write(f"# slope tau={_fmt(tau)} {s:.4f}\n")
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_tau_scan(cfg: RunConfig) -> int:
    taus = cfg.taus() if ("tau_list" in cfg.explicit or cfg.tau is not None) else SCAN_TAUS
    rows = convergence_rows(cfg, (cfg.h,), taus)
    buf = io.StringIO()
    buf.write("\n".join(_preamble(cfg)) + "\n")
    buf.write("tau,error_l2,steps,runtime_s\n")
    for h, tau, err, steps, runtime in rows:
        buf.write(f"{_fmt(tau)},{_fmt(err)},{steps},{runtime:.6f}\n")
    best = min(rows, key=lambda r: r[2])
    buf.write(f"# argmin tau={_fmt(best[1])} error_l2={_fmt(best[2])}\n")
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def kernel_summary():
    """(kernel, norm, tau_min) for every kernel under L1 and L2."""
    from .kernels import KernelId, optimal_tau

    return [(k.value, p, optimal_tau(k, p)) for k in KernelId for p in (1, 2)]


def cmd_kernels(cfg: RunConfig) -> int:
    from .kernels import KernelId, kernel

    taus = cfg.taus(SAMPLE_TAUS) if ("tau_list" in cfg.explicit or cfg.tau is not None) else SAMPLE_TAUS
    summary = io.StringIO()
    summary.write("\n".join(_preamble(cfg)) + "\n")
    summary.write("kernel,norm,tau_min\n")
    for name, p, t in kernel_summary():
        summary.write(f"{name},L{p},{_fmt(t)}\n")
    samples = io.StringIO()
    samples.write("kernel,tau,s,value\n")
    s = np.linspace(0.0, 1.0, 201)
    for kid in (KernelId.PEANO_1D, KernelId.SARD_30, KernelId.SARD_03, KernelId.SARD_DELTA_21):
        for tau in taus:
            for si, v in zip(s, kernel(kid, s, tau)):
                samples.write(f"{kid.value},{_fmt(tau)},{_fmt(si)},{_fmt(v)}\n")
    sample_path = cfg.samples
    if sample_path is None and cfg.out:
        out = Path(cfg.out)
        sample_path = str(out.with_name(out.stem + "_samples" + (out.suffix or ".csv")))
    if cfg.out:
        _emit(summary.getvalue(), cfg.out)
        _emit(samples.getvalue(), sample_path)
    else:
        _emit(summary.getvalue() + "\n" + samples.getvalue(), None)
        if sample_path:
            _emit(samples.getvalue(), sample_path)
    return EXIT_OK


COEFF_COLUMNS = ("tau", "p", "q", "r", "c_R1", "P_a", "P_b", "Q_a", "Q_b", "R_a", "R_b")


def coefficient_rows(taus):
    from .kernels import coefficient_set

    rows = []
    for tau in taus:
        c = coefficients(tau)
        cs = coefficient_set(tau)
        rows.append((tau, c.p, c.q, c.r, cs.c_R1, cs.P_a, cs.P_b, cs.Q_a, cs.Q_b, cs.R_a, cs.R_b))
    return rows


def cmd_coeffs(cfg: RunConfig) -> int:
    taus = cfg.taus() if ("tau_list" in cfg.explicit or cfg.tau is not None) else (TAU_OPT, 0.0)
    buf = io.StringIO()
    buf.write("\n".join(_preamble(cfg)) + "\n")
    buf.write(",".join(COEFF_COLUMNS) + "\n")
    for row in coefficient_rows(taus):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .checks import run_suite
    from .operators import COMMUTATOR_SIGN

    sign = -COMMUTATOR_SIGN if cfg.flip_sign else COMMUTATOR_SIGN
    n = cfg.n if "n" in cfg.explicit else None
    results = run_suite(sign=sign, fast=bool(cfg.fast), n=n)
    text = "\n".join(r.line() for r in results) + "\n"
    failed = [r.name for r in results if not r.passed]
    text += f"# {len(results) - len(failed)}/{len(results)} checks passed" + (
        f"; failed: {', '.join(failed)}\n" if failed else "\n"
    )
    _emit(text, cfg.out)
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "converge": cmd_converge,
    "tau-scan": cmd_tau_scan,
    "kernels": cmd_kernels,
    "coeffs": cmd_coeffs,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except DivergenceError as exc:
        print(f"error: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ParameterError, SplittingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
