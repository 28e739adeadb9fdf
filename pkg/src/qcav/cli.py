"""Command-line entry point: ``qcav root | mu-curve | sigmax | qmap | validate``."""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import closed, fock, oracle, quasiprob, validation

MIN_CUTOFF = 8


def _fmt(x: float) -> str:
    return repr(float(x))


def _nonneg_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(val) or val < 0:
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text!r}")
    return val


def _pos_float(text: str) -> float:
    val = _nonneg_float(text)
    if val == 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text!r}")
    return val


def _cutoff(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < MIN_CUTOFF:
        raise argparse.ArgumentTypeError(f"must be >= {MIN_CUTOFF}, got {val}")
    return val


def _steps(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if val < 2:
        raise argparse.ArgumentTypeError(f"must be >= 2, got {val}")
    return val


def _alpha(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            val = complex(float(parts[0]), 0.0)
        elif len(parts) == 2:
            val = complex(float(parts[0]), float(parts[1]))
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <re>,<im>, got {text!r}") from None
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise argparse.ArgumentTypeError(f"non-finite amplitude {text!r}")
    return val


def _state(text: str) -> fock.StateSpec:
    try:
        return fock.StateSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _axis(text: str) -> quasiprob.Axis:
    try:
        return quasiprob.Axis.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def pgm_text(values: np.ndarray) -> str:
    """ASCII P2 image of ``values[i_re, j_im]``: columns follow re, top row is max im."""
    img = np.clip(np.asarray(values, dtype=float), 0.0, None).T[::-1]
    vmax = img.max() if img.size else 0.0
    if vmax > 0:
        pix = np.rint(255.0 * img / vmax).astype(int)
    else:
        pix = np.zeros(img.shape, dtype=int)
    height, width = pix.shape
    lines = ["P2", f"{width} {height}", "255"]
    lines += [" ".join(str(p) for p in row) for row in pix]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def cmd_root(args) -> int:
    eta = closed.critical_eta()
    print(f"eta_critical = {eta:.12f}")
    print(f"residual = {abs(closed.extinction_residual(eta)):.3e}")
    return 0


def cmd_mu_curve(args) -> int:
    rows = closed.mu_curve(args.eta, args.tau_max, args.steps)
    _emit(csv_text(("tau", "mu", "theta"), rows), args.out)
    return 0


def cmd_sigmax(args, parser) -> int:
    if args.method in ("lindblad", "all") and args.dt is None:
        parser.error(f"--dt is required for --method {args.method}")
    psi = fock.make_state(args.state, args.cutoff)
    results: dict[str, float] = {}
    methods = ("closed", "superop", "lindblad") if args.method == "all" else (args.method,)
    rho_j = oracle.joint_initial(psi, args.alpha) if set(methods) - {"closed"} else None
    # chi = 1: time in units of 1/chi, gamma = eta
    for m in methods:
        if m == "closed":
            rho_f = fock.displaced_density(psi, args.alpha)
            results[m] = closed.sigma_x_closed(rho_f, args.tau, args.eta)
        elif m == "superop":
            results[m] = oracle.sigma_x_expectation(oracle.superop_evolve(rho_j, 1.0, args.eta, args.tau))
        else:
            rho_t = oracle.integrate_rk4(rho_j, 1.0, args.eta, args.tau, args.dt)
            results[m] = oracle.sigma_x_expectation(rho_t)
    rows = [f"{m},{_fmt(v)}" for m, v in results.items()]
    if len(results) > 1:
        vals = list(results.values())
        dev = max(abs(a - b) for i, a in enumerate(vals) for b in vals[i + 1 :])
        rows.append(f"max_deviation,{_fmt(dev)}")
    sys.stdout.write("method,sigma_x\n" + "\n".join(rows) + "\n")
    return 0


def cmd_qmap(args) -> int:
    psi = fock.make_state(args.state, args.cutoff)
    im_axis = args.grid_im or args.grid
    pts = quasiprob.grid_points(args.grid, im_axis)
    eta = closed.critical_eta() if args.eta_override is None else args.eta_override
    tau = closed.MAGIC_TAU if args.tau_override is None else args.tau_override

    columns: list[np.ndarray] = []
    header = ["alpha_re", "alpha_im"]
    if args.method in ("reconstructed", "both"):
        rec = np.empty(pts.shape)
        for idx, a in np.ndenumerate(pts):
            rec[idx] = closed.reconstruct_q_point(psi, complex(a), eta=eta, tau=tau)
        header.append("q_reconstructed")
        columns.append(rec)
    if args.method in ("direct", "both"):
        direct = np.clip(quasiprob.q_direct(psi, pts), 0.0, None)
        header.append("q_direct")
        columns.append(direct)
    if args.method == "both":
        header.append("abs_error")
        columns.append(np.abs(columns[0] - columns[1]))

    flat = [pts.real.ravel(), pts.imag.ravel()] + [c.ravel() for c in columns]
    _emit(csv_text(header, zip(*flat)), args.out)
    if args.heatmap:
        write_atomic(args.heatmap, pgm_text(columns[0]))
    return 0


def cmd_validate(args) -> int:
    eta_max = max(validation.validation_etas())
    dt_max = oracle.rk4_dt_max(1.0, eta_max, args.cutoff)
    if args.dt > dt_max:
        print(f"error: --dt {args.dt:g} exceeds the RK4 stability guard {dt_max:.3g}", file=sys.stderr)
        return 2
    failed = 0
    for check in validation.run_all(args.cutoff, args.dt):
        print(check.line(), flush=True)
        failed += not check.passed
    print(f"{'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcav", description="Dispersive cavity QED and direct Q-function measurement.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("root", help="critical decay ratio eta* with mu(3pi/4) = 0")

    p = sub.add_parser("mu-curve", help="CSV of (tau, mu, theta)")
    p.add_argument("--eta", type=_nonneg_float, default=0.0)
    p.add_argument("--tau-max", type=_nonneg_float, default=3.0 * math.pi)
    p.add_argument("--steps", type=_steps, default=3001)
    p.add_argument("--out", help="output CSV path (default stdout)")

    p = sub.add_parser("sigmax", help="dipole signal by closed form and/or oracles")
    p.add_argument("--state", type=_state, default=fock.StateSpec("vacuum"))
    p.add_argument("--alpha", type=_alpha, default=0j)
    p.add_argument("--tau", type=_nonneg_float, required=True)
    p.add_argument("--eta", type=_nonneg_float, default=0.0)
    p.add_argument("--method", choices=("closed", "superop", "lindblad", "all"), default="closed")
    p.add_argument("--cutoff", type=_cutoff, default=fock.DEFAULT_CUTOFF)
    p.add_argument("--dt", type=_pos_float)

    p = sub.add_parser("qmap", help="Q function over a phase-space grid")
    p.add_argument("--state", type=_state, required=True)
    p.add_argument("--grid", type=_axis, required=True, help="<min>:<max>:<steps>, both axes")
    p.add_argument("--grid-im", type=_axis, help="separate imaginary-axis grid")
    p.add_argument("--cutoff", type=_cutoff, default=fock.DEFAULT_CUTOFF)
    p.add_argument("--method", choices=("reconstructed", "direct", "both"), default="both")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--heatmap", help="optional PGM of the first Q column")
    p.add_argument("--eta-override", type=_nonneg_float)
    p.add_argument("--tau-override", type=_nonneg_float)

    p = sub.add_parser("validate", help="run every cross-check")
    p.add_argument("--cutoff", type=_cutoff, default=fock.DEFAULT_CUTOFF)
    p.add_argument("--dt", type=_pos_float, default=validation.DEFAULT_DT)
    return parser


VALUE_FLAGS = ("--alpha", "--grid", "--grid-im", "--state")


def _glue_values(argv: Sequence[str]) -> list[str]:
    """Turn ``--grid -2:2:41`` into ``--grid=-2:2:41`` so argparse does not see a flag."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_values(sys.argv[1:] if argv is None else argv))
    try:
        if args.command == "root":
            return cmd_root(args)
        if args.command == "mu-curve":
            return cmd_mu_curve(args)
        if args.command == "sigmax":
            return cmd_sigmax(args, parser)
        if args.command == "qmap":
            return cmd_qmap(args)
        return cmd_validate(args)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    except (fock.CutoffError, oracle.StabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
