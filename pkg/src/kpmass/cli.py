"""Config-driven command line runner.

Configuration files are flat ``section.key = value`` text; ``#`` starts a
comment.  Lists are comma separated.  Every output file embeds a hash of the
fully resolved configuration: CSV files in their first line, binary grids in
their file name.

Binary grids (``.kpgrid``) are little-endian: the magic ``KPGRID1\\0``, a u32
rank, per dimension a u64 count and f64 min and max, the f64 values in
row-major order and a final f64 error estimate.  Dimensions are listed in
array axis order, so a 2D field of shape ``(ny, nx)`` lists y first.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import math
import os
import pathlib
import struct
import sys

import numpy as np

from .errors import ConvergenceError, DomainError, KPMassError

__all__ = ["ConfigError", "NumericalFailure", "SCHEMA", "parse_config", "load_config",
           "dump_config", "config_hash", "write_kpgrid", "read_kpgrid", "main"]

MAGIC = b"KPGRID1\0"


class ConfigError(KPMassError, ValueError):
    """A configuration value violates the schema."""


class NumericalFailure(KPMassError, RuntimeError):
    """A numerical routine failed; the message names module, operation and inputs."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _floats(v):
    return [float(x) for x in v]


# key -> (kind, default); kinds: float, int, str, floats (list), strs (list)
SCHEMA = {
    "equation.alpha": ("float", 2.0),
    "equation.epsilon": ("int", 1),
    "equation.family": ("str", "KP"),
    "equation.transverse_dim": ("int", 1),
    "equation.weight_order": ("float", 0.0),
    "grid.x_min": ("float", -40.0),
    "grid.x_max": ("float", 40.0),
    "grid.nx": ("int", 256),
    "grid.y_min": ("float", -40.0),
    "grid.y_max": ("float", 40.0),
    "grid.ny": ("int", 256),
    "grid.z_min": ("float", 0.0),
    "grid.z_max": ("float", 0.0),
    "grid.nz": ("int", 1),
    "datum.kind": ("str", "gaussian"),
    "datum.amplitude": ("float", 1.0),
    "datum.wx": ("float", 1.0),
    "datum.wy": ("float", 1.0),
    "datum.x0": ("float", 0.0),
    "datum.y0": ("float", 0.0),
    "times.values": ("floats", [1.0]),
    "times.T": ("float", 0.25),
    "times.n_times": ("int", 16),
    "tolerances.rel_tol": ("float", 1e-10),
    "tolerances.abs_tol": ("float", 1e-13),
    "tolerances.picard_tol": ("float", 1e-8),
    "outputs.directory": ("str", ""),
    "outputs.formats": ("strs", ["csv", "kpgrid"]),
    "point.t": ("float", 1.0),
    "point.x": ("float", 0.0),
    "point.y": ("float", 0.0),
    "point.z": ("float", 0.0),
    "kernel.which": ("str", "both"),
    "linear.method": ("str", "fresnel"),
    "calibrate.samples": ("int", 200),
    "calibrate.lam_min": ("float", -8.0),
    "calibrate.lam_max": ("float", 4.0),
    "mass.t": ("float", 1.0),
    "mass.x_max": ("float", 4096.0),
    "mass.X_values": ("floats", [4.0 * 2 ** k for k in range(11)]),
    "mass.y_slices": ("floats", [0.0]),
    "mass.threshold": ("float", 1e-2),
    "bbm.k": ("float", 1.75),
    "verify.criteria": ("strs", ["all"]),
    "verify.subset": ("int", 3),
    "verify.seed": ("int", 0),
}


def _convert(key, kind, raw):
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "int":
            f = float(raw)
            if f != int(f):
                raise ValueError
            return int(f)
        if kind == "str":
            return str(raw).strip()
        items = [s.strip() for s in str(raw).split(",") if s.strip()] if isinstance(raw, str) else list(raw)
        if kind == "floats":
            return _floats(items)
        return [str(s) for s in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None


def parse_config(text: str) -> dict:
    """Parse config text into a dict with every schema key resolved."""
    cfg = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in SCHEMA.items()}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'section.key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown field (line {n})")
        cfg[key] = _convert(key, SCHEMA[key][0], raw)
    _validate(cfg)
    return cfg


def load_config(path) -> dict:
    if path is None:
        return parse_config("")
    return parse_config(pathlib.Path(path).read_text(encoding="utf-8"))


def _repr(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_repr(x) for x in v)
    return str(v)


def dump_config(cfg: dict) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    return "".join(f"{k} = {_repr(cfg[k])}\n" for k in sorted(cfg))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:16]


def _validate(cfg):
    for key in ("tolerances.rel_tol", "tolerances.abs_tol", "tolerances.picard_tol"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key}: must be positive (got {cfg[key]})")
    for key in ("grid.nx", "grid.ny", "grid.nz"):
        if cfg[key] < 1:
            raise ConfigError(f"{key}: must be at least 1")
    for v in cfg["times.values"]:
        if not v > 0:
            raise ConfigError(f"times.values: times must be positive (got {v})")
    if cfg["times.n_times"] < 1:
        raise ConfigError("times.n_times: must be at least 1")
    for f in cfg["outputs.formats"]:
        if f not in ("csv", "kpgrid"):
            raise ConfigError(f"outputs.formats: unknown format {f!r}")
    if cfg["kernel.which"] not in ("G", "A", "both"):
        raise ConfigError("kernel.which: must be G, A or both")


def _spec(cfg):
    from .kernels import DispersionSpec
    try:
        return DispersionSpec(cfg["equation.alpha"], cfg["equation.epsilon"], cfg["equation.family"],
                              cfg["equation.transverse_dim"], cfg["equation.weight_order"])
    except DomainError as e:
        raise ConfigError(f"equation: {e}") from None


def _grid(cfg):
    from .kernels import Grid
    try:
        return Grid(cfg["grid.x_min"], cfg["grid.x_max"], cfg["grid.nx"],
                    cfg["grid.y_min"], cfg["grid.y_max"], cfg["grid.ny"])
    except DomainError as e:
        raise ConfigError(f"grid: {e}") from None


def _datum(cfg):
    from .evolve import InitialDatum
    try:
        return InitialDatum(cfg["datum.kind"], cfg["datum.amplitude"], cfg["datum.wx"],
                            cfg["datum.wy"], cfg["datum.x0"], cfg["datum.y0"])
    except DomainError as e:
        raise ConfigError(f"datum: {e}") from None


def _quad(cfg, scale):
    from .oscquad import QuadratureConfig
    return QuadratureConfig(cfg["tolerances.rel_tol"] * scale, cfg["tolerances.abs_tol"] * scale)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_kpgrid(path, axes, values, error_estimate: float) -> None:
    """Write a binary grid; ``axes`` lists ``(count, min, max)`` per dimension."""
    values = np.ascontiguousarray(values, dtype="<f8")
    counts = tuple(int(a[0]) for a in axes)
    if values.shape != counts:
        raise ValueError(f"values shape {values.shape} does not match axes {counts}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(axes)))
        for n, lo, hi in axes:
            fh.write(struct.pack("<Qdd", int(n), float(lo), float(hi)))
        fh.write(values.tobytes(order="C"))
        fh.write(struct.pack("<d", float(error_estimate)))


def read_kpgrid(path):
    """Read a binary grid; returns ``(axes, values, error_estimate)``."""
    data = pathlib.Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a KPGRID1 file")
    (rank,) = struct.unpack_from("<I", data, 8)
    off = 12
    axes = []
    for _ in range(rank):
        n, lo, hi = struct.unpack_from("<Qdd", data, off)
        axes.append((n, lo, hi))
        off += 24
    count = int(np.prod([a[0] for a in axes])) if axes else 1
    if len(data) != off + 8 * count + 8:
        raise ValueError(f"{path}: truncated or oversized grid file")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape([a[0] for a in axes])
    (err,) = struct.unpack_from("<d", data, off + 8 * count)
    return axes, values.copy(), err


class _Out:
    def __init__(self, directory, cfg, command):
        self.dir = pathlib.Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self.command = command
        self.formats = cfg["outputs.formats"]
        self.written = []

    def csv(self, name, columns, rows):
        if "csv" not in self.formats:
            return
        path = self.dir / f"{name}.csv"
        buf = io.StringIO()
        buf.write(f"# kpmass {self.command} config_hash={self.hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
        self.written.append(path)

    def grid(self, name, axes, values, err):
        if "kpgrid" not in self.formats:
            return
        path = self.dir / f"{name}_{self.hash}.kpgrid"
        write_kpgrid(path, axes, values, err)
        self.written.append(path)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


@contextlib.contextmanager
def _op(module, operation, **inputs):
    try:
        yield
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as e:
        args = ", ".join(f"{k}={v!r}" for k, v in inputs.items())
        raise NumericalFailure(f"{module}.{operation}({args}) failed: {e}") from e


def _grid_axes(grid):
    return [(grid.ny, grid.y_min, grid.y_max), (grid.nx, grid.x_min, grid.x_max)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_kernel_eval(cfg, out, qc, threads):
    from .kernels import eval_A, eval_A3, eval_G, eval_G3
    spec = _spec(cfg)
    t, x, y, z = cfg["point.t"], cfg["point.x"], cfg["point.y"], cfg["point.z"]
    rows = []
    for which in ("G", "A") if cfg["kernel.which"] == "both" else (cfg["kernel.which"],):
        with _op("kernels", f"eval_{which}", t=t, x=x, y=y, z=z, alpha=spec.alpha):
            if spec.transverse_dim == 2:
                if spec.epsilon != 1 and which == "G":
                    raise ConfigError("equation.epsilon: the 3D G evaluator uses epsilon = +1")
                est = (eval_G3(t, x, y, z, spec.alpha, qc) if which == "G"
                       else eval_A3(t, x, y, z, spec.alpha, qc, spec.epsilon))
            else:
                est = (eval_G if which == "G" else eval_A)(spec, t, x, y, qc)
        rows.append((which, t, x, y, z, float(est.value), float(est.error)))
        print(f"{which}({t}, {x}, {y}{', ' + str(z) if spec.transverse_dim == 2 else ''}) = "
              f"{float(est.value):.16g} +- {float(est.error):.2e}")
    out.csv("kernel_eval", ["which", "t", "x", "y", "z", "value", "error_estimate"], rows)
    return 0


def cmd_kernel_grid(cfg, out, qc, threads):
    from .kernels import sample_kernel
    spec = _spec(cfg)
    if spec.transverse_dim != 1:
        raise ConfigError("equation.transverse_dim: kernel-grid is 2D; use kernel3d")
    grid = _grid(cfg)
    rows = []
    for t in cfg["times.values"]:
        for which in ("G", "A") if cfg["kernel.which"] == "both" else (cfg["kernel.which"],):
            with _op("kernels", "sample_kernel", t=t, which=which, grid=grid):
                kf = sample_kernel(spec, t, grid, which, qc, workers=threads)
            out.grid(f"kernel_{which}_t{t:g}", _grid_axes(grid), kf.values, kf.error_estimate)
            rows.append((t, which, grid.nx, grid.ny, kf.error_estimate,
                         float(np.max(np.abs(kf.values)))))
    out.csv("kernel_grid", ["t", "which", "nx", "ny", "error_estimate", "max_abs"], rows)
    return 0


def cmd_calibrate(cfg, out, qc, threads):
    from .kernels import calibrate_c1
    with _op("kernels", "calibrate_c1", n=cfg["calibrate.samples"]):
        cal = calibrate_c1(qc, cfg["calibrate.samples"],
                           (cfg["calibrate.lam_min"], cfg["calibrate.lam_max"]))
    print(f"c1 = {cal.c1:.16g}\nc2 = {cal.c2:.16g}\noverall_scale = {cal.overall_scale:.16g}\n"
          f"rms_residual = {cal.rms_residual:.3e}")
    out.csv("calibrate", ["c1", "c2", "overall_scale", "rms_residual"],
            [(cal.c1, cal.c2, cal.overall_scale, cal.rms_residual)])
    return 0


def cmd_evolve_linear(cfg, out, qc, threads):
    from .evolve import linear_apply
    spec = _spec(cfg)
    grid = _grid(cfg)
    datum = _datum(cfg)
    method = cfg["linear.method"]
    rows = []
    for t in cfg["times.values"]:
        with _op("evolve", "linear_apply", t=t, method=method):
            sol = linear_apply(spec, datum, t, grid, method, qc, workers=threads)
        out.grid(f"linear_u_t{t:g}", _grid_axes(grid), sol.u, sol.error_estimate)
        out.grid(f"linear_A_t{t:g}", _grid_axes(grid), sol.antiderivative, sol.error_estimate)
        rows.append((t, method, sol.error_estimate, sol.boundary_ratio,
                     float(np.max(np.abs(sol.u)))))
    out.csv("evolve_linear", ["t", "method", "error_estimate", "boundary_ratio", "max_abs_u"], rows)
    return 0


def _write_trajectory(out, cfg, traj, grid, prefix):
    from .diagnostics import residual
    rows = []
    for j, t in enumerate(traj.times):
        for it, r in enumerate(traj.picard_residuals[j]):
            rows.append((float(t), it + 1, r))
        out.grid(f"{prefix}_u_t{t:g}", _grid_axes(grid), traj.fields[j], 0.0)
    out.csv(f"{prefix}_picard", ["t", "iteration", "residual"], rows)
    if len(traj.times) >= 3:
        ts, res = residual(traj, traj.spec)
        out.csv(f"{prefix}_residual", ["t", "residual"], zip(ts, res))


def cmd_evolve_nonlinear(cfg, out, qc, threads):
    from .evolve import duhamel_solve
    spec = _spec(cfg)
    if spec.is_bbm:
        raise ConfigError("equation.family: use evolve-bbm for KP-BBM")
    grid = _grid(cfg)
    datum = _datum(cfg)
    T, n, tol = cfg["times.T"], cfg["times.n_times"], cfg["tolerances.picard_tol"]
    with _op("evolve", "duhamel_solve", T=T, n_times=n, tol=tol):
        traj = duhamel_solve(spec, datum, T, n, tol, grid, linear_method=cfg["linear.method"], cfg=qc)
    _write_trajectory(out, cfg, traj, grid, "nonlinear")
    print(f"Picard converged: final residual {max(h[-1] for h in traj.picard_residuals):.3e}")
    return 0


def cmd_evolve_bbm(cfg, out, qc, threads):
    from .evolve import bbm_solve
    spec = _spec(cfg)
    if not spec.is_bbm:
        raise ConfigError("equation.family: evolve-bbm needs family = KP-BBM")
    grid = _grid(cfg)
    datum = _datum(cfg)
    T, n, tol, k = cfg["times.T"], cfg["times.n_times"], cfg["tolerances.picard_tol"], cfg["bbm.k"]
    try:
        with _op("evolve", "bbm_solve", T=T, n_times=n, tol=tol, k=k):
            traj = bbm_solve(spec, datum, T, n, tol, grid, k=k,
                             linear_method=cfg["linear.method"], cfg=qc)
    except DomainError as e:
        raise ConfigError(f"bbm.k: {e}") from None
    _write_trajectory(out, cfg, traj, grid, "bbm")
    print(f"Picard converged: final residual {max(h[-1] for h in traj.picard_residuals):.3e}")
    return 0


def cmd_kernel3d(cfg, out, qc, threads):
    from .kernels import eval_A3, eval_G3
    alpha = cfg["equation.alpha"]
    if not alpha > 1:
        raise ConfigError(f"equation.alpha: 3D kernels need alpha > 1; alpha = 1 is excluded "
                          f"(got alpha={alpha})")
    eps = cfg["equation.epsilon"]
    if eps != 1 and cfg["kernel.which"] != "A":
        raise ConfigError("equation.epsilon: the 3D G evaluator uses epsilon = +1; set kernel.which = A")
    t = cfg["times.values"][0]
    xs = np.linspace(cfg["grid.x_min"], cfg["grid.x_max"], cfg["grid.nx"])
    ys = np.linspace(cfg["grid.y_min"], cfg["grid.y_max"], cfg["grid.ny"])
    zs = np.linspace(cfg["grid.z_min"], cfg["grid.z_max"], cfg["grid.nz"])
    axes = [(len(zs), zs[0], zs[-1]), (len(ys), ys[0], ys[-1]), (len(xs), xs[0], xs[-1])]
    rows = []
    for which in ("G", "A") if cfg["kernel.which"] == "both" else (cfg["kernel.which"],):
        vals = np.empty((len(zs), len(ys), len(xs)))
        err = 0.0
        cache = {}
        for k, z in enumerate(zs):
            for j, y in enumerate(ys):
                # the kernels depend on y and z through y^2 + z^2 only
                r2 = y * y + z * z
                for i, x in enumerate(xs):
                    key = (i, r2)
                    if key not in cache:
                        with _op("kernels", f"eval_{which}3", t=t, x=x, y=y, z=z, alpha=alpha):
                            if which == "G":
                                est = eval_G3(t, x, math.sqrt(r2), 0.0, alpha, qc)
                            else:
                                est = eval_A3(t, x, math.sqrt(r2), 0.0, alpha, qc, eps)
                        cache[key] = est
                    est = cache[key]
                    vals[k, j, i] = est.value
                    err = max(err, float(est.error))
        out.grid(f"kernel3d_{which}_t{t:g}", axes, vals, err)
        rows.append((t, which, len(xs), len(ys), len(zs), err, float(np.max(np.abs(vals)))))
    out.csv("kernel3d", ["t", "which", "nx", "ny", "nz", "error_estimate", "max_abs"], rows)
    return 0


def cmd_mass_report(cfg, out, qc, threads):
    from .diagnostics import first_crossing, mass_report, partial_mass
    from .evolve import mass_line, propagate_line
    spec = _spec(cfg)
    if spec.transverse_dim != 1:
        raise ConfigError("equation.transverse_dim: mass-report is 2D")
    datum = _datum(cfg)
    t, x_max = cfg["mass.t"], cfg["mass.x_max"]
    X_values = cfg["mass.X_values"]
    if max(X_values) > x_max:
        raise ConfigError(f"mass.X_values: entries must not exceed mass.x_max = {x_max}")
    xs = mass_line(x_max) + datum.x0
    ys = cfg["mass.y_slices"]
    with _op("evolve", "propagate_line", t=t, x_max=x_max, y_slices=ys):
        u, a, _ = propagate_line(spec, datum, t, xs, ys)
    rep = mass_report(t, xs - datum.x0, ys, u, a, X_values)
    if "csv" in out.formats:
        path = out.dir / "mass_report.csv"
        rep.to_csv(path, f"# kpmass mass-report config_hash={out.hash}")
        out.written.append(path)
    for k, y in enumerate(ys):
        p0 = partial_mass(datum(xs, y), xs - datum.x0, x_max)
        star = first_crossing(X_values, rep.partial_mass[k], cfg["mass.threshold"])
        print(f"y={y:g}: P(0, {x_max:g}) = {p0:.10f}, X* = {star}, max gap = "
              f"{float(np.max(rep.identity_gap[k])):.3e}")
    return 0


def cmd_verify_all(cfg, out, qc, threads):
    from . import acceptance
    sel = cfg["verify.criteria"]
    numbers = None if sel == ["all"] else [int(s) for s in sel]

    def report(r):
        print(r.line(), flush=True)

    results = acceptance.run_all(qc, numbers, seed=cfg["verify.seed"], subset=cfg["verify.subset"],
                                 report=report)
    out.csv("verify_all", ["criterion", "title", "passed", "measured", "seconds"],
            [(r.number, r.title, r.passed, json.dumps(r.measured, sort_keys=True, default=str),
              round(r.seconds, 1)) for r in results])
    npass = sum(r.passed for r in results)
    print(f"{npass}/{len(results)} criteria passed")
    return 0 if npass == len(results) else 1


COMMANDS = {
    "kernel-eval": cmd_kernel_eval,
    "kernel-grid": cmd_kernel_grid,
    "calibrate": cmd_calibrate,
    "evolve-linear": cmd_evolve_linear,
    "evolve-nonlinear": cmd_evolve_nonlinear,
    "evolve-bbm": cmd_evolve_bbm,
    "kernel3d": cmd_kernel3d,
    "mass-report": cmd_mass_report,
    "verify-all": cmd_verify_all,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="kpmass", description="KP-type fundamental solutions and "
                                 "zero-mass smoothing experiments")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--output", help="output directory (else outputs.directory, "
                                     "else $KPMASS_OUTPUT_DIR, else the working directory)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for kernel sampling")
    ap.add_argument("--tolerance-scale", type=float, default=1.0,
                    help="multiplies every tolerance (quick runs use values > 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        if not args.tolerance_scale > 0:
            raise ConfigError("--tolerance-scale: must be positive")
        cfg = load_config(args.config)
        if args.tolerance_scale != 1.0:
            for key in ("tolerances.rel_tol", "tolerances.abs_tol", "tolerances.picard_tol"):
                cfg[key] *= args.tolerance_scale
        directory = (args.output or cfg["outputs.directory"]
                     or os.environ.get("KPMASS_OUTPUT_DIR", "") or ".")
        out = _Out(directory, cfg, args.command)
        qc = _quad(cfg, 1.0)
        status = COMMANDS[args.command](cfg, out, qc, args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except DomainError as e:
        print(f"domain error: {e}", file=sys.stderr)
        return 2
    for p in out.written:
        print(f"wrote {p}")
    return status


if __name__ == "__main__":
    sys.exit(main())
