"""Command-line front end: ``synth``, ``run`` and ``eval``.

Exit codes: 0 success, 1 numerical failure, 2 I/O error, 3 configuration
error. Failures print a one-line JSON object on stderr (and write
``error.json`` into the output directory when there is one).
"""

import argparse
import json
import os
import struct
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import membership_matrix
from .datasets import generate_synthetic
from .engine import DistrConfig, distr_fit
from .errors import (
    ConfigurationError, ContractViolation, ConvergenceError, DegenerateGraphError, DistrError,
    DomainError, InfeasibleError, ParameterError,
)
from .metrics import combined_score, homogeneity, prototype_labels, weighted_silhouette
from .pipelines import cluster_then_dr, dr_then_cluster

EXIT_OK, EXIT_NUMERICAL, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3
BINARY_SUFFIXES = (".bin", ".f64")
METHODS = ("distr", "dr_then_c", "c_then_dr", "project")


class CliError(Exception):
    def __init__(self, code, message, status):
        super().__init__(message)
        self.code, self.status = code, status


# --------------------------------------------------------------------------- io

def read_matrix(path, labels_col=None):
    """Load samples from CSV (optional header, optional label column) or binary.

    The binary layout is two little-endian uint64 ``(rows, cols)`` followed by
    ``rows * cols`` little-endian float64 values in row-major order.

    Returns
    -------
    X : ndarray, shape (N, p)
    labels : ndarray of int or None
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    if path.suffix in BINARY_SUFFIXES:
        raw = path.read_bytes()
        if len(raw) < 16:
            raise CliError("io_bad_format", f"{path}: truncated binary header", EXIT_IO)
        rows, cols = struct.unpack("<QQ", raw[:16])
        if len(raw) != 16 + 8 * rows * cols:
            raise CliError("io_bad_format", f"{path}: payload size does not match header", EXIT_IO)
        data = np.frombuffer(raw, dtype="<f8", offset=16).reshape(rows, cols).astype(float)
    else:
        with open(path) as fh:
            first = fh.readline()
        try:
            [float(v) for v in first.strip().split(",") if v.strip()]
            skip = 0
        except ValueError:
            skip = 1
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
        except ValueError as exc:
            raise CliError("io_bad_format", f"{path}: {exc}", EXIT_IO) from None
    if data.size == 0:
        raise CliError("io_bad_format", f"{path}: no samples", EXIT_IO)
    labels = None
    if labels_col is not None:
        col = data.shape[1] - 1 if labels_col == "last" else int(labels_col)
        if not -data.shape[1] <= col < data.shape[1]:
            raise ConfigurationError(f"label column {labels_col} is out of range")
        labels = data[:, col]
        if not np.all(labels == np.round(labels)):
            raise ContractViolation("labels must be integers")
        labels = labels.astype(int)
        data = np.delete(data, col, axis=1)
    return data, labels


def write_binary(path, X):
    X = np.ascontiguousarray(X, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *X.shape))
        fh.write(X.tobytes())


def write_csv(path, A):
    A = np.asarray(A, dtype=float)
    np.savetxt(path, A.reshape(A.shape[0], -1) if A.ndim > 1 else A[:, None], delimiter=",", fmt="%.17g")


def read_csv(path):
    if not Path(path).is_file():
        raise FileNotFoundError(str(path))
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_svg(path, Z, masses, labels=None, size=480, pad=40):
    """Scatter of 2-D prototypes; marker area proportional to mass."""
    Z = np.asarray(Z, dtype=float)
    masses = np.asarray(masses, dtype=float)
    live = masses > 0
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
    lo = Z[live].min(axis=0) if live.any() else np.zeros(2)
    span = np.ptp(Z[live], axis=0) if live.any() else np.ones(2)
    span = np.where(span > 0, span, 1.0)
    scale = (size - 2 * pad) / span.max()
    rmax = 0.08 * size
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">', f'<rect width="{size}" height="{size}" fill="white"/>']
    for k in np.flatnonzero(live):
        x = pad + (Z[k, 0] - lo[0]) * scale
        y = size - pad - (Z[k, 1] - lo[1]) * scale
        r = rmax * np.sqrt(masses[k] / masses.max())
        color = palette[int(labels[k]) % len(palette)] if labels is not None and labels[k] >= 0 else "#444444"
        parts.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r:.3f}" fill="{color}" '
                     f'fill-opacity="0.7" stroke="black" stroke-width="0.5"><title>{k}</title></circle>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------------- config

RUN_KEYS = {
    "method": str, "cx": str, "cz": str, "loss": str, "n": int, "d": int, "perplexity": float,
    "solver": str, "epsilon": float, "seed": int, "tol": float, "solver_tol": float,
    "max_outer": int, "n_inner": int, "lr": float, "cx_scale": float, "labels_col": str, "support": str,
    "scale100": bool,
}
RUN_DEFAULTS = {
    "method": "distr", "cx": "entropic_affinity", "cz": "student", "loss": "kl", "n": 10, "d": 2,
    "perplexity": 30.0, "solver": "cg", "epsilon": 1.0, "seed": 0, "tol": 1e-7, "solver_tol": 1e-9,
    "max_outer": 50, "n_inner": 100, "lr": 0.01, "cx_scale": 1.0, "labels_col": None, "support": None,
    "scale100": False,
}


def _parse_bool(value):
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment; dashes equal underscores."""
    if not Path(path).is_file():
        raise FileNotFoundError(str(path))
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    if value is None:
        return None
    kind = RUN_KEYS[key]
    try:
        return _parse_bool(value) if kind is bool else kind(value)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {value!r}") from None


def resolve_run_options(args):
    """Merge defaults, the config file and command-line flags (in that order)."""
    opts = dict(RUN_DEFAULTS)
    if args.config:
        opts.update({k: _coerce(k, v) for k, v in read_config_file(args.config).items()})
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = _coerce(key, value)
    if opts["method"] not in METHODS:
        raise ConfigurationError(f"unknown method {opts['method']!r}")
    if opts["labels_col"] in ("none", ""):
        opts["labels_col"] = None
    return opts


def distr_config(opts):
    try:
        config = DistrConfig(
            n=opts["n"], d=opts["d"], cx_kind=opts["cx"], cz_kind=opts["cz"], loss=opts["loss"],
            perplexity=opts["perplexity"], solver=opts["solver"], epsilon=opts["epsilon"],
            tol=opts["tol"], solver_tol=opts["solver_tol"], max_outer=opts["max_outer"],
            n_inner=opts["n_inner"], lr=opts["lr"], seed=opts["seed"], cx_scale=opts["cx_scale"],
        )
    except ContractViolation as exc:
        raise ConfigurationError(str(exc)) from None
    config.validate()
    return config


# --------------------------------------------------------------------- scoring

def score_artifacts(Z, T, labels, scale100=False):
    """Homogeneity, weighted silhouette and combined score (``None`` without labels)."""
    Z = np.asarray(Z, dtype=float)
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or Z.ndim != 2 or T.shape[1] != Z.shape[0]:
        raise ContractViolation(f"coupling {T.shape} and embeddings {Z.shape} are inconsistent")
    if labels is None:
        return {"homogeneity": None, "silhouette": None, "combined": None}
    labels = np.asarray(labels)
    if labels.shape != (T.shape[0],):
        raise ContractViolation(f"{labels.shape[0]} labels for {T.shape[0]} samples")
    H = homogeneity(T, labels)
    try:
        S = weighted_silhouette(Z, prototype_labels(T, labels), T.sum(axis=0))
        SH = combined_score(S, H)
    except DegenerateGraphError:
        S = SH = None
    factor = 100.0 if scale100 else 1.0
    return {
        "homogeneity": H * factor,
        "silhouette": None if S is None else S * factor,
        "combined": None if SH is None else SH * factor,
    }


# -------------------------------------------------------------------- commands

def cmd_synth(args):
    params = {}
    if args.kind == "circle3d":
        params = {"N": args.n_samples, "noise": args.noise}
    else:
        params = {"k": args.k, "separation": args.separation, "noise": args.noise}
        if args.sizes:
            params["sizes"] = [int(s) for s in args.sizes.split(",")]
    try:
        data = generate_synthetic(args.kind, seed=args.seed, **params)
    except ParameterError as exc:
        raise ConfigurationError(str(exc)) from None
    table = data.X if data.labels is None else np.column_stack([data.X, data.labels])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix in BINARY_SUFFIXES:
        write_binary(out, data.X)
    else:
        write_csv(out, table)
    return {"output": str(out), "N": int(data.X.shape[0]), "labeled": data.labels is not None}


def _run_method(X, opts, config):
    method = opts["method"]
    N = X.shape[0]
    h = np.full(N, 1.0 / N)
    if method == "distr":
        fit = distr_fit(X, config)
        return fit.Z, fit.T, fit
    if method == "project":
        if not opts["support"]:
            raise ConfigurationError("the project method needs --support")
        support, _ = read_matrix(opts["support"])
        if support.shape[1] != config.d:
            config = DistrConfig(**{**config.to_dict(), "d": support.shape[1]})
        config = DistrConfig(**{**config.to_dict(), "n": support.shape[0], "n_inner": 0, "max_outer": 1})
        fit = distr_fit(X, config, Z_init=support)
        return fit.Z, fit.T, fit
    runner = dr_then_cluster if method == "dr_then_c" else cluster_then_dr
    Z, masses, part, fit = runner(X, config, return_fit=True)
    return Z, membership_matrix(part.labels, part.k, h), fit


def cmd_run(args):
    opts = resolve_run_options(args)
    X, labels = read_matrix(args.input, opts["labels_col"])
    config = distr_config(opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    Z, T, fit = _run_method(X, opts, config)
    masses = T.sum(axis=0)
    trace = fit.objective_trace if fit is not None else []
    write_csv(out / "embeddings.csv", Z)
    write_csv(out / "coupling.csv", T)
    write_csv(out / "weights.csv", masses)
    if trace:
        write_csv(out / "trace.csv", np.asarray(trace, dtype=float))
    else:
        (out / "trace.csv").write_text("")
    if labels is not None:
        np.savetxt(out / "labels.csv", labels, fmt="%d")
    if Z.shape[1] == 2:
        write_svg(out / "scatter.svg", Z, masses,
                  prototype_labels(T, labels) if labels is not None else None)

    effective_n = int(np.count_nonzero(masses >= config.mass_threshold))
    summary = {
        "method": opts["method"],
        "config": {k: v for k, v in opts.items()},
        "input": str(args.input),
        "N": int(X.shape[0]),
        "n": int(Z.shape[0]),
        "final_objective": float(trace[-1]) if trace else None,
        "n_outer": int(fit.n_outer) if fit is not None else 0,
        "converged": bool(fit.converged) if fit is not None else None,
        "effective_n": effective_n,
        "scale100": bool(opts["scale100"]),
    }
    summary.update(score_artifacts(Z, T, labels, opts["scale100"]))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_eval(args):
    run_dir = Path(args.run) if args.run else None

    def pick(explicit, name):
        if explicit:
            return Path(explicit)
        if run_dir is None:
            raise ConfigurationError(f"give --{name} or --run")
        return run_dir / f"{name}.csv"

    Z = read_csv(pick(args.embeddings, "embeddings"))
    T = read_csv(pick(args.coupling, "coupling"))
    label_path = Path(args.labels) if args.labels else (run_dir / "labels.csv" if run_dir else None)
    labels = None
    if label_path is not None and (args.labels or label_path.is_file()):
        labels = read_csv(label_path).ravel().astype(int)
    scores = score_artifacts(Z, T, labels, args.scale100)
    scores["effective_n"] = int(np.count_nonzero(T.sum(axis=0) >= DistrConfig.mass_threshold))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(scores, indent=2, sort_keys=True) + "\n")
    return scores


# ------------------------------------------------------------------------ main

def build_parser():
    parser = argparse.ArgumentParser(prog="distr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("blobs", "circle3d"), default="blobs")
    p.add_argument("--n-samples", type=int, default=100, help="circle3d: number of points")
    p.add_argument("--k", type=int, default=9, help="blobs: number of clusters")
    p.add_argument("--sizes", help="blobs: comma-separated cluster sizes")
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV (labels in the last column) or .bin file")

    p = sub.add_parser("run", help="fit a model and export its artifacts")
    p.add_argument("--input", required=True)
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--cx", help="gram, mds_gram or entropic_affinity")
    p.add_argument("--cz", help="gram or student")
    p.add_argument("--loss", help="l2 or kl")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--solver", choices=("cg", "md"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--solver-tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--n-inner", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--cx-scale", type=float, help="multiply the input similarity (default 1)")
    p.add_argument("--labels-col", help="'last', a column index, or 'none'")
    p.add_argument("--support", help="project: file with the fixed prototype positions")
    p.add_argument("--scale100", action="store_const", const="true", default=None,
                   help="report scores multiplied by 100")

    p = sub.add_parser("eval", help="recompute scores from saved artifacts")
    p.add_argument("--run", help="directory written by 'run'")
    p.add_argument("--embeddings")
    p.add_argument("--coupling")
    p.add_argument("--labels")
    p.add_argument("--out", help="where to write the JSON scores (default: stdout only)")
    p.add_argument("--scale100", action="store_true")
    return parser


def _classify(exc):
    if isinstance(exc, CliError):
        return exc.code, exc.status
    if isinstance(exc, FileNotFoundError):
        return "io_not_found", EXIT_IO
    if isinstance(exc, (OSError, UnicodeDecodeError)):
        return "io_error", EXIT_IO
    if isinstance(exc, (ConfigurationError, ParameterError)):
        return "configuration_error", EXIT_CONFIG
    if isinstance(exc, ContractViolation):
        return "contract_violation", EXIT_CONFIG
    if isinstance(exc, (ConvergenceError, DomainError, InfeasibleError, DegenerateGraphError,
                        FloatingPointError, np.linalg.LinAlgError, DistrError)):
        return "numerical_failure", EXIT_NUMERICAL
    return "internal_error", EXIT_NUMERICAL


def _thread_limit():
    value = os.environ.get("DISTR_THREADS")
    if not value:
        return nullcontext()
    try:
        limit = int(value)
    except ValueError:
        raise ConfigurationError(f"DISTR_THREADS must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, limit))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and args.noise is None:
        args.noise = 0.0 if args.kind == "circle3d" else 1.0
    handler = {"synth": cmd_synth, "run": cmd_run, "eval": cmd_eval}[args.command]
    try:
        with _thread_limit():
            result = handler(args)
    except Exception as exc:  # every failure becomes an exit code plus JSON
        code, status = _classify(exc)
        err = {"error": {"code": code, "message": str(exc), "type": type(exc).__name__,
                         "exit_status": status}}
        residual = getattr(exc, "residual", None)
        if residual is not None:
            err["error"]["residual"] = residual
        print(json.dumps(err), file=sys.stderr)
        out = getattr(args, "out", None)
        if args.command == "run" and out and Path(out).is_dir():
            (Path(out) / "error.json").write_text(json.dumps(err, indent=2) + "\n")
        return status
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
