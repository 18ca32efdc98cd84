"""Command-line front end: ``lmg-esqpt <command> [options]``.

Every command accepts ``--config FILE`` with flat ``key = value`` lines whose
keys are the long option names (dashes or underscores).  Flags given on the
command line override the file.  Results go to ``--output`` or, when it is
absent, to ``$LMG_OUTPUT_DIR/<command>.<format>`` (current directory if the
variable is unset).

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 IO error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import LmgError
from .protocols import (comparison_thresholds, protocol1_mixed_variance, protocol1_variance,
                        protocol2_runtime, protocol2_variance, run_protocol2)
from .qfi import qfi_eigenstate, qfi_energy_scan, qfi_field_sweep
from .robustness import (NoiseProfile, PerturbationSpec, noise_exponent, perturbation_bound,
                         first_order_term, perturbed_phase_derivative_ratio, PERTURBATIONS)
from .scaling import SuiteConfig, exponent_suite
from .spectrum import analytic_dos, critical_field, default_level, density_of_states, solve_sector, \
    sector_energies, sz_moments
from .spin_sector import Parity, build_sector

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "LMG_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value parsers


def parse_time(text: str) -> float:
    """Floats or multiples of pi: '3.1', 'pi', '2pi', '0.5*pi', 'pi/2'."""
    s = str(text).strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?pi(?:/([0-9.eE+]+))?", s)
    try:
        if m:
            sign_only = {"": 1.0, "+": 1.0, "-": -1.0}
            coef = sign_only[m.group(1)] if m.group(1) in sign_only else float(m.group(1))
            val = coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
        else:
            val = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or multiple of pi: {text!r}") from None
    if not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"non-finite value {text!r}")
    return val


def _list_of(kind):
    def parse(text):
        items = [t for t in re.split(r"[,\s]+", str(text).strip()) if t]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        try:
            return tuple(kind(t) for t in items)
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def finite_float(text):
    return parse_time(text)


def parse_bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parity_choice(text):
    s = str(text).strip().lower()
    if s not in ("even", "odd", "both"):
        raise argparse.ArgumentTypeError(f"parity must be even, odd or both, got {text!r}")
    return s


# ---------------------------------------------------------------------------
# output


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def render(table: Table, fmt: str) -> str:
    if fmt == "json":
        doc = {"metadata": _json_value(table.metadata), "columns": table.columns,
               "records": [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows]}
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    lines = [f"# {k}: {json.dumps(_json_value(v), sort_keys=True)}" for k, v in table.metadata.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def read_csv(path: str) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a file written by ``render``: (metadata, columns, rows as strings)."""
    meta, rows, cols = {}, [], None
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh.read().split("\n"):
            if not line:
                continue
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                meta[key] = json.loads(val)
            elif cols is None:
                cols = line.split(",")
            else:
                rows.append(line.split(","))
    return meta, cols or [], rows


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands


def _sectors(n, parity):
    if parity == "both":
        return [build_sector(n, Parity.EVEN), build_sector(n, Parity.ODD)]
    return [build_sector(n, parity)]


def _level(args, n):
    if getattr(args, "k", None) is not None:
        return args.k
    return default_level(n, args.fraction)


def _grid(args):
    if args.h_count < 3 and args.command != "protocol1":
        raise ConfigError("field grids need at least three points")
    if args.h_stop < args.h_start:
        raise ConfigError("h-stop must not be below h-start")
    return np.linspace(args.h_start, args.h_stop, args.h_count)


def cmd_spectrum(args) -> Table:
    t = Table(["parity", "level", "energy", "energy_per_spin"],
              metadata={"n": args.n, "h": args.h, "parity": args.parity})
    for sec in _sectors(args.n, args.parity):
        e = sector_energies(sec, args.h)
        t.rows += [[sec.parity.name.lower(), i, float(x), float(x) / args.n] for i, x in enumerate(e)]
    return t


def cmd_dos(args) -> Table:
    secs = _sectors(args.n, args.parity)
    spectra = [sector_energies(s, args.h) for s in secs]
    hist = density_of_states(spectra, n_bins=args.bins, rescale=True, h=args.h, n_spins=args.n)
    centers = hist.centers
    density = hist.density()
    model = np.full(centers.shape, float("nan"))
    if 0 < args.h < 1:
        ok = np.abs(centers * args.n + args.h * args.n / 2) > 0
        model[ok] = len(secs) * np.asarray(analytic_dos(centers[ok] * args.n, args.h, args.n))
    lo, hi = hist.peak_bin()
    t = Table(["bin_left", "bin_right", "center", "count", "density", "closed_form_density"],
              metadata={"n": args.n, "h": args.h, "parity": args.parity, "bins": args.bins,
                        "axis": "E/N", "density_units": "levels per unit energy",
                        "peak_bin": [lo, hi], "critical_energy_per_spin": -args.h / 2})
    for i in range(len(hist.counts)):
        t.rows.append([float(hist.bin_edges[i]), float(hist.bin_edges[i + 1]), float(centers[i]),
                       int(hist.counts[i]), float(density[i]), float(model[i])])
    return t


def cmd_qfi_sweep(args) -> Table:
    grid = _grid(args)
    t = Table(["parity", "h", "qfi"])
    meta = {"n": args.n, "h_grid": [args.h_start, args.h_stop, args.h_count], "width_baseline": "zero"}
    for sec in _sectors(args.n, args.parity):
        k = _level(args, args.n)
        scan = qfi_field_sweep(sec, k, grid, refine=not args.no_refine)
        name = sec.parity.name.lower()
        meta[f"{name}_level"] = k
        meta[f"{name}_peak_value"] = scan.peak_value
        meta[f"{name}_peak_location"] = scan.peak_location
        meta[f"{name}_half_width"] = scan.half_width
        meta[f"{name}_value_at_zero_field"] = scan.value_at_zero_field
        t.rows += [[name, float(h), float(f)] for h, f in zip(scan.grid, scan.values)]
    t.metadata = meta
    return t


def cmd_qfi_energy(args) -> Table:
    t = Table(["parity", "level", "energy_per_spin", "qfi"])
    meta = {"n": args.n, "h": args.h, "critical_energy_per_spin": -args.h / 2}
    for sec in _sectors(args.n, args.parity):
        scan = qfi_energy_scan(sec, args.h)
        name = sec.parity.name.lower()
        meta[f"{name}_peak_value"] = scan.peak_value
        meta[f"{name}_peak_location"] = scan.peak_location
        meta[f"{name}_half_width"] = scan.half_width
        t.rows += [[name, i, float(x), float(f)] for i, (x, f) in enumerate(zip(scan.grid, scan.values))]
    t.metadata = meta
    return t


def cmd_exponents(args) -> Table:
    cfg = SuiteConfig(sizes=args.n_list, fractions=args.fractions, width_fractions=args.width_fractions,
                      energy_fields=args.energy_fields, field_points=args.h_count,
                      approach_rule=args.approach, approach_offset=args.approach_offset,
                      jobs=args.jobs, quantities=args.quantities)
    table = exponent_suite(cfg)
    source = {"gamma": ("field", "peak"), "delta": ("field", "zero_field"), "eta": ("field", "width"),
              "zeta": ("spacing", "spacing"), "xi": ("energy", "peak"), "mu": ("energy", "width"),
              "nu_measured": ("energy", "level_distance"), "kappa": ("magnetization", "sz_min"),
              "chi_plus": ("magnetization", "var_plus"), "chi_minus": ("magnetization", "var_minus"),
              "ground": ("ground", "peak")}
    t = Table(["name", "label", "n", "value", "exponent", "prefactor", "r_squared"])
    derived = {}
    for row in table.rows:
        if row.name not in source:
            derived[f"{row.name}[{row.label}]"] = row.fit.exponent
            continue
        for n, y in row.fit.points:
            t.rows.append([row.name, row.label, int(n), y, row.fit.exponent, row.fit.prefactor,
                           row.fit.r_squared])
    t.metadata = {"sizes": list(args.n_list), "fractions": list(args.fractions),
                  "width_fractions": list(args.width_fractions), "energy_fields": list(args.energy_fields),
                  "field_points": args.h_count, "approach_rule": args.approach,
                  "approach_offset": args.approach_offset, "fit": "unweighted least squares on logs",
                  "derived": derived}
    return t


def cmd_protocol1(args) -> Table:
    grid = _grid(args)
    even = build_sector(args.n, Parity.EVEN)
    k = _level(args, args.n)
    t = Table(["h", "sz_mean", "sz_variance", "variance", "qfi", "cramer_rao_product"],
              metadata={"n": args.n, "level": k, "mixed": args.mixed, "derivative": args.derivative})
    if args.mixed:
        t.columns = ["h", "variance"]
        odd = build_sector(args.n, Parity.ODD)
        for h in grid:
            t.rows.append([float(h), protocol1_mixed_variance(even, odd, k, float(h), args.derivative)])
        return t
    for h in grid:
        eig = solve_sector(even, float(h))
        m1, m2 = sz_moments(eig, k)
        var = protocol1_variance(even, k, float(h), args.derivative)
        f = qfi_eigenstate(eig, k)
        t.rows.append([float(h), m1, m2 - m1 * m1, var, f, var * f])
    try:
        t.metadata["critical_field"] = critical_field(even, k)
    except LmgError:
        t.metadata["critical_field"] = None
    return t


def cmd_protocol2(args) -> Table:
    if args.seed is None:
        raise ConfigError("protocol2 is stochastic; --seed is required")
    t = Table(["seed", "h_estimate", "abs_error", "selection_correct", "delta_phi", "finite_size_bias"],
              metadata={"n": args.n, "h": args.h, "bits": args.bits, "dt": args.dt, "shots": args.shots,
                        "base_seed": args.seed, "repeats": args.repeats, "prep": args.prep,
                        "beta": args.beta, "mode": args.mode,
                        "variance": protocol2_variance(args.bits, args.dt),
                        "runtime": protocol2_runtime(args.bits, args.dt),
                        "bound": 4 * math.pi / 2 ** args.bits / args.dt})
    for s in range(args.seed, args.seed + args.repeats):
        r = run_protocol2(args.n, args.h, args.bits, args.dt, args.shots, s, prep=args.prep,
                          beta=args.beta, mode=args.mode)
        d = r.diagnostics
        t.rows.append([s, r.h_estimate, d["abs_error"], d["selection_correct"], d["delta_phi"],
                       d.get("finite_size_bias", 0.0)])
    return t


def cmd_thresholds(args) -> Table:
    thr = comparison_thresholds(args.n, args.dt)
    t = Table(["bits", "variance", "shot_noise_over_runtime", "heisenberg", "heisenberg_over_runtime"],
              metadata={"n": args.n, "dt": args.dt, "thresholds": list(thr)})
    n = args.n
    for d in range(1, args.max_bits + 1):
        theta = protocol2_runtime(d, args.dt)
        t.rows.append([d, protocol2_variance(d, args.dt), 1 / (theta * n), 1 / n ** 2, 1 / (theta * n ** 2)])
    return t


def cmd_robustness(args) -> Table:
    if args.mode == "exponent":
        t = Table(["plateau", "window", "contrast", "exponent", "subdominant", "superextensive"],
                  metadata={"gamma": args.gamma, "mu": args.mu, "nu": args.nu, "grid": args.grid,
                            "background": "plateau + 1", "contrast": "plateau + window"})
        vals = np.linspace(0.0, 1.0, args.grid)
        for v in vals:
            for w in vals:
                if w > v or w >= 1 + args.mu:
                    continue
                prof = NoiseProfile(float(v), float(w), float(v) + 1.0, float(v + w))
                r = noise_exponent(prof, args.gamma, args.mu, args.nu)
                t.rows.append([float(v), float(w), float(v + w), r.dominant, r.subdominant, r.superextensive])
        return t
    if args.matrix_file is None and args.perturbation not in PERTURBATIONS:
        raise ConfigError(f"unknown perturbation {args.perturbation!r}")
    matrices = load_matrices(args.matrix_file) if args.matrix_file else None
    name = "matrix-file" if matrices is not None else args.perturbation
    t = Table(["n", "level", "strength", "ratio", "first_order_term", "bound"],
              metadata={"perturbation": name, "h": args.h, "dt": args.dt,
                        "g_tilde": args.g, "strength_rule": "g_tilde / sqrt(N)", "alpha": args.alpha})
    for n in args.n_list:
        k = _level(args, n)
        g = args.g / math.sqrt(n)
        if matrices is None:
            spec = PerturbationSpec.named(args.perturbation, g, args.alpha)
        else:
            spec = PerturbationSpec.from_matrices(matrices, g)
        ratio = perturbed_phase_derivative_ratio(n, k, args.h, args.dt, spec)
        eig = solve_sector(build_sector(n, Parity.EVEN), args.h)
        m = spec.matrix(n)
        t.rows.append([n, k, g, ratio, first_order_term(eig, k, m), perturbation_bound(eig, k, m)])
    return t


def load_matrices(path: str) -> dict[int, np.ndarray]:
    """Perturbation matrices from an .npz archive with entries named N<size>."""
    try:
        archive = np.load(path, allow_pickle=False)
    except OSError:
        raise
    except Exception as exc:  # not an npz archive
        raise ConfigError(f"cannot read perturbation matrices from {path}: {exc}") from None
    if not hasattr(archive, "files"):
        raise ConfigError(f"{path} is not an .npz archive")
    out = {}
    with archive:
        for key in archive.files:
            m = re.fullmatch(r"N(\d+)", key)
            if not m:
                raise ConfigError(f"archive entry {key!r} is not named N<size>")
            out[int(m.group(1))] = np.array(archive[key], dtype=float)
    return out


COMMANDS = {"spectrum": cmd_spectrum, "dos": cmd_dos, "qfi-sweep": cmd_qfi_sweep,
            "qfi-energy": cmd_qfi_energy, "exponents": cmd_exponents, "protocol1": cmd_protocol1,
            "protocol2": cmd_protocol2, "thresholds": cmd_thresholds, "robustness": cmd_robustness}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--output", help="output file (default: $LMG_OUTPUT_DIR/<command>.<format>)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps (results do not depend on it)")
    common.add_argument("--seed", type=int, default=None)

    parser = _Parser(prog="lmg-esqpt", description="LMG excited-state criticality toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    p = add("spectrum", "eigenvalues of one or both parity sectors")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--h", type=finite_float, required=True)
    p.add_argument("--parity", type=parity_choice, default="even")

    p = add("dos", "histogram of eigenvalues against E/N")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--h", type=finite_float, required=True)
    p.add_argument("--parity", type=parity_choice, default="even")
    p.add_argument("--bins", type=positive_int, default=100)

    for name, help_ in (("qfi-sweep", "QFI of one level over a field grid"),
                        ("protocol1", "magnetization-readout variance over a field grid")):
        p = add(name, help_)
        p.add_argument("--n", type=positive_int, required=True)
        p.add_argument("--k", type=int, default=None, help="level index (overrides --fraction)")
        p.add_argument("--fraction", type=finite_float, default=0.1)
        p.add_argument("--h-start", type=finite_float, default=0.0)
        p.add_argument("--h-stop", type=finite_float, default=1.0)
        p.add_argument("--h-count", type=positive_int, default=400)
        if name == "qfi-sweep":
            p.add_argument("--parity", type=parity_choice, default="even")
            p.add_argument("--no-refine", action="store_true")
        else:
            p.add_argument("--mixed", action="store_true", help="parity mixture of the two sectors")
            p.add_argument("--derivative", choices=("finite-difference", "perturbative"),
                           default="finite-difference")

    p = add("qfi-energy", "QFI of every level at fixed h")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--h", type=finite_float, required=True)
    p.add_argument("--parity", type=parity_choice, default="even")

    p = add("exponents", "finite-size exponent table")
    p.add_argument("--n-list", type=_list_of(positive_int), default=(200, 400, 600, 800, 1200, 1600))
    p.add_argument("--fractions", type=_list_of(float), default=(0.1, 0.2, 0.3))
    p.add_argument("--width-fractions", type=_list_of(float), default=(0.1, 0.2))
    p.add_argument("--energy-fields", type=_list_of(float), default=(0.2, 0.4))
    p.add_argument("--h-count", type=positive_int, default=400)
    p.add_argument("--approach", choices=("extremal", "fixed"), default="extremal")
    p.add_argument("--approach-offset", type=finite_float, default=1e-3)
    p.add_argument("--quantities", type=_list_of(str),
                   default=("field", "spacing", "energy", "magnetization", "ground"))

    p = add("protocol2", "Monte-Carlo run of the phase-difference protocol")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--h", type=finite_float, required=True)
    p.add_argument("--bits", type=positive_int, default=12)
    p.add_argument("--dt", type=parse_time, default=math.pi)
    p.add_argument("--shots", type=positive_int, default=200)
    p.add_argument("--repeats", type=positive_int, default=1, help="consecutive seeds starting at --seed")
    p.add_argument("--prep", choices=("all-down", "gibbs"), default="all-down")
    p.add_argument("--beta", type=finite_float, default=None)
    p.add_argument("--mode", choices=("quantized", "exact", "ideal"), default="quantized")

    p = add("thresholds", "register sizes where the phase protocol wins; prints d1,d2,d3")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--dt", type=parse_time, default=math.pi)
    p.add_argument("--max-bits", type=positive_int, default=24)

    p = add("robustness", "noise-exponent map or perturbation first-order ratios")
    p.add_argument("--mode", choices=("exponent", "perturbation"), default="exponent")
    p.add_argument("--gamma", type=finite_float, default=2.07)
    p.add_argument("--mu", type=finite_float, default=-0.227)
    p.add_argument("--nu", type=finite_float, default=1.3)
    p.add_argument("--grid", type=positive_int, default=21)
    p.add_argument("--perturbation", default="sx2")
    p.add_argument("--matrix-file", default=None,
                   help=".npz archive with one dense symmetric matrix per size (each N in --n-list and N+1), keyed N<size>, "
                        "rows and columns ordered m = -N/2, ..., N/2 (overrides --perturbation)")
    p.add_argument("--alpha", type=finite_float, default=1.0)
    p.add_argument("--g", type=finite_float, default=0.1)
    p.add_argument("--n-list", type=_list_of(positive_int), default=(200, 400, 800))
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--fraction", type=finite_float, default=0.1)
    p.add_argument("--h", type=finite_float, default=0.3)
    p.add_argument("--dt", type=parse_time, default=math.pi)
    return parser


def load_config(path: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["config"].items()}


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    path = _config_path(argv)
    command = argv[0] if argv and argv[0] in COMMANDS else None
    if path and command:
        values = load_config(path)
        sub = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, raw in values.items():
            if key in ("config", "help") or key not in actions:
                raise ConfigError(f"unknown config key {key!r} for command {command}")
            act = actions[key]
            defaults[key] = parse_bool(raw) if act.nargs == 0 else raw
            act.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _output_path(args) -> str:
    if args.output:
        return args.output
    return os.path.join(os.environ.get(OUTPUT_ENV, "."), f"{args.command}.{args.format}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"lmg-esqpt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"lmg-esqpt: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        table = COMMANDS[args.command](args)
        table.metadata = {"version": __version__, "command": args.command, "seed": args.seed,
                          **table.metadata}
        if args.command == "thresholds":
            print(",".join(str(d) for d in table.metadata["thresholds"]))
            if not args.output:
                return EXIT_OK
        path = _output_path(args)
        write_atomic(path, render(table, args.format))
        if args.command != "thresholds":
            print(path)
    except (ConfigError, ValueError) as exc:
        print(f"lmg-esqpt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LmgError as exc:
        print(f"lmg-esqpt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"lmg-esqpt: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
