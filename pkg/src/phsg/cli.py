"""Command-line front end: ``phsg <command> [options]``.

Commands write CSV files named ``<command>_<model>_<d>_<variation>.csv`` whose
first line is ``# {json provenance}``.  Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp

from . import __version__
from ._validation import DimensionError, StructureError
from .analysis import UnstableSystemError, bode, rel_h2_difference
from .models import parametrize, parse_preset
from .mor import (
    ArnoldiReducer,
    BalancedTruncationReducer,
    IRKAReducer,
    PairingError,
    error_sweep,
)
from .pce_basis import ChaosBasis, tensor_gauss_rule
from .ph_core import to_lti
from .sg_assembly import (
    assemble_sg,
    assemble_sg_general,
    export_matrix_market,
    lift_input,
    restrict_io,
    sg_state_map,
)
from .timestepper import (
    StepSizeError,
    chirp,
    hamiltonian_trace,
    sampled_expected_hamiltonian,
    sg_output_statistics,
    simulate,
)

log = logging.getLogger("phsg")

TRANSFORMS = ("none", "basis-sqrt", "basis-cholesky", "image")
IO_MODES = ("SISO", "SIMO", "MIMO")
METHODS = ("arnoldi", "irka", "bt")
INPUTS = ("chirp", "zero")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """Inconsistent or out-of-range command-line configuration."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str = "motor"
    transform: str = "image"
    degree: int = 2
    variation: float = 1.0
    quad_points: int = 7
    io_mode: str = "SIMO"
    method: str = "bt"
    r_min: int = 5
    r_max: int = 60
    rtol: float = 1e-8
    atol: float = 1e-10
    t_end: float = 300.0
    dt: float = 0.01
    out_dir: str = "."
    seed: int = 0  # recorded for provenance; every computation is deterministic
    oracle_nodes: int = 0
    omega_min: float = 1.0
    omega_max: float = 1e7
    points: int = 400
    input: str = "chirp"

    def validate(self):
        try:
            parse_preset(self.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        allowed = TRANSFORMS + (("all",) if self.command == "convergence" else ())
        if self.transform not in allowed:
            raise ConfigError(f"--transform must be one of {TRANSFORMS}")
        if self.io_mode not in IO_MODES:
            raise ConfigError(f"--io-mode must be one of {IO_MODES}")
        if self.method not in METHODS:
            raise ConfigError(f"--method must be one of {METHODS}")
        if self.degree < 0:
            raise ConfigError("--degree must be non-negative")
        if not 0 < self.variation < 100:
            raise ConfigError("--variation must lie in (0, 100)")
        if self.quad_points < 1 or self.oracle_nodes < 0:
            raise ConfigError("quadrature sizes must be positive")
        if not (self.rtol > 0 and self.atol > 0 and self.t_end > 0 and self.dt > 0):
            raise ConfigError("tolerances, --t-end and --dt must be positive")
        if not 1 <= self.r_min <= self.r_max:
            raise ConfigError("need 1 <= --r-min <= --r-max")
        if self.points < 2 or not 0 < self.omega_min < self.omega_max:
            raise ConfigError("invalid frequency grid")
        if self.input not in INPUTS:
            raise ConfigError(f"--input must be one of {INPUTS}")
        if self.command in ("mor",) and self.transform == "none":
            raise ConfigError("structure-preserving reduction needs --transform other than none")
        return self


def _psys(cfg):
    name, opts = parse_preset(cfg.model)
    return parametrize(name, cfg.variation, **opts)


def _transformed(psys, transform):
    if transform == "image":
        return psys.image_transform()
    if transform.startswith("basis-"):
        return psys.basis_transform(transform.split("-", 1)[1])
    raise ConfigError(f"transform {transform!r} does not give a pH SG system")


def _basis(psys, degree):
    return ChaosBasis(psys.q, degree)


def _provenance(cfg, **extra):
    data = {"tool": "phsg", "version": __version__, "config": asdict(cfg)}
    data.update(extra)
    return data


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return format(float(v), ".17g")


def _out_path(cfg, suffix=""):
    name = parse_preset(cfg.model)[0]
    os.makedirs(cfg.out_dir, exist_ok=True)
    fname = f"{cfg.command}_{name}_{cfg.degree}_{cfg.variation:g}{suffix}.csv"
    return os.path.join(cfg.out_dir, fname)


def write_csv(path, header, rows, provenance):
    """CSV with a JSON provenance comment line and 17-digit numbers."""
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(provenance, header, rows)`` with string cells."""
    with open(path) as fh:
        first = fh.readline()
        prov = json.loads(first[2:])
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return prov, header, rows


def cmd_sg_build(cfg):
    psys = _psys(cfg)
    basis = _basis(psys, cfg.degree)
    prefix = f"sg_{parse_preset(cfg.model)[0]}_{cfg.degree}_{cfg.variation:g}"
    if cfg.transform == "none":
        lti = assemble_sg_general(psys, basis, points_per_dim=cfg.quad_points)
        os.makedirs(cfg.out_dir, exist_ok=True)
        for k in "EABCD":
            scipy.io.mmwrite(os.path.join(cfg.out_dir, f"{prefix}_{k}.mtx"),
                             sp.coo_matrix(getattr(lti, k)), precision=17)
        report = {"structure": "none", "passed": None,
                  "note": "projection of the untransformed system is not in pH form"}
        meta = {"dim": lti.n, "s": basis.s, "n_inputs": lti.n_inputs, "n_outputs": lti.n_outputs}
    else:
        sg = assemble_sg(_transformed(psys, cfg.transform), basis, points_per_dim=cfg.quad_points)
        export_matrix_market(sg, cfg.out_dir, prefix, provenance=_provenance(cfg))
        rep = sg.validate()
        report = {"structure": "pH", **rep.to_dict()}
        meta = sg.metadata()
        meta["dim"] = sg.dim
        meta["nonzero_ratios"] = sg.nonzero_ratios()
    path = os.path.join(cfg.out_dir, f"{prefix}_report.json")
    with open(path, "w") as fh:
        json.dump(_provenance(cfg, system=meta, validation=report), fh, indent=1, sort_keys=True,
                  default=_json_default)
    print(f"SG system dimension {meta['dim']} (s={basis.s}); report: {path}")
    return 0


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def cmd_convergence(cfg):
    psys = _psys(cfg)
    transforms = ["basis-sqrt", "image"] if cfg.transform == "all" else [cfg.transform]
    rows = []
    for d in range(1, cfg.degree + 1):
        basis = _basis(psys, d)
        H0 = assemble_sg_general(psys, basis, points_per_dim=cfg.quad_points)
        for tr in transforms:
            if tr == "none":
                Hi, M = H0, np.eye(H0.n)
            else:
                pt = _transformed(psys, tr)
                Hi = assemble_sg(pt, basis, points_per_dim=cfg.quad_points).to_lti()
                M = sg_state_map(pt, basis, points_per_dim=cfg.quad_points)
            vals = [rel_h2_difference(restrict_io(H0, basis.s, mode), restrict_io(Hi, basis.s, mode), M)
                    for mode in IO_MODES]
            rows.append([d, tr, *vals])
            log.info("degree %d %s: %s", d, tr, vals)
    path = write_csv(_out_path(cfg), ["degree", "transform", *IO_MODES], rows, _provenance(cfg))
    print(f"wrote {path}")
    return 0


def cmd_simulate(cfg):
    psys = _psys(cfg)
    basis = _basis(psys, cfg.degree)
    if cfg.transform == "none":
        sg = None
        lti = assemble_sg_general(psys, basis, points_per_dim=cfg.quad_points)
    else:
        sg = assemble_sg(_transformed(psys, cfg.transform), basis, points_per_dim=cfg.quad_points)
        lti = sg.to_lti()
    m = psys.mean_system().m
    lti = restrict_io(lti, basis.s, cfg.io_mode)

    def base_u(t):
        return np.full(m, chirp(t) if cfg.input == "chirp" else 0.0)

    u = lift_input(base_u, basis.s) if cfg.io_mode == "MIMO" else base_u
    steps = int(round(cfg.t_end / cfg.dt))
    t_eval = np.linspace(0.0, steps * cfg.dt, steps + 1)
    res = simulate(lti, u, t_span=(0.0, t_eval[-1]), rtol=cfg.rtol, atol=cfg.atol, t_eval=t_eval)
    header = ["t"]
    cols = [res.t]
    if cfg.io_mode == "SISO":
        header += [f"y{k}" for k in range(res.y.shape[1])]
        cols += list(res.y.T)
    else:
        mean, std = sg_output_statistics(res, basis.s)
        header += [f"mean{k}" for k in range(mean.shape[1])] + [f"std{k}" for k in range(std.shape[1])]
        cols += list(mean.T) + list(std.T)
    if sg is not None:
        H = hamiltonian_trace(res, sg)
        header.append("hamiltonian")
        cols.append(H)
        if cfg.oracle_nodes:
            rule = tensor_gauss_rule(psys.box, cfg.oracle_nodes)
            EH = sampled_expected_hamiltonian(psys, rule, base_u, t_eval,
                                              rtol=cfg.rtol, atol=cfg.atol)
            header += ["oracle_hamiltonian", "difference"]
            cols += [EH, H - EH]
    path = write_csv(_out_path(cfg), header, np.column_stack(cols), _provenance(cfg, stats=res.stats))
    print(f"wrote {path} ({res.stats['n_steps']} steps)")
    return 0


def cmd_mor(cfg):
    psys = _psys(cfg)
    basis = _basis(psys, cfg.degree)
    sg = assemble_sg(_transformed(psys, cfg.transform), basis, points_per_dim=cfg.quad_points)
    reducer = {
        "arnoldi": lambda: ArnoldiReducer(r_max=cfg.r_max),
        "irka": lambda: IRKAReducer(),
        "bt": lambda: BalancedTruncationReducer(io_mode=cfg.io_mode),
    }[cfg.method]().fit(sg)
    out = error_sweep(sg, reducer, range(cfg.r_min, cfg.r_max + 1), io_mode=cfg.io_mode)
    rows = list(zip(out["r"], out["error"], out["stable"], out["ph_valid"]))
    prov = _provenance(cfg, failures={str(k): v for k, v in out["failures"].items()})
    path = write_csv(_out_path(cfg, f"_{cfg.method}"), ["r", "error", "stable", "ph_valid"], rows, prov)
    print(f"wrote {path}")
    if cfg.method == "bt":
        hsv = reducer.hankel_values_
        hpath = write_csv(_out_path(cfg, "_hankel"), ["k", "hankel_value"],
                          [(k + 1, v) for k, v in enumerate(hsv)], _provenance(cfg))
        print(f"wrote {hpath}")
    for r, msg in out["failures"].items():
        log.warning("r=%d failed: %s", r, msg)
    return 0


def cmd_bode(cfg):
    psys = _psys(cfg)
    if cfg.degree == 0:
        mean = psys.mean_system()
        lti = to_lti(mean) if cfg.transform == "none" else to_lti(_transformed(psys, cfg.transform).mean_system())
    else:
        basis = _basis(psys, cfg.degree)
        if cfg.transform == "none":
            lti = assemble_sg_general(psys, basis, points_per_dim=cfg.quad_points)
        else:
            lti = assemble_sg(_transformed(psys, cfg.transform), basis,
                              points_per_dim=cfg.quad_points).to_lti()
        lti = restrict_io(lti, basis.s, cfg.io_mode)
    fr = bode(lti, cfg.omega_min, cfg.omega_max, cfg.points)
    q, p = fr.values.shape[1:]
    header = ["omega"]
    for i in range(q):
        for j in range(p):
            header += [f"mag_db_{i}_{j}", f"phase_deg_{i}_{j}"]
    mag, ph = fr.magnitude_db, fr.phase_deg
    cols = [fr.omega]
    for i in range(q):
        for j in range(p):
            cols += [mag[:, i, j], ph[:, i, j]]
    path = write_csv(_out_path(cfg), header, np.column_stack(cols), _provenance(cfg))
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "sg-build": cmd_sg_build,
    "convergence": cmd_convergence,
    "simulate": cmd_simulate,
    "mor": cmd_mor,
    "bode": cmd_bode,
}

_DEFAULTS = {
    "sg-build": {},
    "convergence": {"degree": 4, "variation": 1.0, "transform": "all"},
    "simulate": {"degree": 4, "variation": 1.0, "transform": "basis-sqrt"},
    "mor": {"model": "ladder:k=5", "degree": 2, "variation": 10.0},
    "bode": {"degree": 0},
}


def build_parser():
    parser = argparse.ArgumentParser(prog="phsg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"phsg {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", help='preset: "motor" or "ladder:k=5"')
        p.add_argument("--transform", choices=TRANSFORMS + (("all",) if name == "convergence" else ()),
                       help="symmetric-decomposition or image transformation (default per command)")
        p.add_argument("--degree", type=int, help="total polynomial degree (maximum for convergence)")
        p.add_argument("--variation", type=float, help="parameter half-width in percent")
        p.add_argument("--quad-points", type=int, help="Gauss points per dimension for non-polynomial entries")
        p.add_argument("--io-mode", choices=IO_MODES)
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int)
        if name == "simulate":
            p.add_argument("--rtol", type=float)
            p.add_argument("--atol", type=float)
            p.add_argument("--t-end", type=float)
            p.add_argument("--dt", type=float, help="output sampling interval")
            p.add_argument("--oracle-nodes", type=int, help="Gauss points per dimension of the sampling oracle")
            p.add_argument("--input", choices=INPUTS, help="sin(t^2) chirp (default) or zero input")
        if name == "mor":
            p.add_argument("--method", choices=METHODS)
            p.add_argument("--r-min", type=int)
            p.add_argument("--r-max", type=int)
        if name == "bode":
            p.add_argument("--omega-min", type=float)
            p.add_argument("--omega-max", type=float)
            p.add_argument("--points", type=int)
    return parser


def config_from_args(args):
    values = dict(_DEFAULTS[args.command])
    for key, val in vars(args).items():
        if key in RunConfig.__dataclass_fields__ and val is not None:
            values[key] = val
    values["command"] = args.command
    return RunConfig(**values).validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, DimensionError) as exc:
        print(f"phsg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, sla.LinAlgError, StepSizeError, UnstableSystemError,
            PairingError, StructureError, FloatingPointError) as exc:
        print(f"phsg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"phsg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
