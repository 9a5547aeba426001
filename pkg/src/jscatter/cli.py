"""Command-line front end: ``jscatter <command> --spec FILE [options]``."""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import io
from . import numeric as nm
from .background import orthogonality_table
from .direct import ValidationReport, scattering_data, validate_scattering
from .errors import ConfigError, JScatterError, NegativeDiagonal
from .glm import glm_kernel_table, inverse
from .steplike import dense_eigenvalues, spec_from_json

COMMANDS = ("bands", "direct", "inverse", "roundtrip", "validate")


@dataclass
class RunConfig:
    command: str
    spec: Path
    quad_nodes: int = 256
    grid: int = 200
    glm_window: int = 80
    report_range: tuple = (-40, 40)
    tol: float = 1e-10
    edge_offset: float = 1e-8
    workers: int = 1
    out: Path = Path(".")
    data: Path = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("quad_nodes", "grid", "glm_window", "workers"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.quad_nodes < 4 or self.grid < 4:
            raise ConfigError("quad_nodes and grid need at least 4 nodes per panel")
        if not (self.tol > 0 and self.edge_offset > 0):
            raise ConfigError("tol and edge_offset must be positive")
        lo, hi = self.report_range
        if lo > hi:
            raise ConfigError(f"empty report range {lo},{hi}")


def parse_range(text):
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from exc
    return lo, hi


def build_parser():
    p = argparse.ArgumentParser(prog="jscatter", description="Scattering for steplike Jacobi operators.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, type=Path, help="operator spec JSON")
    p.add_argument("--data", type=Path, help="scattering.json to use instead of sampling (inverse, validate)")
    p.add_argument("--quad-nodes", type=int, default=256, help="quadrature nodes per panel")
    p.add_argument("--grid", type=int, default=200, help="samples per panel for validation grids")
    p.add_argument("--glm-window", type=int, default=80, help="initial GLM window M")
    p.add_argument("--report-range", type=parse_range, default=(-40, 40), help="sites a,b to reconstruct")
    p.add_argument("--tol", type=float, default=1e-10, help="round-trip tolerance")
    p.add_argument("--edge-offset", type=float, default=1e-8, help="relative exclusion radius around edges")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    return p


def load_spec(path):
    # keep decimal literals exact: floats are parsed as strings
    obj = json.loads(Path(path).read_text(), parse_float=str)
    return spec_from_json(obj)


def _checks_json(rep):
    return [{"name": c.name, "value": c.value, "threshold": c.threshold, "pass": c.passed} for c in rep.checks]


def _bands(cfg, spec, rep):
    out = {}
    for side, model in (("left", spec.left), ("right", spec.right)):
        out[side] = model.to_json()
        tab = orthogonality_table(model, range(-3, 4), cfg.quad_nodes)
        dev = max(abs(tab[i][j] - (1 if i == j else 0)) for i in range(7) for j in range(7))
        rep.add(f"orthogonality_{side}", dev, 1e-8)
    io.write_json(cfg.out / "bands.json", out)


def _data(cfg, spec, nodes):
    if cfg.data is not None:
        return io.data_from_json(io.read_json(cfg.data), spec)
    return scattering_data(spec, nodes, workers=cfg.workers, edge_offset=cfg.edge_offset)


def _direct(cfg, spec, rep, data=None):
    data = data or _data(cfg, spec, cfg.quad_nodes)
    io.write_json(cfg.out / "scattering.json", io.data_to_json(data))
    io.write_band_csv(cfg.out, data)
    for c in validate_scattering(data).checks:
        rep.checks.append(c)
    dense = dense_eigenvalues(spec).gap_candidates
    ev = [float(e.lam) for e in data.eigenvalues]
    if len(ev) != len(dense):
        rep.add("dense_eigenvalues", float("inf"), 1e-8, f"{len(ev)} roots vs {len(dense)} dense")
    else:
        rep.add("dense_eigenvalues", max((abs(x - y) for x, y in zip(ev, dense)), default=0.0), 1e-8)
    return data


def _inverse(cfg, spec, rep, data=None):
    data = data or _data(cfg, spec, cfg.quad_nodes)
    try:
        res = inverse(data, spec, cfg.report_range, cfg.glm_window)
    except NegativeDiagonal as exc:
        rep.add("glm_positive_diagonal", 1, 0.5, str(exc))
        return None
    r = res.report
    io.write_kernels_csv(cfg.out / "kernels.csv", res)
    io.write_reconstruction_csv(cfg.out / "reconstruction.csv", r)
    rep.add("glm_residual", r.glm_residual, cfg.tol)
    rep.add("solution_residual", r.solution_residual, 1e-8)
    rep.add("coincidence_error", r.coincidence_error, cfg.tol)
    return res


def _validate(cfg, spec, rep):
    data = _data(cfg, spec, cfg.grid)
    report = validate_scattering(data)
    rep.checks.extend(report.checks)
    lo, hi = cfg.report_range
    M = cfg.glm_window
    for side, sg in (("+", 1), ("-", -1)):
        F = glm_kernel_table(data, spec, side, lo - M, hi + M)
        rep.add(f"kernel_symmetry_{side}", F.symmetry_defect, 1e-10)
        rep.add(f"kernel_reality_{side}", F.imag_residue, 1e-10)
        starts = [lo, lo + 10, lo + 20] if sg > 0 else [hi, hi - 10, hi - 20]
        diags = [F.diagnostics(s) for s in starts]
        ups = sum(1 for a, b in zip(diags, diags[1:]) for x, y in zip(a, b) if y > x)
        rep.add(f"kernel_decay_{side}", ups, 0.5, "decay-window sums not shrinking as the window moves outward")
    io.write_json(cfg.out / "validation.json", report.to_json())


@nm.precise
def run(cfg):
    """Execute one command; returns the exit status."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    rep = ValidationReport()
    spec = load_spec(cfg.spec)
    if cfg.command == "bands":
        _bands(cfg, spec, rep)
    elif cfg.command == "direct":
        _direct(cfg, spec, rep)
    elif cfg.command == "inverse":
        _inverse(cfg, spec, rep)
    elif cfg.command == "roundtrip":
        data = _direct(cfg, spec, rep)
        res = _inverse(cfg, spec, rep, data)
        if res is not None:
            rep.add("roundtrip_error", res.report.roundtrip_error, cfg.tol)
    else:
        _validate(cfg, spec, rep)
    code = 0 if rep.passed else 1
    io.write_json(cfg.out / "summary.json", {"command": cfg.command, "checks": _checks_json(rep), "exit": code})
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            args.command,
            args.spec,
            args.quad_nodes,
            args.grid,
            args.glm_window,
            args.report_range,
            args.tol,
            args.edge_offset,
            args.workers,
            args.out,
            args.data,
        )
        code = run(cfg)
    except (JScatterError, ValueError, OSError) as exc:
        print(f"jscatter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for c in json.loads((cfg.out / "summary.json").read_text())["checks"]:
        flag = "ok  " if c["pass"] else "FAIL"
        print(f"{flag} {c['name']:<24} {c['value']:.3e} (< {c['threshold']:.1e})")
    return code


if __name__ == "__main__":
    sys.exit(main())
