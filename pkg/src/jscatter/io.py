"""JSON and CSV serialization of scattering data and inverse results.

Extended-precision numbers are stored as decimal strings (80 significant
digits) so that a round trip through ``scattering.json`` keeps the working
precision; complex values are ``[re, im]`` pairs.
"""

import csv
import json
from pathlib import Path

from gmpy2 import mpc, mpfr

from . import numeric as nm
from .direct import EdgeProbe, Eigenvalue, Panel, ScatteringData, spectrum_partition

DIGITS = 80

_PANEL_COMPLEX = ("T_u", "T_l", "R_u", "R_l", "W_u", "Wt_u", "Wt_l", "rho_u", "rho_other_u")


def s(x):
    return nm.to_str(x, DIGITS)


def c(z):
    z = nm.cplx(z)
    return [s(z.real), s(z.imag)]


def parse_real(v):
    return mpfr(v)


def parse_complex(v):
    return mpc(mpfr(v[0]), mpfr(v[1]))


def _panel_json(p):
    out = {
        "side": p.side,
        "lo": s(p.lo),
        "hi": s(p.hi),
        "region": p.region,
        "nodes": [s(x) for x in p.nodes],
        "weights": [s(x) for x in p.weights],
    }
    for k in _PANEL_COMPLEX:
        out[k] = [c(z) for z in getattr(p, k)]
    return out


def _panel_from_json(obj):
    kw = {k: tuple(parse_complex(z) for z in obj[k]) for k in _PANEL_COMPLEX}
    return Panel(
        obj["side"],
        parse_real(obj["lo"]),
        parse_real(obj["hi"]),
        obj["region"],
        tuple(parse_real(x) for x in obj["nodes"]),
        tuple(parse_real(x) for x in obj["weights"]),
        **kw,
    )


@nm.precise
def data_to_json(data):
    """``scattering.json`` payload for a :class:`ScatteringData`."""
    ev = data.eigenvalues
    return {
        "eigenvalues": [s(e.lam) for e in ev],
        "gamma_plus": [s(e.gamma_plus) for e in ev],
        "gamma_minus": [s(e.gamma_minus) for e in ev],
        "c_plus": [s(e.c_plus) for e in ev],
        "c_minus": [s(e.c_minus) for e in ev],
        "dW": [s(e.dW) for e in ev],
        "virtual_levels": [s(x) for x in data.virtual_levels],
        "t_inf": [s(x) for x in data.t_inf],
        "node_count": data.node_count,
        "edges": [
            {
                "E": s(p.E),
                "side": p.side,
                "direction": p.direction,
                "W_hat": c(p.W_hat),
                "virtual": p.virtual,
                "allowed": p.allowed,
                "mhat": p.mhat,
                "R_limit": None if p.R_limit is None else c(p.R_limit),
            }
            for p in data.edges
        ],
        "gap_samples": [[s(x), c(w)] for x, w in data.gap_samples],
        "grids": {side: [_panel_json(p) for p in ps] for side, ps in data.panels.items()},
    }


@nm.precise
def data_from_json(obj, spec=None):
    """Inverse of :func:`data_to_json`; ``spec`` restores the partition."""
    ev = [
        Eigenvalue(*(parse_real(obj[k][i]) for k in ("eigenvalues", "gamma_plus", "gamma_minus", "c_plus", "c_minus", "dW")))
        for i in range(len(obj["eigenvalues"]))
    ]
    edges = [
        EdgeProbe(
            parse_real(e["E"]),
            e["side"],
            int(e["direction"]),
            parse_complex(e["W_hat"]),
            bool(e["virtual"]),
            bool(e["allowed"]),
            bool(e["mhat"]),
            None if e["R_limit"] is None else parse_complex(e["R_limit"]),
        )
        for e in obj.get("edges", [])
    ]
    panels = {side: [_panel_from_json(p) for p in ps] for side, ps in obj["grids"].items()}
    return ScatteringData(
        int(obj.get("node_count", 0)),
        panels,
        ev,
        edges,
        tuple(parse_real(x) for x in obj["t_inf"]),
        [(parse_real(x), parse_complex(w)) for x, w in obj.get("gap_samples", [])],
        spectrum_partition(spec) if spec is not None else None,
    )


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x):
    return f"{float(x):.17g}"


def write_band_csv(outdir, data):
    """One CSV per side and panel with columns lambda, Re T, Im T, Re R, Im R."""
    paths = []
    for side, ps in data.panels.items():
        tag = "plus" if side == "+" else "minus"
        for k, p in enumerate(ps):
            path = Path(outdir) / f"band_{tag}_{k}.csv"
            rows = [
                [_f(x), _f(T.real), _f(T.imag), _f(R.real), _f(R.imag)]
                for x, T, R in zip(p.nodes, p.T_u, p.R_u)
            ]
            _write_csv(path, ["lambda", "re_T", "im_T", "re_R", "im_R"], rows)
            paths.append(path)
    return paths


def write_kernels_csv(path, result):
    """``side, n, m, F, K`` for every solved row of both sides."""
    rows = []
    for side in ("+", "-"):
        F = result.kernels[side]
        sg = 1 if side == "+" else -1
        for r in result.rows[side]:
            for k, K in enumerate(r.K):
                m = r.n + sg * k
                rows.append([side, r.n, m, _f(F(r.n, m)), _f(K)])
    _write_csv(path, ["side", "n", "m", "F", "K"], rows)


def write_reconstruction_csv(path, rep):
    rows = [
        [n, _f(ap), _f(am), _f(bp), _f(bm), _f(a), _f(b)]
        for n, ap, am, bp, bm, a, b in zip(rep.sites, rep.a_plus, rep.a_minus, rep.b_plus, rep.b_minus, rep.a_true, rep.b_true)
    ]
    _write_csv(path, ["n", "a_plus", "a_minus", "b_plus", "b_minus", "a_true", "b_true"], rows)
