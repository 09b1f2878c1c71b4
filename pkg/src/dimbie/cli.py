"""Batch front-end: ``python -m dimbie.cli run experiment.ini``.

One INI file describes one experiment.  Results are CSV files with
``#``-prefixed metadata lines echoing every parameter that affects the
numbers, followed by a header row and data rows at 17 significant digits.
See README.md for the configuration keys.
"""

import argparse
import configparser
import csv
import logging
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger("dimbie")

EXPERIMENTS = ("greens-identity", "cfie-dirichlet", "direct-neumann", "elastodynamic-neumann",
               "spectrum", "nearfield-map")

# section -> key -> default (None means required or shape-dependent)
SCHEMA = {
    "experiment": {"kind": None, "seed": "0"},
    "geometry": {"shape": "", "M": "", "mesh": ""},
    "pde": {"kind": None, "omega": "0", "c": "1", "lam": "1", "mu": "1", "rho": "1"},
    "quadrature": {"p": "4", "P": "6"},
    "interpolant": {"t": "5", "L": "auto"},
    "solver": {"tol": "1e-10", "restart": "200", "max_iter": "1000", "precond": "none", "mode": "auto"},
    "reference": {"kind": "", "x_s": "", "q": "", "direction": "", "sphere_radius": ""},
    "nearfield": {"threshold": "1.0", "grid": "61", "extent": "", "band": "0.3"},
    "output": {"dir": "results", "prefix": ""},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the section and key."""


def _floats(text, section, key):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected numbers, got {text!r}") from None


def _ints(text, section, key):
    vals = _floats(text, section, key)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"[{section}] {key}: expected integers, got {text!r}")
    return [int(v) for v in vals]


@dataclass
class RunConfig:
    kind: str
    pde: object
    shape: str
    M: list
    meshes: list
    p: list
    P: list
    t: float
    L: int
    solver: object
    reference: dict
    nearfield: dict
    out_dir: Path
    prefix: str
    seed: int
    raw: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.pde.dim

    @property
    def orders(self) -> list:
        """Quadrature orders swept: Gauss ``p`` for analytic shapes, triangle ``P`` for meshes."""
        return self.P if self.meshes else self.p


def load_config(path) -> RunConfig:
    """Parse and validate an experiment file."""
    from .geometry import SHAPES
    from .kernels import PdeKind
    from .solver import SystemConfig

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")
    for section, keys in SCHEMA.items():
        raw[section] = {}
        for key, default in keys.items():
            if parser.has_option(section, key):
                raw[section][key] = parser.get(section, key).strip()
            elif default is None:
                raise ConfigError(f"[{section}] {key}: required key missing")
            else:
                raw[section][key] = default

    kind = raw["experiment"]["kind"]
    if kind not in EXPERIMENTS:
        raise ConfigError(f"[experiment] kind: {kind!r} is not one of {', '.join(EXPERIMENTS)}")
    seed = _ints(raw["experiment"]["seed"], "experiment", "seed")[0]

    geo = raw["geometry"]
    shape = geo["shape"]
    meshes = [Path(s.strip()) for s in geo["mesh"].split(",") if s.strip()]
    if bool(shape) == bool(meshes):
        raise ConfigError("[geometry] shape/mesh: give exactly one of them")
    meshes = [m if m.is_absolute() else (path.parent / m) for m in meshes]
    for m in meshes:
        if not m.is_file():
            raise ConfigError(f"[geometry] mesh: file {m} not found")
    if shape and shape not in SHAPES:
        raise ConfigError(f"[geometry] shape: unknown shape {shape!r}; available: {', '.join(SHAPES)}")
    M = _ints(geo["M"], "geometry", "M") if shape else []
    if shape and not M:
        raise ConfigError("[geometry] M: required with an analytic shape")
    dim = 2 if shape.endswith("2d") else 3

    pd = raw["pde"]
    nums = {k: _floats(pd[k], "pde", k)[0] for k in ("omega", "c", "lam", "mu", "rho")}
    try:
        pde = PdeKind(pd["kind"], dim, **nums)
    except ValueError as exc:
        raise ConfigError(f"[pde] kind: {exc}") from None

    p = _ints(raw["quadrature"]["p"], "quadrature", "p")
    P = _ints(raw["quadrature"]["P"], "quadrature", "P")
    t = _floats(raw["interpolant"]["t"], "interpolant", "t")[0]
    if t <= 1:
        raise ConfigError("[interpolant] t: must exceed 1")
    L = 0 if raw["interpolant"]["L"] == "auto" else _ints(raw["interpolant"]["L"], "interpolant", "L")[0]

    sv = raw["solver"]
    if sv["precond"] not in ("none", "diagonal"):
        raise ConfigError("[solver] precond: must be none or diagonal")
    if sv["mode"] not in ("auto", "dense", "matrix-free"):
        raise ConfigError("[solver] mode: must be auto, dense or matrix-free")
    solver = SystemConfig(tol=_floats(sv["tol"], "solver", "tol")[0],
                          restart=_ints(sv["restart"], "solver", "restart")[0],
                          max_iter=_ints(sv["max_iter"], "solver", "max_iter")[0],
                          precond=sv["precond"], mode=sv["mode"], t=t, L=L)

    ref = raw["reference"]
    reference = {"kind": ref["kind"] or _default_reference(kind)}
    for key in ("x_s", "q", "direction"):
        if ref[key]:
            vec = np.array(_floats(ref[key], "reference", key))
            if len(vec) != dim:
                raise ConfigError(f"[reference] {key}: needs {dim} components")
            reference[key] = vec
    if ref["sphere_radius"]:
        reference["sphere_radius"] = _floats(ref["sphere_radius"], "reference", "sphere_radius")[0]
        if reference["sphere_radius"] <= 0:
            raise ConfigError("[reference] sphere_radius: must be positive")
    _check_experiment(kind, pde, reference["kind"], shape, bool(meshes))

    nf = raw["nearfield"]
    nearfield = {"threshold": _floats(nf["threshold"], "nearfield", "threshold")[0],
                 "grid": _ints(nf["grid"], "nearfield", "grid")[0],
                 "band": _floats(nf["band"], "nearfield", "band")[0],
                 "extent": _floats(nf["extent"], "nearfield", "extent") if nf["extent"] else None}
    out_dir = Path(raw["output"]["dir"])
    out_dir = out_dir if out_dir.is_absolute() else path.parent / out_dir
    return RunConfig(kind, pde, shape, M, meshes, p, P, t, L, solver, reference, nearfield, out_dir,
                     raw["output"]["prefix"], seed, raw)


def _default_reference(kind):
    return {"elastodynamic-neumann": "plane-p-wave", "spectrum": "none"}.get(kind, "point-source")


def _check_experiment(kind, pde, ref, shape, meshed):
    needs = {"cfie-dirichlet": "helmholtz", "spectrum": "helmholtz", "nearfield-map": "helmholtz",
             "elastodynamic-neumann": "elastodynamic"}
    if kind in needs and pde.kind != needs[kind]:
        raise ConfigError(f"[pde] kind: experiment {kind} needs the {needs[kind]} equation")
    allowed = {"greens-identity": ("point-source",),
               "cfie-dirichlet": ("point-source", "circle-series", "sphere-series"),
               "direct-neumann": ("point-source",),
               "elastodynamic-neumann": ("plane-p-wave",),
               "spectrum": ("none",),
               "nearfield-map": ("point-source",)}[kind]
    if ref not in allowed:
        raise ConfigError(f"[reference] kind: {ref!r} not usable with {kind}; choose from {', '.join(allowed)}")
    if ref == "circle-series" and shape != "circle2d":
        raise ConfigError("[reference] kind: circle-series needs shape = circle2d")
    if ref == "sphere-series" and (meshed or shape != "sphere3d-quadpatch"):
        raise ConfigError("[reference] kind: sphere-series needs shape = sphere3d-quadpatch")
    if kind == "nearfield-map" and shape not in ("kite2d", "circle2d"):
        raise ConfigError("[geometry] shape: nearfield-map is implemented for 2D curves")


# -- result tables -------------------------------------------------------------

def fit_slope(h, errors, last: int = 4) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)`` over the last
    ``min(last, rows)`` rows with a positive, finite error."""
    h, errors = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    ok = (errors > 0) & np.isfinite(errors) & (h > 0)
    h, errors = h[ok], errors[ok]
    if len(h) < 3:
        raise ValueError(f"need at least 3 usable rows to fit a slope, got {len(h)}")
    h, errors = h[-last:], errors[-last:]
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **row):
        self.rows.append([row[c] for c in self.columns])

    def column(self, name):
        return np.array([r[self.columns.index(name)] for r in self.rows], dtype=float)

    def sort(self, key="N"):
        k = self.columns.index(key)
        self.rows.sort(key=lambda r: r[k])

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            for key, val in self.metadata.items():
                fh.write(f"# {key}: {_fmt(val)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(v) for v in r])


def read_table(path) -> ResultTable:
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return ResultTable(rows[0], [[float(v) if v else np.nan for v in r] for r in rows[1:]], meta)


def version_string() -> str:
    from importlib import metadata
    try:
        ver = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        ver = "unknown"
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"artifact {ver}" + (f" ({rev})" if rev else "")


def _metadata(cfg: RunConfig, order) -> dict:
    meta = {"version": version_string(), "experiment": cfg.kind, "order": order}
    for section, keys in cfg.raw.items():
        for key, val in keys.items():
            meta[f"{section}.{key}"] = val
    return meta


# -- experiments -----------------------------------------------------------------

def _levels(cfg: RunConfig, order):
    """Yield ``(label, quadrature)`` for each refinement level."""
    from .geometry import RuleSpec, analytic_shape, build_global_quadrature
    from .mesh import parse_gmsh
    if cfg.meshes:
        rules = RuleSpec(P_triangle=order, p=max(cfg.p))
        for path in cfg.meshes:
            model = parse_gmsh(path)
            yield len(model.patches), build_global_quadrature(model.patches, rules)
    else:
        for M in cfg.M:
            yield M, build_global_quadrature(analytic_shape(cfg.shape, M), RuleSpec(p=order))


def _mesh_size(quad) -> float:
    """``N^(-1/(d-1))``: node spacing that scales uniformly with refinement.
    The largest patch diameter does not, on stretched cube-sphere maps."""
    return quad.N ** (-1.0 / (quad.dim - 1))


def _point_source(cfg, default):
    from .solver import PointSource
    x_s = cfg.reference.get("x_s", np.asarray(default, dtype=float)[:cfg.dim])
    return PointSource(cfg.pde, x_s, cfg.reference.get("q"))


def run_greens_identity(cfg: RunConfig, order) -> ResultTable:
    from .operators import DimContext
    from .solver import greens_identity_errors
    src = _point_source(cfg, (1.0, 1.0, 1.0))
    tab = ResultTable(["N", "h", "order", "M", "E1", "E2", "wall_time"])
    for M, quad in _levels(cfg, order):
        t0 = time.perf_counter()
        ctx = DimContext.build(cfg.pde, quad, cfg.t, cfg.L)
        e1, e2 = greens_identity_errors(cfg.pde, quad, src, ctx=ctx)
        tab.add(N=quad.N, h=_mesh_size(quad), order=order, M=M, E1=e1, E2=e2, wall_time=time.perf_counter() - t0)
        log.info("greens-identity order=%s M=%s N=%d E1=%.3e E2=%.3e", order, M, quad.N, e1, e2)
    return tab


def _dirichlet_reference(cfg):
    from .solver import far_field_targets, reference_series
    targets = far_field_targets(cfg.dim)
    ref = cfg.reference["kind"]
    if ref == "point-source":
        src = _point_source(cfg, (0.0, 0.0, 0.0))
        return targets, (lambda r: src.value(r).reshape(-1)), src.value(targets).reshape(-1)
    series = reference_series(ref, cfg.pde.k)
    return targets, (lambda r: -series.incident(r)), series.scattered(targets)


def run_cfie_dirichlet(cfg: RunConfig, order) -> ResultTable:
    from .operators import DimContext
    from .solver import combined_field, far_field_error, solve_cfie_dirichlet
    targets, data, u_ref = _dirichlet_reference(cfg)
    tab = ResultTable(["N", "h", "order", "M", "E_far", "iterations", "residual", "wall_time"])
    for M, quad in _levels(cfg, order):
        t0 = time.perf_counter()
        ctx = DimContext.build(cfg.pde, quad, cfg.t, cfg.L)
        phi, rep, _ = solve_cfie_dirichlet(cfg.pde, quad, data(quad.nodes), cfg.solver, ctx)
        u = combined_field(cfg.pde, quad, phi, targets, cfg.pde.k).reshape(-1)
        err = far_field_error(u, u_ref)
        tab.add(N=quad.N, h=_mesh_size(quad), order=order, M=M, E_far=err, iterations=rep.iterations,
                residual=rep.residual, wall_time=time.perf_counter() - t0)
        log.info("cfie order=%s M=%s N=%d E_far=%.3e its=%d", order, M, quad.N, err, rep.iterations)
    return tab


def _data_points(cfg, quad):
    """Where the boundary data are sampled: the nodes themselves, or with
    ``sphere_radius`` set their radial projections onto the exact sphere, so
    that the geometric error of the mesh shows up in the solution."""
    R = cfg.reference.get("sphere_radius")
    if R is None:
        return quad.nodes, quad.normals
    n = quad.nodes / np.linalg.norm(quad.nodes, axis=1)[:, None]
    return R * n, n


def run_direct_neumann(cfg: RunConfig, order) -> ResultTable:
    from .operators import DimContext
    from .solver import direct_neumann_field, far_field_error, far_field_targets, solve_direct_neumann
    src = _point_source(cfg, (0.1, 0.2, 0.3))
    targets = far_field_targets(cfg.dim)
    u_ref = src.value(targets).reshape(-1)
    tab = ResultTable(["N", "h", "order", "M", "E_far", "E_trace", "iterations", "residual", "wall_time"])
    for M, quad in _levels(cfg, order):
        t0 = time.perf_counter()
        ctx = DimContext.build(cfg.pde, quad, cfg.t, cfg.L)
        x, n = _data_points(cfg, quad)
        g = src.traction(x, n).reshape(-1)
        phi, rep = solve_direct_neumann(cfg.pde, quad, g, cfg.solver, ctx)
        trace = src.value(x).reshape(-1)
        e_trace = float(np.abs(phi - trace).max() / np.abs(trace).max())
        err = far_field_error(direct_neumann_field(cfg.pde, quad, phi, g, targets).reshape(-1), u_ref)
        tab.add(N=quad.N, h=_mesh_size(quad), order=order, M=M, E_far=err, E_trace=e_trace, iterations=rep.iterations,
                residual=rep.residual, wall_time=time.perf_counter() - t0)
        log.info("direct-neumann order=%s M=%s N=%d E_far=%.3e its=%d", order, M, quad.N, err, rep.iterations)
    return tab


def run_elastodynamic_neumann(cfg: RunConfig, order) -> ResultTable:
    from .operators import DimContext
    from .solver import combined_field, far_field_targets, plane_p_wave, solve_elastodynamic_neumann
    direction = cfg.reference.get("direction", np.eye(cfg.dim)[0])
    _, trac = plane_p_wave(cfg.pde, direction)
    targets = far_field_targets(cfg.dim)
    tab = ResultTable(["N", "h", "order", "M", "E_self", "iterations", "residual", "wall_time"])
    fields = []
    for M, quad in _levels(cfg, order):
        t0 = time.perf_counter()
        ctx = DimContext.build(cfg.pde, quad, cfg.t, cfg.L)
        h = -trac(quad.nodes, quad.normals).reshape(-1)
        phi, rep, _ = solve_elastodynamic_neumann(cfg.pde, quad, h, cfg.solver, ctx)
        fields.append(combined_field(cfg.pde, quad, phi, targets, cfg.pde.omega).reshape(-1))
        tab.add(N=quad.N, h=_mesh_size(quad), order=order, M=M, E_self=np.nan, iterations=rep.iterations,
                residual=rep.residual, wall_time=time.perf_counter() - t0)
        log.info("elastodynamic-neumann order=%s M=%s N=%d its=%d", order, M, quad.N, rep.iterations)
    finest = fields[-1]
    k = tab.columns.index("E_self")
    for row, u in zip(tab.rows, fields):
        row[k] = float(np.abs(u - finest).max() / np.abs(finest).max())
    return tab


def run_spectrum(cfg: RunConfig, order) -> ResultTable:
    from .operators import regularized_operator
    from .solver import spectrum
    label, quad = list(_levels(cfg, order))[-1]
    op = regularized_operator(cfg.pde, quad, "V", 1.0, 1j * cfg.pde.k, "dense", t=cfg.t, L=cfg.L)
    lam = spectrum(0.5 * np.eye(op.size) + op.matrix())
    dist = np.abs(lam - 0.5)
    tab = ResultTable(["re", "im"])
    for v in sorted(lam, key=lambda z: (z.real, z.imag)):
        tab.rows.append([float(v.real), float(v.imag)])
    tab.metadata.update(N=quad.N, M=label, fraction_within_half=float(np.mean(dist < 0.5)),
                        median_distance=float(np.median(dist)))
    return tab


def nearfield_errors(pde, quad, phi, targets, u_ref, threshold, ctx=None):
    """``log10`` absolute field errors with and without near-field regularization."""
    from .solver import combined_field
    out = []
    for reg in (True, False):
        u = combined_field(pde, quad, phi, targets, pde.k, near_regularize=reg, near_threshold=threshold,
                           ctx=ctx).reshape(-1)
        out.append(np.log10(np.maximum(np.abs(u - u_ref), 1e-300)))
    return out


def exterior_grid(quad, extent, n):
    """Grid points outside the curve, with their distance to the nearest node."""
    from scipy.spatial import cKDTree
    x0, x1, y0, y1 = extent
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    dist, j = cKDTree(quad.nodes).query(pts)
    outside = np.einsum("ni,ni->n", pts - quad.nodes[j], quad.normals[j]) > 0
    keep = outside & (dist > 1e-3)
    return pts[keep], dist[keep]


def run_nearfield_map(cfg: RunConfig, order) -> ResultTable:
    from .operators import DimContext
    from .solver import solve_cfie_dirichlet
    src = _point_source(cfg, (0.0, 0.0))
    label, quad = list(_levels(cfg, order))[-1]
    ctx = DimContext.build(cfg.pde, quad, cfg.t, cfg.L)
    phi, rep, _ = solve_cfie_dirichlet(cfg.pde, quad, src.value(quad.nodes).reshape(-1), cfg.solver, ctx)
    extent = cfg.nearfield["extent"] or [-2.5, 2.0, -2.25, 2.25]
    pts, dist = exterior_grid(quad, extent, cfg.nearfield["grid"])
    on, off = nearfield_errors(cfg.pde, quad, phi, pts, src.value(pts).reshape(-1),
                               cfg.nearfield["threshold"], ctx)
    tab = ResultTable(["x", "y", "distance", "log10_error_regularized", "log10_error_plain"])
    for row in zip(pts[:, 0], pts[:, 1], dist, on, off):
        tab.rows.append([float(v) for v in row])
    band = dist < cfg.nearfield["band"]
    tab.metadata.update(N=quad.N, M=label, iterations=rep.iterations,
                        band_max_log10_regularized=float(on[band].max()),
                        band_max_log10_plain=float(off[band].max()))
    return tab


RUNNERS = {
    "greens-identity": run_greens_identity,
    "cfie-dirichlet": run_cfie_dirichlet,
    "direct-neumann": run_direct_neumann,
    "elastodynamic-neumann": run_elastodynamic_neumann,
    "spectrum": run_spectrum,
    "nearfield-map": run_nearfield_map,
}
SLOPE_COLUMNS = {"greens-identity": ("E1", "E2"), "cfie-dirichlet": ("E_far",),
                 "direct-neumann": ("E_far", "E_trace"), "elastodynamic-neumann": ("E_self",)}


def run(cfg: RunConfig) -> list:
    """Run every order of the experiment; returns the written CSV paths."""
    written = []
    for order in cfg.orders:
        tab = RUNNERS[cfg.kind](cfg, order)
        if cfg.kind in SLOPE_COLUMNS:
            tab.sort("N")
            for col in SLOPE_COLUMNS[cfg.kind]:
                try:
                    tab.metadata[f"slope_{col}"] = fit_slope(tab.column("h"), tab.column(col))
                except ValueError:
                    tab.metadata[f"slope_{col}"] = "n/a"
        tab.metadata = {**_metadata(cfg, order), **tab.metadata}
        name = f"{cfg.prefix}{cfg.kind}_{cfg.pde.kind}_{cfg.dim}d_order{order}.csv"
        tab.write(cfg.out_dir / name)
        written.append(cfg.out_dir / name)
    return written


# -- entry point -----------------------------------------------------------------

def _list_shapes():
    from .geometry import SHAPES
    notes = {"kite2d": "M arcs of equal length", "circle2d": "M arcs of equal length",
             "sphere3d-quadpatch": "M = 6 n^2 quadrilaterals", "bean3d": "M = 6 n^2 quadrilaterals",
             "acorn3d": "M = 6 n^2 quadrilaterals", "torus3d": "M = 2 n^2 quadrilaterals"}
    for s in SHAPES:
        print(f"{s:20s} {notes.get(s, '')}")


def _list_rules():
    from .quadrature import available_triangle_rules, lebedev_counts
    print("curve segments:  Gauss-Legendre, p = 1..64 nodes")
    print("quadrilaterals:  tensor Gauss-Legendre, p x p nodes")
    print("triangles:       P = " + ", ".join(str(P) for P in available_triangle_rules()))
    print("Lebedev sources: L = " + ", ".join(str(n) for n in lebedev_counts()))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dimbie", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None, help="BLAS threads (1 gives bit-reproducible output)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
    sub.add_parser("list-shapes")
    sub.add_parser("list-rules")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    limiter = None
    if args.threads is not None:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(args.threads)
    try:
        if args.command == "list-shapes":
            _list_shapes()
            return 0
        if args.command == "list-rules":
            _list_rules()
            return 0
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.kind}, {cfg.pde.kind} {cfg.dim}d)")
            return 0
        try:
            for path in run(cfg):
                print(path)
        except Exception as exc:  # numerical failure: keep whatever was written
            log.error("run failed: %s", exc)
            return 1
        return 0
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
