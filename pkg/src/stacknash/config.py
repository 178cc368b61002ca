"""Configuration parsing and problem construction.

Experiments are configured by an INI-style text file whose sections
mirror the library modules; every key has a documented default (the
shipped ``DEFAULT_CONFIG``), and any value can be overridden on the
command line with ``--override section.key=value``.

Coefficient, initial-state, control and target entries accept either a
constant or an expression in the spatial coordinate ``x`` (and ``y`` on
the rectangle), the time ``t`` and the Brownian value ``W``; expressions
using ``t`` or ``W`` produce adapted (per-node) fields.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .forward import Coefficients
from .geometry import build_mesh, assemble_generator, mask_from_interval
from .problem import ControlTriple, CostParams, FollowerPair, Problem, SolverOptions
from .tree import build_tree
from .weights import build_weights

__all__ = ["ProblemConfig", "DEFAULT_CONFIG", "parse_config", "build_problem", "config_hash"]

DEFAULT_CONFIG = """\
# stacknash experiment configuration (defaults shown; INI syntax).

[problem]
geometry = interval          ; interval | rectangle
n = 16                       ; nodes per direction (>= 3)
num_steps = 8                ; tree depth N_t (2^N_t leaves)
horizon = 1.0                ; time horizon T
extent = 1.0                 ; domain edge length
y0_bulk = sin(pi*x)          ; initial bulk state (expression in x[, y])
y0_boundary = 0.0            ; initial boundary state

[regions]
g0 = 0.3, 0.7                ; leader drift-control region
g1 = 0.1, 0.4                ; follower 1 region
g2 = 0.6, 0.9                ; follower 2 region
gd = 0.35, 0.65              ; shared observation region (must meet g0)
gprime = 0.45, 0.55          ; weight-profile core (must contain the vertex)

[coefficients]
a1 = 1.0                     ; bulk reaction
a2 = 0.5                     ; bulk noise
b1 = 1.0                     ; boundary reaction
b2 = 0.5                     ; boundary noise

[cost]
alpha1 = 1.0
alpha2 = 1.0
beta1 = 1e4
beta2 = 1e4
y1d = exp(-20*(x-0.45)**2)   ; follower 1 target profile (restricted to gd)
y2d = exp(-20*(x-0.55)**2)   ; follower 2 target profile
target_support = 0.75        ; targets vanish for t > target_support * horizon

[controls]
u1 = 0.0                     ; leader drift control (used by `forward`)
u2 = 0.0                     ; leader bulk noise control
u3 = 0.0                     ; leader boundary noise control
v1 = 0.0                     ; follower controls (used by `forward`)
v2 = 0.0

[weights]
lambda = 2.0
mu = 2.0
log_budget = 500.0           ; clamp for log-space exponentials

[hum]
eps = 1e-3                   ; penalty strength
penalty = quadratic          ; quadratic | norm
eps_target = 1e-3            ; acceptance threshold on E||Y(T)||^2
grad_tol_scale = 1e-8        ; gradient tolerance = scale * (1 + ||Y0||)
max_iters = 500

[solvers]
tol_picard = 1e-10
max_picard = 200
tol_cg = 1e-10
max_cg = 500
beta_floor = auto            ; auto => 100 * max(alpha) * T * |G|
tree_budget = 2000000        ; cap on N_t * 2^N_t
assembled_budget = 50000     ; cap on assembled-solve unknowns

[run]
seed = 12345
samples = 200                ; observability sample count
out = runs/out
"""

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "pi": np.pi, "e": np.e,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}


@dataclass
class ProblemConfig:
    """Raw parsed configuration plus the text it came from."""

    parser: configparser.ConfigParser
    text: str

    def get(self, section: str, key: str) -> str:
        try:
            return self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError) as exc:
            raise ConfigError(f"missing configuration key [{section}] {key}") from exc

    def getfloat(self, section, key):
        try:
            return float(self.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} is not a number") from exc

    def getint(self, section, key):
        try:
            return int(self.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} is not an integer") from exc

    def interval(self, section, key):
        raw = self.get(section, key)
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"[{section}] {key} must be 'lo, hi', got {raw!r}")
        lo, hi = float(parts[0]), float(parts[1])
        if not lo < hi:
            raise ConfigError(f"[{section}] {key}: need lo < hi, got ({lo}, {hi})")
        return lo, hi


def parse_config(path: str | None = None, overrides=None) -> ProblemConfig:
    """Load defaults, optionally merge a file, then apply key=value overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read_string(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            file_text = fh.read()
        try:
            parser.read_string(file_text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())
    buf = io.StringIO()
    parser.write(buf)
    return ProblemConfig(parser=parser, text=buf.getvalue())


def config_hash(cfg: ProblemConfig) -> str:
    """Hash of the scientific configuration (the output path does not count)."""
    lines = [
        ln for ln in cfg.text.splitlines() if not ln.strip().startswith("out")
    ]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def eval_expr(expr: str, **names):
    """Evaluate a config expression against numpy names and given variables."""
    ns = dict(_EXPR_NAMES)
    ns.update(names)
    try:
        return eval(expr, {"__builtins__": {}}, ns)  # config-owned expression
    except Exception as exc:
        raise ConfigError(f"cannot evaluate expression {expr!r}: {exc}") from exc


def _spatial(expr, coords):
    names = {"x": coords[:, 0]}
    if coords.shape[1] > 1:
        names["y"] = coords[:, 1]
    val = eval_expr(expr, **names, t=0.0, W=0.0)
    return np.broadcast_to(np.asarray(val, dtype=float), (coords.shape[0],)).copy()


def _uses_tw(expr: str) -> bool:
    import re

    return bool(re.search(r"\b[tW]\b", expr))


def _field_levels(expr, coords, tree, mask=None):
    """Per-level arrays for an expression; constant in (t, W) collapses to one array."""
    if not _uses_tw(expr):
        arr = _spatial(expr, coords)
        if mask is not None:
            arr = arr * mask
        return [np.broadcast_to(arr, (1 << k, len(arr))).copy() for k in range(tree.num_steps)]
    out = []
    names = {"x": coords[:, 0]} | ({"y": coords[:, 1]} if coords.shape[1] > 1 else {})
    for k in range(tree.num_steps):
        t = k * tree.dt
        W = tree.brownian(k)[:, None]
        val = eval_expr(expr, **names, t=t, W=W)
        val = np.broadcast_to(np.asarray(val, dtype=float), (1 << k, coords.shape[0])).copy()
        if mask is not None:
            val = val * mask
        out.append(val)
    return out


def _coefficient(expr, coords, tree):
    if not _uses_tw(expr):
        arr = _spatial(expr, coords)
        if np.all(arr == arr[0]):
            return float(arr[0])
        return arr
    return _field_levels(expr, coords, tree)


def build_problem(cfg: ProblemConfig):
    """Construct (Problem, WeightSet, run-settings dict) from a configuration."""
    geometry = cfg.get("problem", "geometry")
    n = cfg.getint("problem", "n")
    num_steps = cfg.getint("problem", "num_steps")
    horizon = cfg.getfloat("problem", "horizon")
    extent = cfg.getfloat("problem", "extent")
    mesh = build_mesh(geometry, n, extent)
    op = assemble_generator(mesh)
    tree = build_tree(num_steps, horizon, budget=cfg.getint("solvers", "tree_budget"))

    masks = {}
    for key in ("g0", "g1", "g2", "gd", "gprime"):
        lo, hi = cfg.interval("regions", key)
        masks[key] = mask_from_interval(mesh, key, lo, hi)

    coeffs = Coefficients(
        a1=_coefficient(cfg.get("coefficients", "a1"), mesh.bulk_coords, tree),
        a2=_coefficient(cfg.get("coefficients", "a2"), mesh.bulk_coords, tree),
        b1=_coefficient(cfg.get("coefficients", "b1"), mesh.boundary_coords, tree),
        b2=_coefficient(cfg.get("coefficients", "b2"), mesh.boundary_coords, tree),
    )

    support = cfg.getfloat("cost", "target_support")
    if not 0.0 <= support <= 1.0:
        raise ConfigError("[cost] target_support must lie in [0, 1] (fraction of the horizon)")
    chid = masks["gd"].indicator
    targets = []
    for key in ("y1d", "y2d"):
        levels = _field_levels(cfg.get("cost", key), mesh.bulk_coords, tree, mask=chid)
        for k in range(tree.num_steps):
            if (k + 1) * tree.dt > support * horizon + 1e-12:
                levels[k] = np.zeros_like(levels[k])
        targets.append(levels)
    cost = CostParams(
        alpha=(cfg.getfloat("cost", "alpha1"), cfg.getfloat("cost", "alpha2")),
        beta=(cfg.getfloat("cost", "beta1"), cfg.getfloat("cost", "beta2")),
        targets=tuple(targets),
    )

    y0 = np.concatenate(
        [
            _spatial(cfg.get("problem", "y0_bulk"), mesh.bulk_coords),
            _spatial(cfg.get("problem", "y0_boundary"), mesh.boundary_coords),
        ]
    )

    bf_raw = cfg.get("solvers", "beta_floor").strip().lower()
    beta_floor = None if bf_raw == "auto" else float(bf_raw)
    options = SolverOptions(
        tol_picard=cfg.getfloat("solvers", "tol_picard"),
        max_picard=cfg.getint("solvers", "max_picard"),
        tol_cg=cfg.getfloat("solvers", "tol_cg"),
        max_cg=cfg.getint("solvers", "max_cg"),
        grad_tol_scale=cfg.getfloat("hum", "grad_tol_scale"),
        max_grad_iters=cfg.getint("hum", "max_iters"),
        eps=cfg.getfloat("hum", "eps"),
        penalty=cfg.get("hum", "penalty"),
        eps_target=cfg.getfloat("hum", "eps_target"),
        beta_floor=beta_floor,
        assembled_budget=cfg.getint("solvers", "assembled_budget"),
        log_budget=cfg.getfloat("weights", "log_budget"),
    )
    if options.penalty not in ("quadratic", "norm"):
        raise ConfigError(f"[hum] penalty must be quadratic or norm, got {options.penalty!r}")

    problem = Problem(
        mesh=mesh, op=op, tree=tree, coeffs=coeffs, masks=masks, cost=cost,
        Y0=y0, options=options,
    )
    ws = build_weights(
        mesh,
        masks["gprime"],
        horizon,
        lam=cfg.getfloat("weights", "lambda"),
        mu=cfg.getfloat("weights", "mu"),
        bounds=cfg.interval("regions", "gprime"),
        log_budget=cfg.getfloat("weights", "log_budget"),
    )
    run = {
        "seed": cfg.getint("run", "seed"),
        "samples": cfg.getint("run", "samples"),
        "out": cfg.get("run", "out"),
    }
    return problem, ws, run


def build_controls(cfg: ProblemConfig, problem) -> tuple[ControlTriple, FollowerPair]:
    """Leader/follower controls from the [controls] section (for `forward`)."""
    mesh, tree = problem.mesh, problem.tree

    def levels(key, coords, mask=None):
        expr = cfg.get("controls", key)
        if expr.strip() in ("0", "0.0"):
            return None
        return _field_levels(expr, coords, tree, mask=mask)

    u = ControlTriple(
        u1=levels("u1", mesh.bulk_coords, mask=problem.masks["g0"].indicator),
        u2=levels("u2", mesh.bulk_coords),
        u3=levels("u3", mesh.boundary_coords),
    )
    v = FollowerPair(
        v1=levels("v1", mesh.bulk_coords, mask=problem.masks["g1"].indicator),
        v2=levels("v2", mesh.bulk_coords, mask=problem.masks["g2"].indicator),
    )
    return u, v
