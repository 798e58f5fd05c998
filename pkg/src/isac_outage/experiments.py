"""Experiment harness: config files, sweeps, histogram data and validation.

Every run returns a :class:`Table`; :func:`write_csv` renders it with a
``#``-prefixed metadata block (resolved config, seed, tool version) followed
by a header row.  Output is a pure function of the spec, so reruns with the
same seed are byte-identical.
"""

from __future__ import annotations

import ast
import io
import math
import operator
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .errors import ConfigError
from .model import (
    ChannelRealization,
    SystemConfig,
    crb_general,
    crb_simplified,
    sample_channels,
    steering_derivative,
    steering_derivative_norm2,
)
from .moments import (
    moment_match,
    moments_user,
    sample_triple_target,
    sample_triple_user,
    target_moments_per_antenna,
    triple_sums,
    user_moments_per_antenna,
)
from .outage import (
    OutageQuery,
    outage_curves_montecarlo,
    target_op_analytic,
    user_op_analytic,
)
from .quadform import GChi2Params, gchi2_cdf
from .rng import blocks, map_ordered, random_stream

SWEEPS = ("none", "gamma-grid", "epsilon-grid", "b1-grid", "b2-grid")
DEFAULT_GAMMA_GRID = tuple(float(g) for g in range(1, 17))
DEFAULT_EPSILON_GRID = tuple(float(e) for e in 8e-7 * np.logspace(-3.0, 2.5, 12))
DEFAULT_B_GRID = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig = SystemConfig()
    sweep: str = "none"
    grid: tuple[float, ...] = ()
    trials: int = 100_000
    seed: int = 0
    theta_nodes: int = 32
    outputs: tuple[str, ...] = ()
    gamma: float = 8.0
    epsilon: float = 8e-7
    bins: int = 50
    workers: int = 1

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ConfigError("sweep", f"must be one of {', '.join(SWEEPS)}, got {self.sweep!r}")
        if self.sweep != "none" and not self.grid:
            raise ConfigError("grid", f"sweep {self.sweep!r} needs a nonempty grid")
        if self.sweep in ("gamma-grid", "epsilon-grid") and any(not v > 0 for v in self.grid):
            raise ConfigError("grid", "threshold grid values must be > 0")
        if self.sweep in ("b1-grid", "b2-grid") and any(not v >= 0 for v in self.grid):
            raise ConfigError("grid", "beamformer magnitudes must be >= 0")
        for key, low in (("trials", 1), ("theta_nodes", 8), ("bins", 1), ("workers", 1)):
            if getattr(self, key) < low:
                raise ConfigError(key, f"must be >= {low}, got {getattr(self, key)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not self.gamma > 0:
            raise ConfigError("gamma", "must be > 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be > 0")

    def query(self, config: SystemConfig | None = None, **changes) -> OutageQuery:
        q = OutageQuery(config or self.base, self.gamma, self.epsilon, self.trials,
                        self.seed, self.theta_nodes, self.workers)
        return replace(q, **changes)


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


# ---------------------------------------------------------- config files

_SYSTEM_KEYS = {f.name for f in fields(SystemConfig)}
_SPEC_KEYS = {f.name for f in fields(ExperimentSpec)} - {"base"}
_INT_KEYS = {"N", "M", "L", "trials", "seed", "theta_nodes", "bins", "workers"}
_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_number(text: str) -> complex:
    """Evaluate a numeric literal or simple arithmetic with ``pi`` and ``j``."""

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        raise ValueError(text)

    return walk(ast.parse(text.strip(), mode="eval"))


def _convert(key: str, raw: str):
    try:
        if key in ("sweep",):
            return raw.strip()
        if key == "outputs":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
        if key == "grid":
            return tuple(float(_real(_eval_number(p))) for p in raw.split(",") if p.strip())
        value = _eval_number(raw)
        if key == "alpha":
            return complex(value)
        value = _real(value)
        if key in _INT_KEYS:
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        return float(value)
    except (ValueError, SyntaxError, TypeError, ZeroDivisionError):
        raise ConfigError(key, f"cannot parse value {raw!r}") from None


def _real(value):
    if isinstance(value, complex):
        if value.imag != 0:
            raise ValueError(value)
        return value.real
    return value


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def build_spec(values: dict[str, str]) -> ExperimentSpec:
    """Build a spec from raw string values; unknown keys are rejected."""
    system, spec = {}, {}
    for key, raw in values.items():
        if key in _SYSTEM_KEYS:
            system[key] = _convert(key, raw)
        elif key in _SPEC_KEYS:
            spec[key] = _convert(key, raw)
        else:
            raise ConfigError(key, "unknown configuration key")
    return ExperimentSpec(base=SystemConfig(**system), **spec)


def load_spec(path: str | Path | None, overrides: dict[str, str] | None = None) -> ExperimentSpec:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    return build_spec(values)


# ------------------------------------------------------------------ CSV

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, complex):
        return repr(value)
    return str(value)


def metadata(spec: ExperimentSpec, command: str, **extra) -> dict:
    meta = {"tool": f"isac-outage {__version__}", "command": command}
    meta.update(spec.base.as_dict())
    for key in ("sweep", "grid", "trials", "seed", "theta_nodes", "gamma", "epsilon"):
        meta[key] = getattr(spec, key)
    meta.update(extra)
    return meta


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    for key, value in table.meta.items():
        if isinstance(value, (tuple, list)):
            value = ",".join(_fmt(v) for v in value)
        buf.write(f"# {key} = {_fmt(value)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(table: Table, path: str | Path) -> None:
    Path(path).write_text(render_csv(table))


def read_csv(text: str) -> Table:
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line:
            lines.append(line)
    columns = lines[0].split(",")
    return Table(columns, [tuple(line.split(",")) for line in lines[1:]], meta)


# --------------------------------------------------------------- sweeps

def _require(spec: ExperimentSpec, allowed: Sequence[str]):
    if spec.sweep not in allowed:
        raise ConfigError("sweep", f"expected one of {', '.join(allowed)}, got {spec.sweep!r}")


def run_user_op_sweep(spec: ExperimentSpec) -> Table:
    """``P(SINR < gamma)`` over a gamma grid, analytic and Monte Carlo rows."""
    _require(spec, ("gamma-grid",))
    grid = sorted(spec.grid)
    analytic = map_ordered(lambda g: user_op_analytic(spec.query(gamma=g)), [(g,) for g in grid], spec.workers)
    mc, _ = outage_curves_montecarlo(spec.query(), gammas=grid)
    rows = []
    for g, a, m in zip(grid, analytic, mc):
        rows.append((g, a.value, a.std_error, a.method.value))
        rows.append((g, m.value, m.std_error, m.method.value))
    return Table(["gamma", "p_u", "std_error", "method"], rows, metadata(spec, "user-op"))


def run_target_op_sweep(spec: ExperimentSpec) -> Table:
    """``P(CRB > epsilon)`` over an epsilon grid (linear values; dB column added)."""
    _require(spec, ("epsilon-grid",))
    grid = sorted(spec.grid)
    analytic = map_ordered(lambda e: target_op_analytic(spec.query(epsilon=e)), [(e,) for e in grid], spec.workers)
    _, mc = outage_curves_montecarlo(spec.query(), epsilons=grid)
    rows = []
    for e, a, m in zip(grid, analytic, mc):
        db = 10.0 * math.log10(e)
        rows.append((e, db, a.value, a.std_error, a.method.value))
        rows.append((e, db, m.value, m.std_error, m.method.value))
    return Table(["epsilon", "epsilon_db", "p_c", "std_error", "method"], rows,
                 metadata(spec, "target-op", epsilon_db="10*log10(epsilon)"))


def run_tradeoff(spec: ExperimentSpec) -> Table:
    """Analytic ``(P_u, P_c)`` pairs while sweeping ``|b1|`` or ``|b2|``.

    The magnitude that is not swept stays at its value in ``spec.base``.
    """
    _require(spec, ("b1-grid", "b2-grid"))
    key = "b1_mag" if spec.sweep == "b1-grid" else "b2_mag"
    fixed = "b2_mag" if key == "b1_mag" else "b1_mag"

    def point(value):
        cfg = spec.base.with_(**{key: value})
        q = spec.query(cfg)
        return user_op_analytic(q).value, target_op_analytic(q).value

    results = map_ordered(point, [(v,) for v in spec.grid], spec.workers)
    rows = [(key, v, pu, pc) for v, (pu, pc) in zip(spec.grid, results)]
    note = f"{fixed} fixed at {getattr(spec.base, fixed)!r}; analytic values"
    return Table(["swept_param", "value", "p_u", "p_c"], rows, metadata(spec, "tradeoff", note=note))


# ------------------------------------------------------------- histogram

def run_histogram(spec: ExperimentSpec) -> Table:
    """2-D histogram of ``(X, Y)`` sums with the CLT density alongside.

    Bins span the CLT mean +/- 4.5 standard deviations on each axis.
    ``clt_expected`` is the CLT probability of each bin (5x5 midpoint rule)
    times the number of draws.
    """
    if spec.trials < 10_000:
        raise ConfigError("trials", "histogram needs at least 10000 draws")
    cfg = spec.base
    gauss = moments_user(cfg)
    mean2, cov2 = gauss.mean[:2], gauss.cov[:2, :2]
    sd = np.sqrt(np.diag(cov2))
    edges = [np.linspace(mean2[i] - 4.5 * sd[i], mean2[i] + 4.5 * sd[i], spec.bins + 1) for i in range(2)]

    counts = np.zeros((spec.bins, spec.bins), dtype=np.int64)
    s1 = np.zeros(2)
    s2 = np.zeros(2)
    for index, size in blocks(spec.trials):
        h, theta = sample_channels(cfg.N, size, random_stream(spec.seed, index))
        xy = triple_sums(cfg, h, theta)[:, :2]
        c, _, _ = np.histogram2d(xy[:, 0], xy[:, 1], bins=edges)
        counts += c.astype(np.int64)
        s1 += xy.sum(axis=0)
        s2 += (xy**2).sum(axis=0)

    n = spec.trials
    sample_mean = s1 / n
    sample_se = np.sqrt((s2 / n - sample_mean**2) / n)
    dist = stats.multivariate_normal(mean2, cov2)
    dx, dy = np.diff(edges[0])[0], np.diff(edges[1])[0]
    sub = (np.arange(5) + 0.5) / 5.0
    rows = []
    for i in range(spec.bins):
        for j in range(spec.bins):
            xc = 0.5 * (edges[0][i] + edges[0][i + 1])
            yc = 0.5 * (edges[1][j] + edges[1][j + 1])
            gx, gy = np.meshgrid(edges[0][i] + sub * dx, edges[1][j] + sub * dy, indexing="ij")
            prob = float(np.mean(dist.pdf(np.stack([gx.ravel(), gy.ravel()], axis=-1)))) * dx * dy
            rows.append((
                float(edges[0][i]), float(edges[0][i + 1]), float(edges[1][j]), float(edges[1][j + 1]),
                xc, yc, int(counts[i, j]), counts[i, j] / (n * dx * dy),
                float(dist.pdf([xc, yc])), prob * n,
            ))
    meta = metadata(
        spec, "hist",
        bins=f"{spec.bins}x{spec.bins}",
        x_edges=f"linspace({edges[0][0]!r}, {edges[0][-1]!r}, {spec.bins + 1})",
        y_edges=f"linspace({edges[1][0]!r}, {edges[1][-1]!r}, {spec.bins + 1})",
        sample_mean_x=float(sample_mean[0]), sample_mean_y=float(sample_mean[1]),
        sample_se_x=float(sample_se[0]), sample_se_y=float(sample_se[1]),
        outside_grid=int(n - counts.sum()),
    )
    columns = ["x_lo", "x_hi", "y_lo", "y_hi", "x_center", "y_center", "count",
               "density", "clt_density", "clt_expected"]
    return Table(columns, rows, meta)


def histogram_gof(table: Table, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Pearson chi-square of histogram counts against the CLT expectation.

    Bins with expectation below ``min_expected`` are pooled into one cell,
    together with draws that fell outside the grid.  Returns
    ``(statistic, p_value, degrees_of_freedom)``.
    """
    observed = np.asarray(table.column("count"), dtype=float)
    expected = np.asarray(table.column("clt_expected"), dtype=float)
    n = float(table.meta["trials"])
    keep = expected >= min_expected
    obs = list(observed[keep]) + [n - observed[keep].sum()]
    exp = list(expected[keep]) + [n - expected[keep].sum()]
    obs, exp = np.asarray(obs), np.asarray(exp)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


# ------------------------------------------------------------- validate

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    passed: bool


def _check(name: str, measured: float, bound: float) -> Check:
    return Check(name, float(measured), float(bound), bool(measured <= bound))


def _moment_check(spec: ExperimentSpec, target: bool) -> Check:
    cfg = spec.base
    rng = random_stream(spec.seed, 1 if target else 0)
    count = max(spec.trials, 20_000)
    h, theta = sample_channels(1, count, rng)
    f = np.pi * np.sin(theta) * rng.integers(-(cfg.N - 1), cfg.N, size=count) / 2.0
    fn = sample_triple_target if target else sample_triple_user
    d = np.stack(fn(h[:, 0], f, cfg), axis=-1)
    mean, cov = (target_moments_per_antenna if target else user_moments_per_antenna)(cfg)
    match = moment_match(d, mean, cov)
    return _check(f"moments_{'target' if target else 'user'}_max_z", match.max_z, 5.0)


def _crb_check(spec: ExperimentSpec) -> Check:
    rng = random_stream(spec.seed, 2)
    worst = 0.0
    done = 0
    while done < 200:
        h, theta = sample_channels(spec.base.N, 1, rng)
        if abs(math.cos(theta[0])) <= 0.05:
            continue
        cfg = spec.base.with_(b1_mag=float(rng.uniform(0, 1)), b1_phase=float(rng.uniform(0, 2 * np.pi)),
                              b2_mag=float(rng.uniform(0.05, 1)), b2_phase=float(rng.uniform(0, 2 * np.pi)))
        chan = ChannelRealization(h[0], float(theta[0]))
        a, b = crb_general(cfg, chan), crb_simplified(cfg, chan)
        worst = max(worst, abs(a - b) / abs(b))
        done += 1
    return _check("crb_general_vs_simplified_rel", worst, 1e-8)


def _steering_check(spec: ExperimentSpec) -> Check:
    rng = random_stream(spec.seed, 3)
    worst = 0.0
    for M in range(2, 33):
        for theta in rng.uniform(0, np.pi, 20):
            direct = float(np.sum(np.abs(steering_derivative(theta, M)) ** 2))
            closed = float(steering_derivative_norm2(theta, M))
            if closed > 0:
                worst = max(worst, abs(direct - closed) / closed)
    return _check("steering_derivative_norm_rel", worst, 1e-10)


def _gchi2_check() -> Check:
    worst = 0.0
    p2 = GChi2Params([1.0, 1.0], [1, 1], [0.0, 0.0])
    for x in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        worst = max(worst, abs(gchi2_cdf(p2, x) - (1.0 - math.exp(-x / 2.0))))
    normal = GChi2Params(lin_coeff=1.0)
    worst = max(worst, abs(gchi2_cdf(normal, 0.0) - 0.5))
    return _check("gchi2_closed_form_abs", worst, 1e-6)


def run_validate(spec: ExperimentSpec) -> tuple[Table, bool]:
    """Bundle the module oracles into a pass/fail report."""
    checks = [
        _moment_check(spec, target=False),
        _moment_check(spec, target=True),
        _crb_check(spec),
        _steering_check(spec),
        _gchi2_check(),
    ]
    q = spec.query()
    (mc_u,), (mc_c,) = outage_curves_montecarlo(q, gammas=[spec.gamma], epsilons=[spec.epsilon])
    an_u = user_op_analytic(q).value
    an_c = target_op_analytic(q).value
    bound_u = max(0.01, 4 * mc_u.std_error)
    bound_c = max(0.02, 4 * mc_c.std_error)
    checks.append(_check(f"user_op_analytic_vs_mc@gamma={spec.gamma:g}", abs(an_u - mc_u.value), bound_u))
    checks.append(_check(f"target_op_analytic_vs_mc@eps={spec.epsilon:g}", abs(an_c - mc_c.value), bound_c))

    rows = [(c.name, c.measured, c.bound, "pass" if c.passed else "FAIL") for c in checks]
    ok = all(c.passed for c in checks)
    table = Table(["check", "measured", "bound", "result"], rows, metadata(spec, "validate", all_passed=ok))
    return table, ok


RUNNERS: dict[str, Callable[[ExperimentSpec], Table]] = {
    "user-op": run_user_op_sweep,
    "target-op": run_target_op_sweep,
    "tradeoff": run_tradeoff,
    "hist": run_histogram,
}
