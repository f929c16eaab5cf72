"""Replication harness for the bias/size study of both instrument sets."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._fmt import fmt17
from .dgp import PHI_VARIANTS, ErrorCoupling, FormationConfig, StructuralParams, group_rng, simulate_arrays
from .errors import ConfigError, PeerFxError
from .estimator import CRITICAL_VALUE, ModelSpec, fit_arrays, hausman_test
from .instruments import InstrumentSpec, _stack_instruments
from .kernels import row_normalize_stack

__all__ = [
    "McConfig",
    "McReport",
    "CoefStats",
    "McAbort",
    "DEFAULT_ESTIMATORS",
    "run_design",
    "run_replications",
    "collect_replications",
    "summarize",
    "format_table",
    "report_lines",
    "PANEL_LABELS",
]

DEFAULT_ESTIMATORS = (("TSLS-X", InstrumentSpec("X", 4)), ("TSLS-E", InstrumentSpec("E", 4)))
PANEL_LABELS = {
    "zero": "φ(η) = 0",
    "linear": "φ(η) = η",
    "exp3": "φ(η) = exp(3Φ(η))",
    "sine3": "φ(η) = sin(3Φ(η))",
}
COEF_SYMBOLS = {"alpha": "α", "beta": "β", "gamma": "γ", "delta": "δ"}
# report row order; the intercept is never reported
REPORT_ORDER = ("beta", "gamma", "delta")
MAX_FAILURE_SHARE = 0.01


class McAbort(PeerFxError):
    """Too many replications failed to produce a fit."""


@dataclass(frozen=True)
class McConfig:
    G: int = 250
    n_g: int = 25
    params: StructuralParams = field(default_factory=StructuralParams)
    phi: str = "zero"
    R: int = 5000
    seed: int = 0
    estimators: tuple = DEFAULT_ESTIMATORS
    level: float = 0.05
    model: str = "full"
    formation: FormationConfig = field(default_factory=FormationConfig)
    u_scale: float = 1.0
    hausman: bool = True
    hausman_method: str = "sum"
    hausman_coords: tuple = ("delta", "gamma")

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if self.G < 1 or self.n_g < 2:
            raise ConfigError("need G >= 1 groups of n_g >= 2 agents")
        if self.phi not in PHI_VARIANTS:
            raise ConfigError(f"phi must be one of {PHI_VARIANTS}, got {self.phi!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        names = [name for name, _ in self.estimators]
        if not names or len(set(names)) != len(names):
            raise ConfigError(f"estimator names must be unique and non-empty: {names}")
        for _, spec in self.estimators:
            spec.check_model(self.model)
        if self.hausman_method not in ("joint", "sum"):
            raise ConfigError("hausman_method must be 'joint' or 'sum'")

    @property
    def critical_value(self):
        if self.level == 0.05:
            return CRITICAL_VALUE
        return float(stats.norm.isf(self.level / 2.0))

    @property
    def labels(self):
        return ModelSpec(self.model).labels

    @property
    def hausman_pair(self):
        """Names of the (mode E, mode X) estimators used for the Hausman contrast."""
        if not self.hausman:
            return None
        e = [n for n, s in self.estimators if s.mode == "E"]
        x = [n for n, s in self.estimators if s.mode == "X"]
        return (e[0], x[0]) if e and x else None


@dataclass(frozen=True)
class CoefStats:
    bias: float
    std: float
    t_mean: float
    t_std: float
    rate: float


@dataclass(frozen=True)
class McReport:
    config: McConfig
    stats: dict
    failures: dict
    successes: dict
    hausman_rate: float | None = None
    hausman_count: int = 0
    elapsed: float = field(default=0.0, compare=False)


def _replicate(cfg, r):
    """One replication: returns per-estimator ``(dev, t)`` or ``None`` and the Hausman p-value."""
    rng = group_rng(cfg.seed, r)
    ec = ErrorCoupling(cfg.phi, cfg.u_scale)
    A, x, _, y = simulate_arrays(cfg.G, cfg.n_g, cfg.params, cfg.formation, ec, rng)
    mspec = ModelSpec(cfg.model)
    H = row_normalize_stack(A)
    X = mspec.regressors(H, x, y).reshape(cfg.G * cfg.n_g, -1)
    yy = y.reshape(-1)
    offsets = np.arange(cfg.G) * cfg.n_g
    theta0 = cfg.params.theta if cfg.model == "full" else cfg.params.theta[[0, 2, 3]]
    Af = A.astype(np.float64)
    out = {}
    fits = {}
    for name, spec in cfg.estimators:
        Z = _stack_instruments(Af, x, spec).reshape(cfg.G * cfg.n_g, -1)
        try:
            fit = fit_arrays(Z, X, yy, offsets, mspec.labels, spec.labels)
            var = np.diag(fit.cov)
            if not np.all(var > 0):
                raise ArithmeticError("zero variance")
        except (ArithmeticError, np.linalg.LinAlgError):
            out[name] = None
            continue
        fits[name] = fit
        dev = fit.theta - theta0
        out[name] = (dev, dev / np.sqrt(var))
    pval = None
    pair = cfg.hausman_pair
    if pair and pair[0] in fits and pair[1] in fits:
        res = hausman_test(fits[pair[0]], fits[pair[1]], cfg.hausman_coords, cfg.hausman_method)
        pval = res.pvalue
    return out, pval


def run_replications(cfg, indices):
    """Run the listed replication indices in order; safe to call in a worker."""
    return [(r, *_replicate(cfg, r)) for r in indices]


def _chunks(R, workers):
    size = max(1, math.ceil(R / (workers * 4)))
    return [range(a, min(a + size, R)) for a in range(0, R, size)]


def _summarize(cfg, rows):
    p = len(cfg.labels)
    stats_out, failures, successes = {}, {}, {}
    crit = cfg.critical_value
    for name, _ in cfg.estimators:
        ok = [res[name] for _, res, _ in rows if res[name] is not None]
        failures[name] = len(rows) - len(ok)
        successes[name] = len(ok)
        dev = np.array([d for d, _ in ok]).reshape(-1, p)
        t = np.array([tt for _, tt in ok]).reshape(-1, p)
        per = {}
        for k, label in enumerate(cfg.labels):
            if label == "alpha":
                continue
            m = dev.shape[0]
            per[label] = CoefStats(
                bias=float(dev[:, k].mean()) if m else math.nan,
                std=float(dev[:, k].std(ddof=1)) if m > 1 else math.nan,
                t_mean=float(t[:, k].mean()) if m else math.nan,
                t_std=float(t[:, k].std(ddof=1)) if m > 1 else math.nan,
                rate=float(np.mean(np.abs(t[:, k]) > crit)) if m else math.nan,
            )
        stats_out[name] = per
    pvals = [pv for _, _, pv in rows if pv is not None]
    h_rate = float(np.mean(np.array(pvals) < cfg.level)) if pvals else None
    return stats_out, failures, successes, h_rate, len(pvals)


def collect_replications(cfg, workers=1):
    """Per-replication rows ``(r, results, hausman_pvalue)`` in replication order.

    Replication ``r`` draws from the substream ``(seed, r)``, so the rows do
    not depend on ``workers``.
    """
    workers = max(1, int(workers))
    if workers == 1:
        rows = run_replications(cfg, range(cfg.R))
    else:
        chunks = _chunks(cfg.R, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(run_replications, [cfg] * len(chunks), chunks)
            rows = [row for part in parts for row in part]
    rows.sort(key=lambda row: row[0])
    return rows


def summarize(cfg, rows, elapsed=0.0):
    """Build an :class:`McReport` from replication rows; aborts above 1% failures."""
    stats_out, failures, successes, h_rate, h_count = _summarize(cfg, rows)
    worst = max(failures.values())
    if worst > MAX_FAILURE_SHARE * len(rows):
        raise McAbort(f"{worst} of {len(rows)} replications failed for phi={cfg.phi}: {failures}")
    return McReport(
        config=cfg,
        stats=stats_out,
        failures=failures,
        successes=successes,
        hausman_rate=h_rate,
        hausman_count=h_count,
        elapsed=elapsed,
    )


def run_design(cfg, workers=1):
    """Run ``cfg.R`` replications and summarize them."""
    start = time.perf_counter()
    rows = collect_replications(cfg, workers)
    return summarize(cfg, rows, time.perf_counter() - start)


def _num(v, width=8):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA".rjust(width)
    return f"{v:{width}.4f}"


def format_table(reports, estimators=None):
    """Render reports as a Table-1 style text table, one panel per design."""
    if estimators is None:
        estimators = []
        for rep in reports:
            for name in rep.stats:
                if name not in estimators:
                    estimators.append(name)
        if not estimators:
            estimators = [name for name, _ in DEFAULT_ESTIMATORS]
    cols = ("bias", "std", "mean", "std", "rate")
    block = 5 * 9
    lines = []
    lines.append(" " * 6 + "".join(f"{name:^{block}}" for name in estimators))
    lines.append(
        " " * 6
        + "".join(f"{'θ_n − θ':^18}{'V_n^{-1/2}(θ_n − θ)':^27}" for _ in estimators)
    )
    lines.append(" " * 6 + "".join("".join(f"{c:>9}" for c in cols) for _ in estimators))
    rule = "-" * len(lines[-1])
    lines.insert(0, rule)
    lines.append(rule)
    for rep in reports:
        label = PANEL_LABELS.get(rep.config.phi, rep.config.phi)
        lines.append(f"{label:^{len(rule)}}".rstrip())
        coefs = [c for c in REPORT_ORDER if c in rep.config.labels]
        for coef in coefs:
            cells = []
            for name in estimators:
                st = rep.stats.get(name, {}).get(coef)
                vals = (st.bias, st.std, st.t_mean, st.t_std, st.rate) if st else (None,) * 5
                cells.append("".join(" " + _num(v) for v in vals))
            lines.append(f"{COEF_SYMBOLS[coef]:<6}" + "".join(cells))
        if rep.hausman_rate is not None:
            lines.append(
                f"      Hausman ({'+'.join(rep.config.hausman_coords)}) rejection "
                f"rate at {rep.config.level:g}: {rep.hausman_rate:.4f}"
            )
    if reports:
        lines.append(rule)
    return "\n".join(lines) + "\n"


def report_lines(report):
    """Machine-readable ``key=value`` lines; floats carry 17 significant digits."""
    cfg = report.config
    p = cfg.params
    out = [
        f"design.phi={cfg.phi}",
        f"design.G={cfg.G}",
        f"design.n_g={cfg.n_g}",
        f"design.R={cfg.R}",
        f"design.seed={cfg.seed}",
        f"design.model={cfg.model}",
        f"design.level={fmt17(cfg.level)}",
        f"design.alpha={fmt17(p.alpha)}",
        f"design.delta={fmt17(p.delta)}",
        f"design.beta={fmt17(p.beta)}",
        f"design.gamma={fmt17(p.gamma)}",
    ]
    for name, per in report.stats.items():
        out.append(f"{name}.successes={report.successes[name]}")
        out.append(f"{name}.failures={report.failures[name]}")
        for coef in REPORT_ORDER:
            if coef not in per:
                continue
            st = per[coef]
            for key in ("bias", "std", "t_mean", "t_std", "rate"):
                out.append(f"{name}.{coef}.{key}={fmt17(getattr(st, key))}")
    if report.hausman_rate is not None:
        out.append(f"hausman.method={cfg.hausman_method}")
        out.append(f"hausman.coords={','.join(cfg.hausman_coords)}")
        out.append(f"hausman.count={report.hausman_count}")
        out.append(f"hausman.rate={fmt17(report.hausman_rate)}")
    return out
