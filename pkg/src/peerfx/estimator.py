"""Pooled two-stage least squares with network-clustered inference."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DataError, IdentificationError, UndefinedStatisticError
from .instruments import InstrumentSpec, instrument_blocks
from .kernels import row_normalize_stack

__all__ = [
    "ModelSpec",
    "FitResult",
    "TestResult",
    "Diagnostics",
    "CRITICAL_VALUE",
    "RCOND_MIN",
    "tsls_fit",
    "fit_arrays",
    "cluster_variance",
    "t_statistics",
    "rejections",
    "p_values",
    "hausman_test",
    "diagnostics",
    "regressor_blocks",
]

CRITICAL_VALUE = 1.959964
RCOND_MIN = 1e-12

_LABELS = {"full": ("alpha", "delta", "beta", "gamma"), "baseline": ("alpha", "beta", "gamma")}


@dataclass(frozen=True)
class ModelSpec:
    """``full``: regressors ``(1, Hy, x, Hx)``; ``baseline``: ``(1, x, Hx)``."""

    model: str = "full"

    def __post_init__(self):
        if self.model not in _LABELS:
            raise ValueError(f"model must be one of {tuple(_LABELS)}, got {self.model!r}")

    @property
    def labels(self):
        return _LABELS[self.model]

    @property
    def p(self):
        return len(self.labels)

    def regressors(self, H, x, y):
        """Regressor matrix for one group or a stack of equal-sized groups."""
        Hx = np.matmul(H, x[..., None])[..., 0]
        ones = np.ones_like(x)
        if self.model == "baseline":
            return np.stack([ones, x, Hx], axis=-1)
        Hy = np.matmul(H, y[..., None])[..., 0]
        return np.stack([ones, Hy, x, Hx], axis=-1)


@dataclass(frozen=True, eq=False)
class FitResult:
    theta: np.ndarray
    cov: np.ndarray
    residuals: tuple
    labels: tuple
    instrument_labels: tuple
    K: int
    S_n: np.ndarray
    W_n: np.ndarray
    Omega_n: np.ndarray
    # per-group contribution to theta - theta_true, so that cov = influence' influence
    influence: np.ndarray = field(repr=False)
    group_ids: tuple = field(repr=False, default=())
    y_digest: bytes = field(repr=False, default=b"")

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tstats(self):
        return t_statistics(self, np.zeros_like(self.theta))

    @property
    def n(self):
        return sum(len(e) for e in self.residuals)

    @property
    def G(self):
        return len(self.residuals)

    def coef(self, name):
        return self.theta[self.labels.index(name)]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    dof: int
    pvalue: float
    coords: tuple = ()
    method: str = "sum"


def regressor_blocks(dataset, mspec):
    """Per-group regressor matrices and outcome vectors, in dataset order."""
    if not dataset.has_outcomes:
        raise DataError("every group needs an outcome vector y to estimate the model")
    X = [None] * dataset.G
    for _, idx in dataset.size_buckets().items():
        A = np.stack([dataset.groups[k].graph.adjacency for k in idx])
        x = np.stack([dataset.groups[k].x for k in idx])
        y = np.stack([dataset.groups[k].y for k in idx])
        Xs = mspec.regressors(row_normalize_stack(A), x, y)
        for pos, k in enumerate(idx):
            X[k] = Xs[pos]
    return X, [d.y for d in dataset.groups]


def _offending(vecs, labels):
    hits = np.nonzero(np.abs(vecs).max(axis=1) > 0.1)[0]
    return [labels[k] for k in hits]


def _whiten(ZZ, zlabels):
    """Scale and eigen-decompose ``Z'Z``; raises on rank failure."""
    d = np.sqrt(np.diag(ZZ))
    zero = d <= 0.0
    if np.any(zero):
        cols = [zlabels[k] for k in np.nonzero(zero)[0]]
        raise IdentificationError(f"instrument columns are identically zero: {cols}", cols)
    C = ZZ / np.outer(d, d)
    lam, U = np.linalg.eigh(C)
    if not lam[-1] > 0 or lam[0] / lam[-1] < RCOND_MIN:
        small = lam <= RCOND_MIN * max(lam[-1], 0.0)
        cols = _offending(U[:, small], zlabels)
        raise IdentificationError(
            f"instrument cross-product matrix is singular "
            f"(reciprocal condition {max(lam[0], 0.0) / lam[-1]:.3g}); "
            f"collinear columns: {cols}",
            cols,
        )
    return d, lam, U


def fit_arrays(Z, X, y, offsets, labels, zlabels, group_ids=()):
    """2SLS on stacked arrays.

    Parameters
    ----------
    Z, X : ndarray, shape (N, K) and (N, p)
        Instruments and regressors, groups stacked in order.
    y : ndarray, shape (N,)
    offsets : ndarray of int
        Start row of each group.
    labels, zlabels : sequence of str
        Regressor and instrument names.
    """
    Z = np.asarray(Z, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.intp)
    K, p = Z.shape[1], X.shape[1]
    if K < p:
        raise IdentificationError(f"{K} instruments for {p} parameters", zlabels)
    ZZ = Z.T @ Z
    S = Z.T @ X
    Zy = Z.T @ y
    d, lam, U = _whiten(ZZ, zlabels)
    Wh = (U / np.sqrt(lam)) @ U.T
    Amat = Wh @ (S / d[:, None])
    b = Wh @ (Zy / d)
    sv = np.linalg.svd(Amat, compute_uv=False)
    if not sv[0] > 0 or (sv[-1] / sv[0]) ** 2 < RCOND_MIN:
        raise IdentificationError(
            "instruments do not identify the model: Z'X is rank deficient "
            f"(singular values {np.array2string(sv, precision=3)})",
            zlabels,
        )
    Q, R = np.linalg.qr(Amat)
    theta = np.linalg.solve(R, Q.T @ b)
    resid = y - X @ theta
    scores = np.add.reduceat(Z * resid[:, None], offsets, axis=0)
    B = np.linalg.solve(R, Q.T @ Wh) / d[None, :]
    influence = scores @ B.T
    cov = cluster_variance(influence)
    Winv = (U / lam) @ U.T / np.outer(d, d)
    bounds = list(offsets[1:]) + [len(y)]
    residuals = tuple(resid[a:b] for a, b in zip(offsets, bounds))
    return FitResult(
        theta=theta,
        cov=cov,
        residuals=residuals,
        labels=tuple(labels),
        instrument_labels=tuple(zlabels),
        K=K,
        S_n=S,
        W_n=Winv,
        Omega_n=scores.T @ scores,
        influence=influence,
        group_ids=tuple(group_ids),
        y_digest=y.tobytes(),
    )


def cluster_variance(influence):
    """Cluster-robust sandwich from per-group influence vectors.

    With ``psi_g = (S'WS)^{-1} S'W Z_g' e_g`` the sandwich
    ``(S'WS)^{-1} S'W Omega W S (S'WS)^{-1}`` is ``sum_g psi_g psi_g'``.
    No degrees-of-freedom correction is applied.
    """
    V = influence.T @ influence
    return (V + V.T) / 2.0


def tsls_fit(dataset, mspec=None, ispec=None):
    """Pooled 2SLS of the linear-in-means model over all groups in ``dataset``."""
    mspec = mspec or ModelSpec()
    ispec = ispec or InstrumentSpec()
    Zs = instrument_blocks(dataset, ispec, mspec.model)
    Xs, ys = regressor_blocks(dataset, mspec)
    offsets = np.concatenate([[0], np.cumsum(dataset.sizes)[:-1]])
    return fit_arrays(
        np.concatenate(Zs),
        np.concatenate(Xs),
        np.concatenate(ys),
        offsets,
        mspec.labels,
        ispec.labels,
        [d.group_id for d in dataset.groups],
    )


def t_statistics(fit, theta0):
    """``(theta - theta0) / se`` per coordinate."""
    theta0 = np.asarray(theta0, dtype=np.float64)
    var = np.diag(fit.cov)
    bad = ~(var > 0)
    if np.any(bad):
        names = [fit.labels[k] for k in np.nonzero(bad)[0]]
        raise UndefinedStatisticError(f"zero variance for {names}")
    return (fit.theta - theta0) / np.sqrt(var)


def rejections(t, crit=CRITICAL_VALUE):
    return np.abs(t) > crit


def p_values(t):
    return 2.0 * stats.norm.sf(np.abs(t))


def hausman_test(fit_e, fit_x, coords=("delta", "gamma"), method="sum"):
    """Durbin-Wu-Hausman contrast between the two instrument sets.

    ``method="sum"`` weights the contrast by ``V_X + V_E``. Neither estimator
    is efficient, so the classical ``V_X - V_E`` is not guaranteed PSD; the sum
    is, at the price of a conservative test. ``method="joint"`` instead
    estimates ``Var(theta_X - theta_E)`` from the difference of the per-group
    influence vectors of the two fits. Both use a pseudo-inverse with
    rank-based degrees of freedom.
    """
    if (
        fit_e.labels != fit_x.labels
        or fit_e.group_ids != fit_x.group_ids
        or fit_e.y_digest != fit_x.y_digest
    ):
        raise DataError("Hausman test needs two fits of the same model on the same data")
    idx = [fit_e.labels.index(c) for c in coords]
    delta = (fit_x.theta - fit_e.theta)[idx]
    if method == "joint":
        D = (fit_x.influence - fit_e.influence)[:, idx]
        M = D.T @ D
    elif method == "sum":
        M = (fit_x.cov + fit_e.cov)[np.ix_(idx, idx)]
    else:
        raise ValueError(f"unknown Hausman method {method!r}")
    M = (M + M.T) / 2.0
    w, U = np.linalg.eigh(M)
    tol = max(w.max(initial=0.0), 0.0) * len(idx) * np.finfo(float).eps * 1e3
    keep = w > tol
    dof = int(keep.sum())
    if dof == 0:
        return TestResult(0.0, 0, 1.0, tuple(coords), method)
    proj = U[:, keep].T @ delta
    stat = float(np.sum(proj**2 / w[keep]))
    return TestResult(stat, dof, float(stats.chi2.sf(stat, dof)), tuple(coords), method)


@dataclass(frozen=True)
class Diagnostics:
    """Sample analogues of the regularity conditions, with warning flags.

    The moment conditions on ``y`` and ``x`` cannot be checked from one sample
    and are not reported.
    """

    min_eig_zz: float
    min_eig_omega: float
    min_sv_zx: float
    max_cluster_share: float
    cond_zz: float
    cond_sws: float
    warn_zz: bool
    warn_omega: bool
    warn_identification: bool
    warn_cluster: bool

    @property
    def ok(self):
        return not (self.warn_zz or self.warn_omega or self.warn_identification or self.warn_cluster)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


CLUSTER_SHARE_WARN = 0.25


def _rel_min(mat):
    """(min eigenvalue, max eigenvalue) of a symmetric matrix, clipped at 0."""
    w = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    return max(w[0], 0.0), max(w[-1], 0.0)


def _cond(lo, hi):
    if hi <= 0:
        return float(np.finfo(float).max)
    if lo <= 0:
        return float(np.finfo(float).max)
    return float(hi / lo)


def diagnostics(dataset, mspec=None, ispec=None):
    """Report the rank and cluster-size conditions; never raises on rank failure."""
    mspec = mspec or ModelSpec()
    ispec = ispec or InstrumentSpec()
    Z = np.concatenate(instrument_blocks(dataset, ispec, mspec.model))
    Xs, ys = regressor_blocks(dataset, mspec)
    X = np.concatenate(Xs)
    y = np.concatenate(ys)
    n = len(y)
    offsets = np.concatenate([[0], np.cumsum(dataset.sizes)[:-1]])
    d = np.sqrt(np.diag(Z.T @ Z))
    d = np.where(d > 0, d, 1.0)
    Zs = Z / d
    ZZ = Z.T @ Z / n
    S = Z.T @ X / n
    # pseudo-inverse 2SLS so residuals exist even when the fit is unidentified
    Pz = Zs @ np.linalg.pinv(Zs)
    theta = np.linalg.lstsq(Pz @ X, Pz @ y, rcond=None)[0]
    e = y - X @ theta
    scores = np.add.reduceat(Zs * e[:, None], offsets, axis=0)
    Om_s = scores.T @ scores / n
    lo_zz, hi_zz = _rel_min(Zs.T @ Zs / n)
    lo_om, hi_om = _rel_min(Om_s)
    sv = np.linalg.svd(Zs.T @ X / n, compute_uv=False)
    sv_ratio = sv[-1] / sv[0] if sv[0] > 0 else 0.0
    Om = scores.T @ scores / n * np.outer(d, d)
    raw_zz = np.linalg.eigvalsh(ZZ)
    raw_om = np.linalg.eigvalsh((Om + Om.T) / 2)
    raw_sv = np.linalg.svd(S, compute_uv=False)
    SWS = (S.T @ np.linalg.pinv(ZZ) @ S)
    lo_s, hi_s = _rel_min(SWS)
    share = float(np.max(dataset.sizes.astype(float) ** 2) / n)
    return Diagnostics(
        min_eig_zz=float(raw_zz[0]),
        min_eig_omega=float(raw_om[0]),
        min_sv_zx=float(raw_sv[-1]),
        max_cluster_share=share,
        cond_zz=_cond(lo_zz, hi_zz),
        cond_sws=_cond(lo_s, hi_s),
        warn_zz=_cond(lo_zz, hi_zz) > 1.0 / RCOND_MIN,
        warn_omega=_cond(lo_om, hi_om) > 1.0 / RCOND_MIN,
        warn_identification=sv_ratio**2 < RCOND_MIN,
        warn_cluster=share > CLUSTER_SHARE_WARN,
    )
