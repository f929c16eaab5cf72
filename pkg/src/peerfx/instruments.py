"""Instrument construction from leave-own-out networks (mode ``E``) or from
powers of the observed transition matrix (mode ``X``)."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import leave_one_out
from .kernels import leave_out_walks, power_columns, row_normalize_stack

__all__ = [
    "InstrumentSpec",
    "InstrumentMatrix",
    "q_weights_reference",
    "q_transform",
    "second_moment_instruments",
    "build_instrument_matrix",
    "instrument_blocks",
]

MODES = ("E", "X")
# regressor count per model; the intercept and x are always instruments
N_PARAMS = {"full": 4, "baseline": 3}


@dataclass(frozen=True)
class InstrumentSpec:
    """Which instrument columns to build.

    mode ``"E"`` gives ``(1, x, Q_1 x, ..., Q_S x)``; mode ``"X"`` gives
    ``(1, x, H x, ..., H^S x)``. Second-moment columns ``x' H_i' H_i^s x`` are
    appended in mode ``E`` when ``include_second_moments`` is set.
    """

    mode: str = "E"
    max_step: int = 4
    include_second_moments: bool = False

    def __post_init__(self):
        mode = str(self.mode).upper()
        if mode not in MODES:
            raise ConfigError(f"instrument mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if int(self.max_step) != self.max_step or self.max_step < 1:
            raise ConfigError(f"max_step must be a positive integer, got {self.max_step!r}")
        object.__setattr__(self, "max_step", int(self.max_step))
        if self.include_second_moments and mode != "E":
            raise ConfigError("second-moment instruments are only defined for mode E")

    @property
    def labels(self):
        S = self.max_step
        if self.mode == "E":
            cols = [f"Q{s}x" for s in range(1, S + 1)]
            if self.include_second_moments:
                cols += [f"M{s}x" for s in range(1, S + 1)]
        else:
            cols = ["Hx"] + [f"H{s}x" for s in range(2, S + 1)]
        return ("const", "x", *cols)

    @property
    def n_columns(self):
        return len(self.labels)

    def check_model(self, model):
        """Raise :class:`ConfigError` unless there are enough instruments for ``model``."""
        if model not in N_PARAMS:
            raise ConfigError(f"unknown model {model!r}; expected one of {tuple(N_PARAMS)}")
        need = N_PARAMS[model]
        if self.n_columns < need:
            raise ConfigError(
                f"{self.n_columns} instruments {self.labels} cannot identify the "
                f"{need} parameters of the {model} model; raise max_step to at "
                f"least {need - 2}"
            )


@dataclass(frozen=True, eq=False)
class InstrumentMatrix:
    """Realized instrument matrix ``Z_g`` of one group."""

    columns: np.ndarray
    labels: tuple

    @property
    def K(self):
        return self.columns.shape[1]


def q_weights_reference(g, s):
    """Dense ``Q_s`` built from explicit leave-one-out matrix powers.

    Row ``i`` is the average over starting agents of the ``s``-step transition
    probabilities on the network without agent ``i``'s links. This is the slow
    path, kept as a check on :func:`q_transform`.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    n = g.n
    Q = np.zeros((n, n))
    if n < 2:
        return Q
    for i in range(n):
        P = np.linalg.matrix_power(leave_one_out(g, i), s)
        Q[i] = P.sum(axis=0) / (n - 1)
    return Q


def _walks(g, x, s):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({g.n},)")
    return leave_out_walks(g.adjacency[None], x[None], s)


def q_transform(g, x, s):
    """``Q_s x`` computed by iterating ``w <- H_i w`` for each agent ``i``."""
    first, _ = _walks(g, x, s)
    return first[0, :, s - 1]


def second_moment_instruments(g, x, s):
    """Entry ``i`` is ``x' H_i' H_i^s x``."""
    _, second = _walks(g, x, s)
    return second[0, :, s - 1]


def _stack_instruments(A, x, spec):
    """Instrument matrices for a stack of equal-sized groups, shape ``(G, n, K)``."""
    G, n = x.shape
    S = spec.max_step
    Z = np.empty((G, n, spec.n_columns))
    Z[..., 0] = 1.0
    Z[..., 1] = x
    if spec.mode == "E":
        first, second = leave_out_walks(A, x, S)
        Z[..., 2 : 2 + S] = first
        if spec.include_second_moments:
            Z[..., 2 + S :] = second
    else:
        Z[..., 2:] = power_columns(row_normalize_stack(A), x, S)
    return Z


def build_instrument_matrix(d, spec, model="full"):
    """Instrument matrix ``Z_g`` for one group, with fixed column order."""
    spec.check_model(model)
    Z = _stack_instruments(d.graph.adjacency[None].astype(np.float64), d.x[None], spec)
    return InstrumentMatrix(Z[0], spec.labels)


def instrument_blocks(dataset, spec, model="full"):
    """Per-group instrument matrices for a whole dataset, in dataset order.

    Groups of equal size are pushed through the kernels together.
    """
    spec.check_model(model)
    out = [None] * dataset.G
    for n, idx in dataset.size_buckets().items():
        A = np.stack([dataset.groups[k].graph.adjacency for k in idx]).astype(np.float64)
        x = np.stack([dataset.groups[k].x for k in idx])
        Z = _stack_instruments(A, x, spec)
        for pos, k in enumerate(idx):
            out[k] = Z[pos]
    return out
