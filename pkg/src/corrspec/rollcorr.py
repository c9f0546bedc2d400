"""Rolling correlation matrices over standardized return windows.

Each window of ``S`` return rows is column-standardized (population moments)
and the correlation matrix is the Gram form ``C = Z'Z / S`` of the
standardized slice ``Z``.  That construction makes the matrix symmetric,
unit-diagonal and positive semi-definite by design; construction-time
validation enforces all three.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .ingest import ReturnsPanel, ZeroVarianceError, standardize_window


class CorrelationError(ValueError):
    """A correlation matrix failed its structural invariants."""


@dataclass(frozen=True)
class CorrelationMatrix:
    """Correlation of one rolling window.

    Attributes
    ----------
    t : int
        0-based index of the last return row in the window.
    tickers : tuple of str
        Column labels, in panel order.
    values : (N, N) array
        The correlation matrix.
    sigma2 : float
        Population variance of the standardized window entries the matrix
        was built from (1 up to float error for population standardization;
        recomputed rather than assumed).
    """

    t: int
    tickers: tuple[str, ...]
    values: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        self._validate()

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def _validate(self) -> None:
        c = self.values
        n = len(self.tickers)
        if c.shape != (n, n):
            raise CorrelationError(
                f"t={self.t}: matrix shape {c.shape} does not match {n} tickers")
        if not np.all(np.isfinite(c)):
            raise CorrelationError(f"t={self.t}: non-finite correlation entries")
        if np.abs(c - c.T).max(initial=0.0) > 1e-12:
            raise CorrelationError(f"t={self.t}: correlation matrix not symmetric")
        if np.abs(np.diag(c) - 1.0).max(initial=0.0) > 1e-12:
            raise CorrelationError(f"t={self.t}: correlation diagonal deviates from 1")
        if np.abs(c).max(initial=0.0) > 1.0 + 1e-12:
            raise CorrelationError(f"t={self.t}: correlation entries outside [-1, 1]")
        if n and float(np.linalg.eigvalsh(c)[0]) < -1e-8:
            raise CorrelationError(f"t={self.t}: correlation matrix not PSD")


def rolling_correlation(returns: ReturnsPanel, window: int, t: int) -> CorrelationMatrix:
    """Correlation matrix of the ``window`` rows ending at row ``t``.

    Raises
    ------
    ZeroVarianceError
        If any column is constant over the window (carries ticker and ``t``).
    """
    z = standardize_window(returns, window, t)
    c = z.T @ z / window
    c = (c + c.T) / 2.0
    np.fill_diagonal(c, 1.0)
    sigma2 = float(z.var())
    return CorrelationMatrix(t=t, tickers=returns.tickers, values=c, sigma2=sigma2)


def rolling_correlation_series(returns: ReturnsPanel,
                               window: int) -> Iterator[CorrelationMatrix]:
    """Lazily yield one correlation matrix per admissible window end.

    For a panel of ``R`` return rows the window ends run ``window-1 .. R-1``
    (0-based), giving exactly ``R - window + 1`` matrices.  Errors raised for
    a window carry the failing ``t`` (see :class:`ZeroVarianceError`).
    """
    n_rows = returns.values.shape[0]
    if window > n_rows:
        raise CorrelationError(
            f"window {window} exceeds panel length {n_rows}")
    for t in range(window - 1, n_rows):
        yield rolling_correlation(returns, window, t)
