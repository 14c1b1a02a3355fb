"""Gray-level histogram model of blurred two-class volumes.

The intensity histogram is modeled as the sum of three parts: a normal
background peak ``NB``, a normal foreground peak ``F``, and a bridge term
``IB`` for background voxels whose values were pulled up by the point
spread function of nearby foreground ("illuminated background"):

    NB(i) = p_b / (sqrt(2 pi) sigma_b) * exp(-(i - mu_b)^2 / (2 sigma_b^2))
    F(i)  = p_f / (sqrt(2 pi) sigma_f) * exp(-(i - mu_f)^2 / (2 sigma_f^2))
    IB(i) = 2 alpha p_f / (i - mu_b) * log((mu_f - mu_b) / (i - mu_b))
            on mu_b + 2 sigma_b <= i < mu_f, zero elsewhere

The seven parameters are fitted by EM.  ``B = NB + IB`` acts as the
background density for thresholding and posterior probabilities.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 0.5
ALPHA_FLOOR = 1e-6
POSTERIOR_FLOOR = 1e-9
PRIOR_COLLAPSE = 1e-8


class DegenerateHistogram(ValueError):
    """Histogram cannot support a two-class split (fewer than 2 occupied levels)."""


class FitFailure(RuntimeError):
    """Model fitting collapsed or produced no usable threshold."""


class Histogram:
    """Absolute frequencies of gray levels 0..K."""

    __slots__ = ("counts", "total")

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 1 or len(counts) == 0 or (counts < 0).any():
            raise ValueError("histogram counts must be a 1D array of non-negative integers")
        total = int(counts.sum())
        if total <= 0:
            raise ValueError("histogram must contain at least one sample")
        self.counts = counts
        self.total = total

    @classmethod
    def from_values(cls, values, n_levels: int | None = None) -> "Histogram":
        """Count integer samples; ``n_levels`` forces a minimum number of bins."""
        flat = np.asarray(values).ravel()
        if not np.issubdtype(flat.dtype, np.integer):
            raise ValueError(f"histogram input must be integral, got {flat.dtype}")
        if flat.size and int(flat.min()) < 0:
            raise ValueError("negative gray levels not allowed")
        return cls(np.bincount(flat, minlength=n_levels or 1))

    @property
    def n_levels(self) -> int:
        return len(self.counts)

    def normalized(self) -> np.ndarray:
        return self.counts / self.total

    def mean(self) -> float:
        return float(np.arange(self.n_levels) @ self.counts) / self.total

    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def __eq__(self, other):
        return isinstance(other, Histogram) and bool(np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return f"Histogram(n_levels={self.n_levels}, total={self.total})"


@dataclass(frozen=True)
class HistogramModel:
    """The seven fitted mixture parameters.

    ``n_levels`` is bookkeeping carried over from the fitted histogram so
    evaluation can reject out-of-range levels; it is not part of the model
    value and not serialized.
    """

    p_b: float
    mu_b: float
    sigma_b: float
    p_f: float
    mu_f: float
    sigma_f: float
    alpha: float
    n_levels: int | None = None

    def __post_init__(self):
        if not all(
            math.isfinite(v)
            for v in (self.p_b, self.mu_b, self.sigma_b, self.p_f, self.mu_f, self.sigma_f, self.alpha)
        ):
            raise ValueError("model parameters must be finite")
        if not 0 < self.p_b + self.p_f <= 1.0001:
            raise ValueError(f"p_b + p_f = {self.p_b + self.p_f} outside (0, 1.0001]")
        if not (0 <= self.p_b and 0 <= self.p_f):
            raise ValueError("priors must be non-negative")
        if not self.mu_b < self.mu_f:
            raise ValueError(f"mu_b = {self.mu_b} must be below mu_f = {self.mu_f}")
        if self.sigma_b <= 0 or self.sigma_f <= 0:
            raise ValueError("sigmas must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")

    def to_dict(self) -> dict:
        return {
            "p_b": self.p_b,
            "mu_b": self.mu_b,
            "sigma_b": self.sigma_b,
            "p_f": self.p_f,
            "mu_f": self.mu_f,
            "sigma_f": self.sigma_f,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistogramModel":
        return cls(**{k: float(d[k]) for k in ("p_b", "mu_b", "sigma_b", "p_f", "mu_f", "sigma_f", "alpha")})

    def replace(self, **kw) -> "HistogramModel":
        return dataclasses.replace(self, **kw)


def otsu_threshold(h: Histogram) -> int:
    """Threshold maximizing between-class variance; ties go to the smaller level.

    Classes are ``i <= t`` and ``i > t``; callers treat values above t as
    foreground.
    """
    occ = h.occupied()
    if len(occ) < 2:
        raise DegenerateHistogram("need at least 2 occupied gray levels")
    hn = h.normalized()
    i = np.arange(h.n_levels)
    w0 = np.cumsum(hn)
    m0 = np.cumsum(i * hn)
    mean = m0[-1]
    # thresholds keeping both classes non-empty
    ts = np.arange(occ[0], occ[-1])
    w0t = w0[ts]
    w1t = 1.0 - w0t
    mu0 = m0[ts] / w0t
    mu1 = (mean - m0[ts]) / w1t
    var = w0t * w1t * (mu0 - mu1) ** 2
    return int(ts[np.argmax(var)])


def iterative_threshold_init(h: Histogram) -> HistogramModel:
    """Initial model from two-means iterative thresholding.

    The threshold starts at the histogram mean and is replaced by the average
    of the two class means until the split stops moving.  Class means become
    mu_b and mu_f, class masses the priors; sigmas start at 1, alpha at 0.01.
    """
    occ = h.occupied()
    if len(occ) < 2:
        raise DegenerateHistogram("need at least 2 occupied gray levels")
    hn = h.normalized()
    i = np.arange(h.n_levels)
    cum_w = np.cumsum(hn)
    cum_m = np.cumsum(i * hn)
    t = h.mean()
    k = -1
    for _ in range(100):
        k_new = min(max(int(math.floor(t)), occ[0]), occ[-1] - 1)
        if k_new == k:
            break
        k = k_new
        m0 = cum_m[k] / cum_w[k]
        m1 = (cum_m[-1] - cum_m[k]) / (1.0 - cum_w[k])
        t = 0.5 * (m0 + m1)
    p_b = float(cum_w[k])
    return HistogramModel(
        p_b=p_b,
        mu_b=float(cum_m[k] / cum_w[k]),
        sigma_b=1.0,
        p_f=1.0 - p_b,
        mu_f=float((cum_m[-1] - cum_m[k]) / (1.0 - cum_w[k])),
        sigma_f=1.0,
        alpha=0.01,
        n_levels=h.n_levels,
    )


def model_eval(m: HistogramModel, i):
    """Evaluate (NB, IB, F, NB+IB+F) at gray level(s) ``i``.

    Accepts scalars or arrays; scalar input yields scalar floats.
    """
    arr = np.asarray(i, dtype=np.float64)
    if arr.size and float(arr.min()) < 0:
        raise ValueError("gray levels must be >= 0")
    if m.n_levels is not None and arr.size and float(arr.max()) > m.n_levels - 1:
        raise ValueError(f"gray level beyond top level {m.n_levels - 1}")
    norm = 1.0 / math.sqrt(2.0 * math.pi)
    nb = m.p_b * norm / m.sigma_b * np.exp(-((arr - m.mu_b) ** 2) / (2.0 * m.sigma_b**2))
    f = m.p_f * norm / m.sigma_f * np.exp(-((arr - m.mu_f) ** 2) / (2.0 * m.sigma_f**2))
    ib = np.zeros_like(arr)
    support = (arr >= m.mu_b + 2.0 * m.sigma_b) & (arr < m.mu_f)
    if support.any():
        d = arr[support] - m.mu_b
        ib[support] = 2.0 * m.alpha * m.p_f / d * np.log((m.mu_f - m.mu_b) / d)
    total = nb + ib + f
    if np.isscalar(i) or arr.ndim == 0:
        return float(nb), float(ib), float(f), float(total)
    return nb, ib, f, total


def em_step(h: Histogram, m: HistogramModel) -> HistogramModel:
    """One E+M iteration of the mixture fit.

    E-step: per-bin responsibilities ``w^c(i) = c(i) / h_model(i)`` for each
    of the three components.  M-step: priors are responsibility-weighted
    histogram masses, normal moments are normalized by their prior; alpha is
    refit from the bridge mass with the truncation correction
    ``eps = 2 sigma_b / (mu_f - mu_b)``.
    """
    hn = h.normalized()
    i = np.arange(h.n_levels, dtype=np.float64)
    nb, ib, f, total = model_eval(m, i)
    with np.errstate(invalid="ignore", divide="ignore"):
        wb = np.where(total > 0, nb / total, 0.0)
        wib = np.where(total > 0, ib / total, 0.0)
        wf = np.where(total > 0, f / total, 0.0)

    p_b = float(wb @ hn)
    p_f = float(wf @ hn)
    if p_b < PRIOR_COLLAPSE or p_f < PRIOR_COLLAPSE:
        which = "background" if p_b < PRIOR_COLLAPSE else "foreground"
        raise FitFailure(f"{which} prior collapsed to {min(p_b, p_f):.3g}")
    mu_b = float((i * wb) @ hn) / p_b
    mu_f = float((i * wf) @ hn) / p_f
    if not mu_b < mu_f:
        raise FitFailure(f"class means crossed (mu_b={mu_b:.3g}, mu_f={mu_f:.3g})")
    sigma_b = max(math.sqrt(float(((i - mu_b) ** 2 * wb) @ hn) / p_b), SIGMA_FLOOR)
    sigma_f = max(math.sqrt(float(((i - mu_f) ** 2 * wf) @ hn) / p_f), SIGMA_FLOOR)

    bridge_mass = float(wib @ hn)
    eps = 2.0 * sigma_b / (mu_f - mu_b)
    if eps >= 1.0:
        # bridge support is empty, no evidence to fit alpha from
        alpha = ALPHA_FLOOR
    else:
        # the truncated bridge integrates to alpha * p_f * log^2(eps);
        # inverting that keeps the refit self-consistent
        alpha = max(bridge_mass / (p_f * math.log(eps) ** 2), ALPHA_FLOOR)
    return HistogramModel(p_b, mu_b, sigma_b, p_f, mu_f, sigma_f, alpha, n_levels=h.n_levels)


def em_fit(
    h: Histogram,
    init: HistogramModel | None = None,
    max_iter: int = 50,
    tol: float = 1e-4,
) -> HistogramModel:
    """Fit the mixture by EM until the largest relative parameter change
    drops below ``tol`` (or ``max_iter`` iterations)."""
    m = iterative_threshold_init(h) if init is None else init.replace(n_levels=h.n_levels)
    for _ in range(max_iter):
        m_new = em_step(h, m)
        rel = max(
            abs(b - a) / max(abs(a), 1e-12)
            for a, b in zip(_param_tuple(m), _param_tuple(m_new))
        )
        m = m_new
        if rel < tol:
            break
    return m


def _param_tuple(m: HistogramModel):
    return (m.p_b, m.mu_b, m.sigma_b, m.p_f, m.mu_f, m.sigma_f, m.alpha)


def model_threshold(m: HistogramModel) -> int:
    """Smallest gray level in (mu_b, mu_f] where the foreground density
    reaches the background density B = NB + IB.  Values above it classify
    as foreground."""
    lo = int(math.floor(m.mu_b)) + 1
    hi = int(math.floor(m.mu_f))
    if m.n_levels is not None:
        hi = min(hi, m.n_levels - 1)
    if hi >= max(lo, 0):
        i = np.arange(max(lo, 0), hi + 1, dtype=np.float64)
        nb, ib, f, _ = model_eval(m, i)
        hits = np.flatnonzero(f >= nb + ib)
        if len(hits):
            return int(i[hits[0]])
    raise FitFailure("foreground density never reaches background density in (mu_b, mu_f]")


def background_posterior(m: HistogramModel, i):
    """P(background | gray level) = B(i) / h_model(i), clamped to [1e-9, 1].

    Where the model density underflows to zero the level is assigned to the
    class whose mean is nearer in units of its sigma.
    """
    nb, ib, f, total = model_eval(m, i)
    arr = np.asarray(i, dtype=np.float64)
    b = np.asarray(nb) + np.asarray(ib)
    total = np.asarray(total)
    nearer_b = np.abs(arr - m.mu_b) / m.sigma_b <= np.abs(arr - m.mu_f) / m.sigma_f
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, b / np.where(total > 0, total, 1.0), np.where(nearer_b, 1.0, 0.0))
    p = np.clip(p, POSTERIOR_FLOOR, 1.0)
    if np.isscalar(i) or arr.ndim == 0:
        return float(p)
    return p
