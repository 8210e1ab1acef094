"""Observation models for bounded vegetation-index series.

Three candidate likelihoods share a single variance-style parameter
``sigma2``:

* ``normal``: Normal(mu, sigma2).
* ``tnormal``: Normal(mu, sigma2) truncated to a closed interval [a, b];
  density is zero (log-density -inf) outside [a, b].
* ``beta``: Beta in the mean-precision parameterization with mean ``mu`` and
  precision ``phi = 1/sigma2``, i.e. shapes ``p = mu*phi`` and
  ``q = (1 - mu)*phi``.

Log-densities return ``-inf`` (never raise) whenever the density is zero or
undefined because the mean left the admissible set; a Metropolis step can then
simply reject such proposals. Errors are reserved for structurally invalid
parameters (``sigma2 <= 0``, truncation bounds with ``a >= b``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr, ndtri

from .curve import CurveParams, IndexBounds, _curve_raw

__all__ = [
    "NoiseParam",
    "LikelihoodKind",
    "ObservationSeries",
    "log_density",
    "series_log_likelihood",
    "predictive_draw",
    "simulate_series",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseParam:
    """Likelihood noise parameter: the variance ``sigma2``.

    For the Beta likelihood this is the reciprocal of the precision
    (``phi = 1/sigma2``) rather than the variate's variance.
    """

    sigma2: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"sigma2 must be finite and > 0, got {self.sigma2}")

    def __float__(self) -> float:
        return self.sigma2


@dataclass(frozen=True)
class LikelihoodKind:
    """One of the three observation models: normal, tnormal, or beta.

    Use the constructors :meth:`normal`, :meth:`truncated_normal`, and
    :meth:`beta`; truncation bounds are validated there.
    """

    kind: str
    a: float = float("nan")
    b: float = float("nan")

    def __post_init__(self):
        if self.kind not in ("normal", "tnormal", "beta"):
            raise ValueError(f"unknown likelihood kind {self.kind!r}")
        if self.kind == "tnormal":
            if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
                raise ValueError(
                    f"truncation bounds require a < b, got ({self.a}, {self.b})"
                )

    @classmethod
    def normal(cls) -> "LikelihoodKind":
        return cls("normal")

    @classmethod
    def truncated_normal(cls, a: float, b: float) -> "LikelihoodKind":
        return cls("tnormal", float(a), float(b))

    @classmethod
    def beta(cls) -> "LikelihoodKind":
        return cls("beta")


@dataclass(frozen=True)
class ObservationSeries:
    """One pixel's (day-of-year, VI value) observations plus index bounds.

    Parameters
    ----------
    doys : array-like of float
        Days of year, real-valued, each in [1, 365].
    values : array-like of float
        VI observations, finite, same length as ``doys``.
    bounds : IndexBounds
        The index support (gamma1, gamma2) used by prior construction.
    """

    doys: np.ndarray
    values: np.ndarray
    bounds: IndexBounds = field(default_factory=lambda: IndexBounds(0.0, 1.0))

    def __post_init__(self):
        doys = np.asarray(self.doys, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "doys", doys)
        object.__setattr__(self, "values", values)
        if doys.ndim != 1 or values.ndim != 1 or doys.size != values.size:
            raise ValueError("doys and values must be 1-d arrays of equal length")
        if doys.size and not (np.isfinite(doys).all()
                              and doys.min() >= 1.0 and doys.max() <= 365.0):
            raise ValueError("doys must be finite and within [1, 365]")
        if values.size and not np.isfinite(values).all():
            raise ValueError("values must be finite")

    def __len__(self) -> int:
        return self.doys.size


def _as_sigma2(sigma2) -> float:
    s2 = float(sigma2)
    if not (np.isfinite(s2) and s2 > 0):
        raise ValueError(f"sigma2 must be finite and > 0, got {s2}")
    return s2


def _tn_log_mass(mu, sd, a, b):
    """log(Phi((b-mu)/sd) - Phi((a-mu)/sd)), cancellation-safe.

    When both standardized bounds are positive the difference is reflected
    (Phi(x2) - Phi(x1) = Phi(-x1) - Phi(-x2)) so the larger CDF value is the
    well-conditioned one; the difference of logs then goes through log1p.
    Vectorized over mu.
    """
    za = (a - mu) / sd
    zb = (b - mu) / sd
    flip = za > 0
    hi = np.where(flip, -za, zb)
    lo = np.where(flip, -zb, za)
    la = log_ndtr(hi)
    lb = log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return la + np.log1p(-np.exp(lb - la))


def log_density(kind: LikelihoodKind, y: float, mu: float, sigma2) -> float:
    """Log-density of one observation under the chosen likelihood.

    Parameters
    ----------
    kind : LikelihoodKind
    y : float
        Observed value.
    mu : float
        Mean (the curve value at the observation's day).
    sigma2 : float or NoiseParam
        Variance (Beta: reciprocal precision). Must be > 0.

    Returns
    -------
    float
        ``log f(y | mu, sigma2)``. Returns ``-inf`` when the density is zero
        or undefined: ``tnormal`` with ``y`` outside [a, b], ``beta`` with
        ``mu`` outside (0, 1) or ``y`` outside the open interval (0, 1).

    Raises
    ------
    ValueError
        Only for structurally invalid parameters (``sigma2 <= 0``; truncation
        bounds are validated at LikelihoodKind construction).
    """
    s2 = _as_sigma2(sigma2)
    if kind.kind == "normal":
        return -0.5 * (_LOG_2PI + math.log(s2)) - (y - mu) ** 2 / (2.0 * s2)
    if kind.kind == "tnormal":
        if y < kind.a or y > kind.b:
            return -math.inf
        sd = math.sqrt(s2)
        base = -0.5 * (_LOG_2PI + math.log(s2)) - (y - mu) ** 2 / (2.0 * s2)
        return base - float(_tn_log_mass(np.float64(mu), sd, kind.a, kind.b))
    # beta
    if not (0.0 < mu < 1.0) or not (0.0 < y < 1.0):
        return -math.inf
    phi = 1.0 / s2
    p = mu * phi
    q = (1.0 - mu) * phi
    return float(
        gammaln(phi) - gammaln(p) - gammaln(q)
        + (p - 1.0) * math.log(y) + (q - 1.0) * math.log1p(-y)
    )


def series_loglik_fn(kind: LikelihoodKind, series: ObservationSeries):
    """Build a fast evaluator ``f(alphas, sigma2) -> float`` for one series.

    ``alphas`` is a length-7 array (or sequence) of curve parameters. The
    returned closure computes the summed log-likelihood of the series with
    precomputed per-series constants; it is the single code path used by both
    :func:`series_log_likelihood` and the sampler, so the two cannot diverge.
    """
    t = series.doys
    y = series.values
    n = y.size
    if n == 0:
        raise ValueError("series must be non-empty")

    if kind.kind == "normal":
        def loglik(al, s2):
            mu = _curve_raw(t, al[0], al[1], al[2], al[3], al[4], al[5], al[6])
            r = y - mu
            return -0.5 * n * (_LOG_2PI + math.log(s2)) - float(r @ r) / (2.0 * s2)
        return loglik

    if kind.kind == "tnormal":
        a, b = kind.a, kind.b
        if (y < a).any() or (y > b).any():
            def loglik(al, s2):
                return -math.inf
            return loglik

        def loglik(al, s2):
            mu = _curve_raw(t, al[0], al[1], al[2], al[3], al[4], al[5], al[6])
            sd = math.sqrt(s2)
            r = y - mu
            base = -0.5 * n * (_LOG_2PI + math.log(s2)) - float(r @ r) / (2.0 * s2)
            return base - float(_tn_log_mass(mu, sd, a, b).sum())
        return loglik

    # beta
    if (y <= 0.0).any() or (y >= 1.0).any():
        def loglik(al, s2):
            return -math.inf
        return loglik
    log_y = np.log(y)
    log_1my = np.log1p(-y)

    def loglik(al, s2):
        mu = _curve_raw(t, al[0], al[1], al[2], al[3], al[4], al[5], al[6])
        if mu.min() <= 0.0 or mu.max() >= 1.0:
            return -math.inf
        phi = 1.0 / s2
        p = mu * phi
        q = phi - p
        return float(
            n * gammaln(phi) - gammaln(p).sum() - gammaln(q).sum()
            + (p - 1.0) @ log_y + (q - 1.0) @ log_1my
        )
    return loglik


def series_log_likelihood(kind: LikelihoodKind, series: ObservationSeries,
                          p: CurveParams, sigma2) -> float:
    """Summed log-density of a series at curve ``p`` and variance ``sigma2``.

    Equals the sum over observations of
    ``log_density(kind, y(t), curve_value(t, p), sigma2)``; ``-inf`` if any
    term is ``-inf``.

    Raises
    ------
    ValueError
        If the series is empty or ``sigma2 <= 0``.
    """
    s2 = _as_sigma2(sigma2)
    if not p.alpha3 + p.alpha6 > 0:
        raise ValueError(
            "degenerate rates: alpha3 + alpha6 must be > 0 to evaluate the curve"
        )
    return series_loglik_fn(kind, series)(p.to_array(), s2)


def predictive_draw(kind: LikelihoodKind, mu: float, sigma2,
                    rng: np.random.Generator) -> float:
    """Draw one observation from the likelihood at mean ``mu``.

    ``normal``: ``mu + sd * z``. ``tnormal``: inverse-CDF transform of a
    uniform draw on the truncated quantile range (never rejection sampling);
    the result is clamped into [a, b] to absorb last-ulp rounding. ``beta``:
    a Beta(mu*phi, (1-mu)*phi) draw.

    Raises
    ------
    ValueError
        For ``sigma2 <= 0``, or for the Beta kind when ``mu`` is outside
        (0, 1): sampling is an explicit request, so an inadmissible mean is
        an error here rather than a rejection.
    """
    s2 = _as_sigma2(sigma2)
    if kind.kind == "normal":
        return mu + math.sqrt(s2) * rng.standard_normal()
    if kind.kind == "tnormal":
        sd = math.sqrt(s2)
        fa = ndtr((kind.a - mu) / sd)
        fb = ndtr((kind.b - mu) / sd)
        u = rng.random()
        x = mu + sd * float(ndtri(fa + u * (fb - fa)))
        return min(max(x, kind.a), kind.b)
    if not (0.0 < mu < 1.0):
        raise ValueError(
            f"beta predictive draw needs mean in (0, 1), got {mu}"
        )
    phi = 1.0 / s2
    return float(rng.beta(mu * phi, (1.0 - mu) * phi))


def simulate_series(kind: LikelihoodKind, p: CurveParams, sigma2, doys,
                    rng: np.random.Generator,
                    bounds: IndexBounds | None = None) -> ObservationSeries:
    """Generate a synthetic series: one predictive draw per day of year.

    ``y(t) = predictive_draw(kind, curve_value(t, p), sigma2)`` for each t in
    ``doys``, in order, consuming the caller-owned ``rng``; deterministic
    given the rng state.

    Parameters
    ----------
    bounds : IndexBounds, optional
        Index bounds attached to the returned series; defaults to (0, 1).

    Raises
    ------
    ValueError
        If ``doys`` is empty or outside [1, 365]; propagates
        :func:`predictive_draw` errors (e.g. a Beta mean outside (0, 1)).
    """
    doys = np.asarray(doys, dtype=np.float64)
    if doys.size == 0:
        raise ValueError("doys must be non-empty")
    if not (np.isfinite(doys).all() and doys.min() >= 1.0 and doys.max() <= 365.0):
        raise ValueError("doys must be finite and within [1, 365]")
    s2 = _as_sigma2(sigma2)
    if not p.alpha3 + p.alpha6 > 0:
        raise ValueError(
            "degenerate rates: alpha3 + alpha6 must be > 0 to evaluate the curve"
        )
    mus = _curve_raw(doys, p.alpha1, p.alpha2, p.alpha3, p.alpha4,
                     p.alpha5, p.alpha6, p.alpha7)
    values = np.array(
        [predictive_draw(kind, float(m), s2, rng) for m in mus],
        dtype=np.float64,
    )
    return ObservationSeries(doys, values,
                             bounds if bounds is not None else IndexBounds(0.0, 1.0))
