"""Bayesian estimation of the correlation parameter from coincidence-type totals.

With a uniform prior on the probability simplex and the unobserved
same-port same-polarization events summed out, the posterior is

    p_sd^k_sd * p_ds^k_ds * p_dd^k_dd * (p_ss/4)^k_ss / (1 - p_ss/4)^(k_ss+1)

Expanding the last factor as a binomial series and integrating term by term
against the Dirichlet integrals gives every moment of ``p_dd - p_ds`` as a
ratio of regularized Gauss hypergeometric functions
``2F1~(1+k_ss, 1+k_ss; c; 1/4)`` with ``c = n + 4`` (normalization),
``n + 5`` (first moment) and ``n + 6`` (second moment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qseal.photonics import CoincidenceProbabilities, NORM_TOL, ValidationError

KAPPA_FIELDS = ("k_sd", "k_ss", "k_ds", "k_dd")


class DomainError(ValueError):
    """Raised when a special function is requested outside its convergent regime."""


class ResolutionError(RuntimeError):
    """Raised when the quadrature oracle is asked for more than it can resolve."""


@dataclass(frozen=True)
class KappaTotals:
    """Corrected coincidence-type totals (real valued after efficiency normalization)."""

    k_sd: float = 0.0
    k_ss: float = 0.0
    k_ds: float = 0.0
    k_dd: float = 0.0

    def __post_init__(self):
        for name in KAPPA_FIELDS:
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def n(self) -> float:
        # grouped so that swapping k_ds and k_dd leaves n bit-identical
        return (self.k_sd + self.k_ss) + (self.k_ds + self.k_dd)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.k_sd, self.k_ss, self.k_ds, self.k_dd)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(KAPPA_FIELDS, self.as_tuple()))


@dataclass(frozen=True)
class Estimate:
    e_kappa: float
    sigma_kappa: float
    n: float
    window_id: int = 0


def _as_kappa(kappa) -> KappaTotals:
    return kappa if isinstance(kappa, KappaTotals) else KappaTotals(*kappa)


# -- hypergeometric series ---------------------------------------------------

_MAX_TERMS = 1_000_000


def log_hyp2f1_regularized(a: float, b: float, c: float, z: float, rtol: float = 1e-14) -> float:
    """Natural log of ``2F1(a, b; c; z) / Gamma(c)`` for ``a, b, c > 0`` and ``0 <= z < 1``.

    The Gauss series is summed with a running log-scale so that neither large
    ``c`` (through ``1/Gamma(c)``) nor large ``a, b`` (through growing early
    terms) overflows.
    """
    if not (c > 0 and math.isfinite(c)):
        raise DomainError(f"c must be positive and finite, got {c!r}")
    if not (0.0 <= z < 1.0):
        raise DomainError(f"series diverges or is undefined for z={z!r}")
    lg_c = math.lgamma(c)
    if z == 0.0:
        return -lg_c
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")

    log_z = math.log(z)
    log_term = 0.0     # log of the current term, relative to term 0 == 1
    log_scale = 0.0    # total == acc * exp(log_scale)
    acc = 1.0
    for k in range(_MAX_TERMS):
        log_term += math.log((a + k) * (b + k) / ((c + k) * (k + 1.0))) + log_z
        if log_term > log_scale + 300.0:
            acc *= math.exp(log_scale - log_term)
            log_scale = log_term
        rel = math.exp(log_term - log_scale)
        acc += rel
        ratio = (a + k + 1) * (b + k + 1) * z / ((c + k + 1) * (k + 2.0))
        # once the term ratio is below one it stays below ratio_max, so the
        # remaining tail is bounded by a geometric series
        if ratio < 1.0 and rel * ratio / (1.0 - max(ratio, z)) <= rtol * acc:
            return math.log(acc) + log_scale - lg_c
    raise DomainError(f"2F1({a}, {b}; {c}; {z}) did not converge in {_MAX_TERMS} terms")


def hyp2f1_regularized(a: float, b: float, c: float, z: float) -> float:
    """Regularized Gauss hypergeometric function ``2F1(a, b; c; z) / Gamma(c)``.

    Underflows to 0.0 when ``1/Gamma(c)`` does; use
    :func:`log_hyp2f1_regularized` for ratios at large ``c``.
    """
    return math.exp(log_hyp2f1_regularized(a, b, c, z))


# -- posterior -----------------------------------------------------------------

def _xlogy(k, p):
    # k*log(p) with the 0*log(0) = 0 convention
    return np.where(k == 0, 0.0, k * np.log(np.where(p > 0, p, 1.0)) + np.where(p > 0, 0.0, -np.inf))


def log_posterior_density(p_sd, p_ss, p_ds, p_dd, kappa) -> np.ndarray:
    """Unnormalized log posterior, vectorized over the probability arguments."""
    k = _as_kappa(kappa)
    s4 = np.asarray(p_ss, dtype=float) / 4.0
    return (
        _xlogy(k.k_sd, np.asarray(p_sd, dtype=float))
        + _xlogy(k.k_ds, np.asarray(p_ds, dtype=float))
        + _xlogy(k.k_dd, np.asarray(p_dd, dtype=float))
        + _xlogy(k.k_ss, s4)
        - (k.k_ss + 1.0) * np.log1p(-s4)
    )


def posterior_density(p: CoincidenceProbabilities | tuple, kappa) -> float:
    """Unnormalized posterior density of ``p = (p_sd, p_ss, p_ds, p_dd)`` given ``kappa``."""
    if isinstance(p, CoincidenceProbabilities):
        p = p.as_tuple()
    p = tuple(float(x) for x in p)
    if len(p) != 4 or any(x < 0 or not math.isfinite(x) for x in p) or abs(sum(p) - 1) > NORM_TOL:
        raise ValidationError(f"{p} is not on the probability simplex")
    return float(np.exp(log_posterior_density(*p, kappa)))


def estimate_correlation(kappa, window_id: int = 0) -> Estimate:
    """Posterior mean and standard deviation of ``p_dd - p_ds``."""
    k = _as_kappa(kappa)
    n = k.n
    a = 1.0 + k.k_ss
    lf4 = log_hyp2f1_regularized(a, a, n + 4.0, 0.25)
    lf5 = log_hyp2f1_regularized(a, a, n + 5.0, 0.25)
    lf6 = log_hyp2f1_regularized(a, a, n + 6.0, 0.25)
    diff = k.k_dd - k.k_ds
    mean = diff * math.exp(lf5 - lf4)
    second = (diff * diff + k.k_dd + k.k_ds + 2.0) * math.exp(lf6 - lf4)
    var = max(second - mean * mean, 0.0)
    return Estimate(mean, math.sqrt(var), n, window_id)


# -- quadrature oracle --------------------------------------------------------

def _smoothstep_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0, 1] pushed through x = t^3 (10 - 15 t + 6 t^2).

    The map has vanishing first and second derivatives at both ends, which
    tames the fractional-power endpoint behaviour of p^k for non-integer k.
    """
    t, w = np.polynomial.legendre.leggauss(m)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    x = t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    dx = 30.0 * t**2 * (1.0 - t) ** 2
    return x, w * dx


def oracle_estimate(kappa, nodes: int = 200, window_id: int = 0) -> Estimate:
    """Posterior moments of ``p_dd - p_ds`` by brute-force tensor quadrature on the simplex.

    The simplex is parametrized by stick breaking,
    ``p_ss = u, p_sd = (1-u) v, p_ds = (1-u)(1-v) w, p_dd = (1-u)(1-v)(1-w)``,
    and the posterior density is evaluated at every node of a ``nodes**3``
    grid. Independent of the hypergeometric closed form.
    """
    k = _as_kappa(kappa)
    if k.n > 1e4:
        raise ResolutionError("oracle is limited to n <= 1e4")
    if nodes < 200:
        raise ResolutionError("oracle needs at least 200 nodes per dimension")
    x, wx = _smoothstep_nodes(nodes)
    u = x[:, None, None]
    v = x[None, :, None]
    w = x[None, None, :]
    W = wx[None, :, None] * wx[None, None, :]

    peak = -np.inf
    z0 = z1 = z2 = 0.0
    for i in range(nodes):
        one_u = 1.0 - u[i]
        p_sd = one_u * v
        p_ds = one_u * (1.0 - v) * w
        p_dd = one_u * (1.0 - v) * (1.0 - w)
        logf = log_posterior_density(p_sd, u[i], p_ds, p_dd, k)
        slab_peak = float(np.max(logf))
        if slab_peak > peak:
            # rescale the running sums to the new reference peak
            shrink = math.exp(peak - slab_peak) if np.isfinite(peak) else 0.0
            z0, z1, z2 = z0 * shrink, z1 * shrink, z2 * shrink
            peak = slab_peak
        f = (wx[i] * one_u**2) * W * (1.0 - v) * np.exp(logf - peak)
        e = p_dd - p_ds
        fe = f * e
        z0 += float(np.sum(f))
        z1 += float(np.sum(fe))
        z2 += float(np.sum(fe * e))
    mean = z1 / z0
    var = max(z2 / z0 - mean * mean, 0.0)
    return Estimate(mean, math.sqrt(var), k.n, window_id)


def gaussian_model(e_center: float, sigma: float):
    """Normal density in the estimate, centred on the hypothesis mean."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    norm = 1.0 / math.sqrt(2.0 * math.pi * sigma * sigma)

    def density(e):
        e = np.asarray(e, dtype=float)
        out = norm * np.exp(-((e - e_center) ** 2) / (2.0 * sigma * sigma))
        return float(out) if out.ndim == 0 else out

    density.mean = e_center
    density.sigma = sigma
    return density
