"""Anonymous network-size estimation from extremum-consensus states.

Each agent draws ``p`` uniform values in (0, 1] and the network runs ``p``
max-consensus instances over them.  Once every agent holds the coordinatewise
maxima ``u_max[j]``, the maximum-likelihood size estimate is

    n_hat = -p / sum_j ln(x[j])

Exact consensus reproduces the true maxima, giving expected estimate
``n p / (p - 1)``.  The approximate variant underestimates each maximum; with
every coordinate degraded by ``eps`` in log space (the worst case the decay
permits at steady state), the expected estimate becomes

    n p * e^(eps n p) * E_p(eps n p)

where ``E_p`` is the generalized exponential integral.  That product is
evaluated jointly in scaled form: the naked factors overflow once
``eps * n * p`` passes roughly 700, while the scaled form stays finite for
any workable input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

__all__ = [
    "dse_generate",
    "mle_estimate",
    "exp_scaled_expn",
    "upper_incomplete_gamma",
    "expected_estimate_edmc",
    "expected_estimate_admc",
    "MonteCarloResult",
    "dse_worst_case_monte_carlo",
]

_EULER = 0.5772156649015328606
_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def dse_generate(p: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the ``p`` uniform coordinates one agent contributes.

    Values are uniform on (0, 1]: exact zeros from the generator are rejected
    and redrawn.  A fresh draw happens on every (re)arrival, never lazily.
    """
    if p < 2:
        raise ValueError("at least two coordinates are needed, got p={p}".format(p=p))
    vals = rng.random(p)
    while True:
        zeros = vals == 0.0
        if not zeros.any():
            return vals
        vals[zeros] = rng.random(int(zeros.sum()))


def mle_estimate(x: object) -> float:
    """Maximum-likelihood size estimate from one agent's consensus vector."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("estimate needs a vector of at least two coordinates")
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("all coordinates must lie strictly inside (0, 1)")
    return float(-arr.size / np.log(arr).sum())


def exp_scaled_expn(order: int, x: float) -> float:
    """``e^x * E_order(x)`` for integer ``order >= 1`` and ``x > 0``.

    Continued fraction for ``x >= 1`` (which yields the scaled value
    directly, so there is no overflow for large ``x``), power series below.
    """
    n = int(order)
    if n < 1:
        raise ValueError("order must be a positive integer")
    if not x > 0.0:
        raise ValueError("x must be positive")

    if x >= 1.0:
        # modified Lentz on E_n(x) = e^-x / (x+n - 1*n/(x+n+2 - 2(n+1)/(...)))
        tiny = 1e-300
        b = x + n
        c = 1.0 / tiny
        d = 1.0 / b
        h = d
        for i in range(1, 1000):
            a = -i * (n - 1 + i)
            b += 2.0
            d = 1.0 / (a * d + b)
            c = b + a / c
            delta = c * d
            h *= delta
            if abs(delta - 1.0) < 1e-15:
                return h
        raise RuntimeError(f"continued fraction failed to converge for E_{n}({x})")

    # series: E_n(x) = [(-x)^(n-1)/(n-1)!] (psi(n) - ln x) - sum_{m != n-1} (-x)^m / ((m-n+1) m!)
    nm1 = n - 1
    ans = (1.0 / nm1) if nm1 != 0 else (-math.log(x) - _EULER)
    fact = 1.0
    for m in range(1, 1000):
        fact *= -x / m
        if m != nm1:
            term = -fact / (m - nm1)
        else:
            psi = -_EULER + sum(1.0 / k for k in range(1, nm1 + 1))
            term = fact * (psi - math.log(x))
        ans += term
        if abs(term) < abs(ans) * 1e-17:
            return ans * math.exp(x)
    raise RuntimeError(f"series failed to converge for E_{n}({x})")


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma ``integral_x^inf t^(a-1) e^-t dt`` for ``x > 0``.

    Handles any real ``a``, including zero and negative values where the
    ordinary gamma function has poles.  Negative integers route through the
    exponential integral (``Gamma(1-n, x) = x^(1-n) E_n(x)``); negative
    non-integers step down by the recurrence
    ``Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a`` and may lose a few digits
    to cancellation.
    """
    if not x > 0.0:
        raise ValueError("x must be positive")
    if float(a).is_integer():
        ai = int(a)
        if ai <= 0:
            return math.exp(ai * math.log(x) - x) * exp_scaled_expn(1 - ai, x)
        # finite sum: Gamma(n, x) = (n-1)! e^-x sum_{k<n} x^k / k!
        term = math.exp(-x)
        total = term
        for k in range(1, ai):
            term *= x / k
            total += term
        return math.factorial(ai - 1) * total
    if a > 0:
        return float(_sp.gammaincc(a, x) * _sp.gamma(a))
    steps = int(math.floor(-a)) + 1
    b = a + steps
    value = float(_sp.gammaincc(b, x) * _sp.gamma(b))
    for _ in range(steps):
        b -= 1.0
        value = (value - math.exp(b * math.log(x) - x)) / b
    return value


def expected_estimate_edmc(n: int, p: int) -> float:
    """Expected estimate under exact consensus: ``n p / (p - 1)``."""
    if n < 1:
        raise ValueError("network size must be a positive integer")
    if p < 2:
        raise ValueError("at least two coordinates are needed for a finite mean")
    return n * p / (p - 1)


def expected_estimate_admc(n: int, p: int, eps: float) -> float:
    """Expected worst-case estimate when every maximum is degraded by ``eps``.

    ``eps`` is the steady-state underestimation the approximate protocol
    allows (decay times diameter).  Algebraically this is
    ``eps^(p-1) e^(eps n p) (n p)^p Gamma(1 - p, eps n p)``; substituting the
    exponential-integral form of the incomplete gamma cancels every
    overflow-prone factor and leaves ``n p`` times the scaled integral.
    For ``eps = 0`` it reduces exactly to the exact-consensus value.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return expected_estimate_edmc(n, p)
    if n < 1:
        raise ValueError("network size must be a positive integer")
    if p < 2:
        raise ValueError("at least two coordinates are needed for a finite mean")
    return n * p * exp_scaled_expn(p, eps * n * p)


@dataclass(frozen=True)
class MonteCarloResult:
    """Aggregate of independent worst-case estimation trials."""

    mean: float
    std_error: float
    ci99: float
    trials: int
    floored_coordinates: int
    estimates: np.ndarray

    @property
    def lo(self) -> float:
        return self.mean - self.ci99

    @property
    def hi(self) -> float:
        return self.mean + self.ci99

    def to_dict(self) -> dict:
        return {
            "monte_carlo_mean": self.mean,
            "ci99": self.ci99,
            "std_error": self.std_error,
            "trials": self.trials,
            "floored_coordinates": self.floored_coordinates,
        }


def dse_worst_case_monte_carlo(
    n: int,
    p: int,
    eps: float,
    trials: int,
    seed: int,
    *,
    degrade: str = "log",
    floor: float = 1e-12,
) -> MonteCarloResult:
    """Monte Carlo of the size estimate on worst-case degraded maxima.

    Per trial, draw ``n * p`` uniforms, take the coordinatewise maxima over
    the ``n`` agents, degrade every maximum by ``eps``, and apply the
    estimator.  ``degrade="log"`` multiplies by ``e^-eps`` (the degradation
    model behind :func:`expected_estimate_admc`, so the means agree);
    ``degrade="subtract"`` subtracts ``eps`` outright, which degrades more
    and therefore averages below the closed form.  Subtracted coordinates
    that fall to zero or below are clamped at ``floor`` and counted.

    Trials are independent: trial ``t`` uses ``SeedSequence((seed, t))``, so
    any execution order or partition gives bit-identical aggregates.
    """
    if trials < 2:
        raise ValueError("need at least two trials for a confidence interval")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if degrade not in ("log", "subtract"):
        raise ValueError(f"unknown degradation mode {degrade!r}")
    if n < 1 or p < 2:
        raise ValueError("need n >= 1 agents and p >= 2 coordinates")

    estimates = np.empty(trials)
    floored = 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        u_max = rng.random((n, p)).max(axis=0)
        if degrade == "log":
            logs = np.log(u_max) - eps
        else:
            x = u_max - eps
            low = x < floor
            if low.any():
                floored += int(low.sum())
                x[low] = floor
            logs = np.log(x)
        estimates[t] = -p / logs.sum()
    mean = float(estimates.mean())
    std_error = float(estimates.std(ddof=1) / math.sqrt(trials))
    return MonteCarloResult(
        mean=mean,
        std_error=std_error,
        ci99=_Z99 * std_error,
        trials=trials,
        floored_coordinates=floored,
        estimates=estimates,
    )
