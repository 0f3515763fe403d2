"""Sequence-memory capacity: Monte Carlo bit-error estimates and closed forms."""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .analysis import slow_trajectory_analytic
from .dynamics import fmt
from .io import write_json
from .patterns import _MAX_CODE_BITS, distinct_rademacher

log = logging.getLogger(__name__)

K_LOGISTIC = math.sqrt(2.0 / math.pi)
MODELS = ("eden", "reference")


@dataclass(frozen=True)
class CapacitySpec:
    """Monte Carlo capacity settings.

    EDEN uses ``alpha_c = alpha`` and ``alpha_s = r * alpha``. The reference
    network ignores ``alpha`` and uses ``alpha_c = 1 / (2 (N - 1))``, the
    scale at which its fixed point sits on the clamp corner.
    """

    n_features: int
    alpha: float = 2.0
    r: float = 0.999
    epsilon: float = 1e-3
    delta: float = 1e-3
    trials: int = 100
    p_cap: int = 10**6
    targets_per_trial: int = 10
    model: str = "eden"
    tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        if int(self.n_features) != self.n_features or self.n_features < 1:
            raise ValueError("n_features must be a positive integer")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not 0 < self.r <= 1:
            raise ValueError("r must lie in (0, 1]")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        # delta = 1 is accepted as the vacuous criterion
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        for name in ("trials", "p_cap", "targets_per_trial", "max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.model == "reference" and self.n_features < 2:
            raise ValueError("the reference network needs N >= 2")

    @property
    def p_limit(self):
        """Largest searchable P: ``min(p_cap, 2**N)``."""
        if self.n_features <= _MAX_CODE_BITS:
            return min(self.p_cap, 1 << self.n_features)
        return self.p_cap

    def couplings(self):
        """``(alpha_s, alpha_c)`` for the selected model."""
        if self.model == "reference":
            a_c = 1.0 / (2.0 * (self.n_features - 1))
        else:
            a_c = self.alpha
        return self.r * a_c, a_c

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return CapacitySpec(**d)


@dataclass
class CapacityEstimate:
    spec: CapacitySpec
    p_values: list = field(default_factory=list)
    error_prob: list = field(default_factory=list)
    stderr: list = field(default_factory=list)
    n_bits: list = field(default_factory=list)
    capacity: int = 0
    analytic_capacity: float = math.nan
    saturated: bool = False

    def curve(self):
        """Tested points sorted by P."""
        order = np.argsort(self.p_values, kind="stable")
        return [(self.p_values[i], self.error_prob[i], self.stderr[i], self.n_bits[i]) for i in order]


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------

def transition_slow_state(xi_before, xi_prev, r):
    """Slow state at the moment the fast state leaves ``xi_prev``.

    Pinned at ``xi_prev`` for one escape period after arriving with
    ``sqrt(r) xi_before`` in the slow trace. Tends to ``xi_prev`` as r -> 1.
    """
    lam = math.sqrt(r)
    te = -math.log1p(-lam) if lam < 1 else math.inf
    if math.isinf(te):
        return np.asarray(xi_prev, dtype=float).copy()
    return slow_trajectory_analytic(lam, xi_before, xi_prev, 1.0, te)


def _trial_errors(job):
    """Bit failures and bit count for one trial; a non-converged target counts all N bits."""
    spec, P, seed, trial = job
    N = spec.n_features
    rng = np.random.default_rng([seed, trial])
    xi = distinct_rademacher(rng, N, P)
    prev = np.roll(xi, 1, axis=0)
    targets = rng.choice(P, size=min(P, spec.targets_per_trial), replace=False)
    a_s, a_c = spec.couplings()
    bad = 0
    for mu in targets:
        target = xi[mu]
        s = transition_slow_state(xi[(mu - 2) % P], xi[(mu - 1) % P], spec.r)
        if spec.model == "eden":
            v, _, _, ok = kernels.eden_fixed_point(xi, a_c * (prev @ s), target, a_s, spec.tol, spec.max_iter)
        else:
            bias = a_c * ((prev @ s) @ xi)
            v, _, _, ok = kernels.reference_fixed_point(xi, bias, target, a_s, spec.tol, spec.max_iter)
        if ok:
            bad += int(np.count_nonzero(v * target < 1.0 - spec.epsilon))
        else:
            bad += N
    return bad, len(targets) * N


def single_bit_error_stats(spec, P, seed=0, executor=None):
    """Pooled bit-error frequency with a trial-level standard error.

    Returns ``(p, stderr, n_bits)``. Trial ``t`` draws from
    ``default_rng([seed, t])``, so the result does not depend on scheduling.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    if spec.n_features <= _MAX_CODE_BITS and P > (1 << spec.n_features):
        raise ValueError(f"P={P} exceeds 2**{spec.n_features}")
    jobs = [(spec, int(P), seed, t) for t in range(spec.trials)]
    results = list(executor.map(_trial_errors, jobs)) if executor else [_trial_errors(j) for j in jobs]
    bad = np.array([b for b, _ in results], dtype=float)
    tot = np.array([n for _, n in results], dtype=float)
    p = float(bad.sum() / tot.sum())
    rates = bad / tot
    se = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else math.nan
    return p, se, int(tot.sum())


def single_bit_error_probability(spec, P, seed=0, executor=None):
    return single_bit_error_stats(spec, P, seed, executor)[0]


def empirical_capacity(spec, seed=0, jobs=1, executor=None):
    """Largest P with estimated bit-error rate <= delta.

    P is doubled from 1 until the criterion fails or ``p_limit`` is
    reached, then bisected between the last pass and the first failure.
    ``saturated`` marks a capacity equal to ``p_limit`` (a lower bound).
    """
    own = executor is None and jobs > 1
    if own:
        executor = ProcessPoolExecutor(max_workers=jobs)
    est = CapacityEstimate(spec=spec)
    try:
        def passes(P):
            p, se, n = single_bit_error_stats(spec, P, seed, executor)
            est.p_values.append(int(P))
            est.error_prob.append(p)
            est.stderr.append(se)
            est.n_bits.append(n)
            log.debug("N=%d P=%d p=%.3g", spec.n_features, P, p)
            return p <= spec.delta

        limit = spec.p_limit
        lo, hi, P = 0, None, 1
        while True:
            if passes(P):
                lo = P
                if P >= limit:
                    break
                P = min(2 * P, limit)
            else:
                hi = P
                break
        if hi is not None:
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if passes(mid):
                    lo = mid
                else:
                    hi = mid
        est.capacity = lo
        est.saturated = lo >= limit
    finally:
        if own:
            executor.shutdown()
    if spec.model == "eden":
        est.analytic_capacity = analytic_capacity_eden(spec) if spec.delta < 1 else math.inf
    else:
        est.analytic_capacity = analytic_capacity_reference(spec.n_features, spec.epsilon, spec.delta)
    return est


def log10_slope(ns, capacities):
    """Least-squares slope of ``log10(capacity)`` against N."""
    ns = np.asarray(ns, dtype=float)
    caps = np.asarray(capacities, dtype=float)
    if ns.size < 2:
        raise ValueError("need at least two points")
    if np.any(caps <= 0):
        raise ValueError("capacities must be positive")
    return float(np.polyfit(ns, np.log10(caps), 1)[0])


def capacity_scaling(n_grid, base_spec, seed=0, jobs=1):
    """Empirical capacity for every N in ``n_grid``; returns ``(estimates, slope)``."""
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        ests = [empirical_capacity(base_spec.replace(n_features=int(n)), seed, executor=executor)
                for n in n_grid]
    finally:
        if executor is not None:
            executor.shutdown()
    slope = log10_slope([e.spec.n_features for e in ests], [e.capacity for e in ests])
    return ests, slope


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------

def log_beta(x):
    """``log(cosh(x) / exp(x)) = log((1 + exp(-2x)) / 2)``."""
    return math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def gamma_base(alpha, r):
    """Per-neuron growth factor ``exp(alpha r) exp(alpha) / (cosh(alpha r) cosh(alpha))``."""
    return math.exp(-(log_beta(alpha * r) + log_beta(alpha)))


def _logaddexp(a, b):
    return float(np.logaddexp(a, b))


def _capacity_terms(spec):
    if spec.alpha <= 0 or spec.r <= 0:
        raise ValueError("alpha and r must be positive")
    if not 0 < spec.delta < 1:
        raise ValueError("the closed form needs 0 < delta < 1")
    n = spec.n_features - 1
    log_b1n = n * (log_beta(spec.alpha * spec.r) + log_beta(spec.alpha))
    log_u = 0.5 * n * (log_beta(2 * spec.alpha * spec.r) + log_beta(2 * spec.alpha))
    q = math.log((1 - spec.delta) / spec.delta) / (2 * K_LOGISTIC)
    return log_b1n, log_u, q


def log_analytic_capacity_eden(spec, form="root"):
    """Natural log of :func:`analytic_capacity_eden`, safe for large N."""
    log_b1n, log_u, q = _capacity_terms(spec)
    log_eps = math.log(spec.epsilon)
    if form == "root":
        # sqrt(P) solves b1^n P - q u sqrt(P) - eps = 0
        b = math.log(4.0) + log_eps + log_b1n
        if q == 0:
            return 2 * (0.5 * b - math.log(2.0) - log_b1n)
        a = math.log(abs(q)) + log_u
        root = 0.5 * _logaddexp(2 * a, b)
        if q > 0:
            log_sqrt_p = _logaddexp(a, root) - math.log(2.0) - log_b1n
        else:
            log_sqrt_p = math.log(2.0) + log_eps - _logaddexp(root, a)
        return 2 * log_sqrt_p
    if form == "printed":
        # (1/b1)^n (-q/sqrt(c) + sqrt(q^2/c + 4 eps)), 1/sqrt(c) = u / b1^(n/2)
        b = math.log(4.0) + log_eps
        if q == 0:
            return 0.5 * b - log_b1n
        a = math.log(abs(q)) + log_u - 0.5 * log_b1n
        root = 0.5 * _logaddexp(2 * a, b)
        if q > 0:
            inner = b - _logaddexp(root, a)
        else:
            inner = _logaddexp(root, a)
        return inner - log_b1n
    raise ValueError(f"unknown form {form!r}")


def analytic_capacity_eden(spec, form="root"):
    """Closed-form EDEN capacity under the logistic approximation of the Gaussian CDF.

    ``form="root"`` solves the success-rate equation for P exactly (its
    root reproduces ``1 - delta`` on back-substitution). ``form="printed"``
    evaluates the final boxed expression literally, which differs from the
    root by orders of magnitude at desk-scale N.
    """
    lp = log_analytic_capacity_eden(spec, form)
    return math.exp(lp) if lp < 709.0 else math.inf


def eden_success_rate(P, spec):
    """``Pr[v_i xi_i >= 1 - eps]`` at P memories under the logistic approximation."""
    if P <= 0:
        raise ValueError("P must be positive")
    n = spec.n_features - 1
    log_b1n = n * (log_beta(spec.alpha * spec.r) + log_beta(spec.alpha))
    log_u = 0.5 * n * (log_beta(2 * spec.alpha * spec.r) + log_beta(2 * spec.alpha))
    num = P * math.exp(log_b1n) * (spec.epsilon - 1.0) + spec.epsilon
    x = 2 * K_LOGISTIC * num / (math.sqrt(P) * math.exp(log_u))
    # 1 / (1 + e^x) without overflow
    if x > 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def analytic_capacity_reference(n_features, epsilon, delta):
    """Chebyshev-bound capacity ``1 + 2 delta eps^2 (N - 1)`` of the reference network."""
    if n_features < 2:
        raise ValueError("N must be >= 2")
    return 1.0 + 2.0 * delta * epsilon**2 * (n_features - 1)


def gaussian_cdf_logistic(x):
    """Logistic approximation ``e^{2kx} / (1 + e^{2kx})`` to the standard normal CDF, ``k = sqrt(2/pi)``."""
    z = 2.0 * K_LOGISTIC * np.asarray(x, dtype=float)
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def write_capacity_csv(path, estimates):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "P", "error_prob", "stderr", "n_trials", "n_bits"])
        for est in estimates:
            for P, p, se, n in est.curve():
                w.writerow([est.spec.n_features, P, fmt(p), fmt(se), est.spec.trials, n])


def capacity_summary(estimates, slope=None):
    spec0 = estimates[0].spec
    out = {
        "model": spec0.model,
        "gamma": gamma_base(spec0.alpha, spec0.r),
        "log10_gamma": math.log10(gamma_base(spec0.alpha, spec0.r)),
        "fit_slope": slope,
        "runs": [
            {
                "N": e.spec.n_features,
                "capacity": e.capacity,
                "analytic_capacity": e.analytic_capacity,
                "saturated": e.saturated,
                "p_limit": e.spec.p_limit,
            }
            for e in estimates
        ],
    }
    return out


def write_capacity_summary(path, estimates, slope=None):
    write_json(path, capacity_summary(estimates, slope))
