"""Scalar threshold calculus for the convection/exponential Dirichlet problem.

Everything here is a pure function of a few scalars. Power and exponential
expressions are evaluated through logarithms, since at p ~ 100 quantities
like ``M**(p-l) * exp(alpha*M**s)`` leave double range.

The gradient constant ``k_p`` (largest ``max|grad w|`` over solutions of
``-Delta_p w = g`` with ``max|g| = 1``) is not computable; it is carried as an
interval ``[kp_lower, kp_upper]`` and every quantity depending on it is
reported at both endpoints.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from scipy.special import logsumexp

from .errors import ConfigError

KP_ENDPOINTS = ("upper", "lower")


@dataclass(frozen=True)
class ProblemParams:
    """Coefficients and exponents of ``-Delta_p u = lam u^(q-1) + beta u^(a-1)|grad u|^b + m u^(l-1) exp(alpha u^s)``."""

    lam: float = 1.0
    beta: float = 1.0
    m: float = 0.0
    p: float = 10.0
    q: float = 2.0
    a: float = 2.0
    b: float = 1.0
    l: float = 2.0
    alpha: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        for name in ("lam", "beta", "m", "alpha", "s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.a < 1 or self.l < 1:
            raise ConfigError("need a >= 1 and l >= 1")
        if not self.b > 0:
            raise ConfigError("need b > 0")
        if not (self.p > self.q >= 1):
            raise ConfigError(f"need p > q >= 1, got p={self.p}, q={self.q}")

    @property
    def r(self) -> float:
        return self.a + self.b

    def with_(self, **changes) -> "ProblemParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GradientEstimateConstants:
    """``max|grad v|^(p-1) <= c p^gamma max|g|`` for ``p >= 2``."""

    c: float = 1.0
    gamma: float = 2.5

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("gradient-estimate constant c must be positive")
        if not self.gamma >= 2.5:
            raise ConfigError("gamma must be at least 2.5")


def kp_upper_bound(p: float, ge: GradientEstimateConstants) -> float:
    if p < 2:
        raise ValueError("the gradient estimate needs p >= 2")
    return math.exp((math.log(ge.c) + ge.gamma * math.log(p)) / (p - 1))


def kp_lower_bound(torsion_sup: float, torsion_grad_sup: float, d_sup: float) -> float:
    return max(torsion_sup / d_sup, torsion_grad_sup)


def kp_bounds(torsion_sup: float, torsion_grad_sup: float, d_sup: float, p: float,
              ge: GradientEstimateConstants) -> tuple:
    lo = kp_lower_bound(torsion_sup, torsion_grad_sup, d_sup)
    hi = kp_upper_bound(p, ge)
    if lo > hi:
        raise ConfigError(
            f"k_p interval is empty at p={p}: lower {lo:.6g} > upper {hi:.6g}; recalibrate c")
    return lo, hi


def calibrate_c(p_values, kp_lower_values, gamma: float = 2.5, margin: float = 1e-9) -> float:
    """Smallest c with ``(c p^gamma)^(1/(p-1)) >= kp_lower`` on the whole grid."""
    logs = [(p - 1) * math.log(k) - gamma * math.log(p) for p, k in zip(p_values, kp_lower_values)]
    return math.exp(max(logs)) * (1.0 + margin)


@dataclass(frozen=True)
class DomainConstants:
    p: float
    b: float
    torsion_sup: float
    torsion_grad_sup: float
    lambda_p: float
    d_sup: float
    kp_lower: float
    kp_upper: float

    @classmethod
    def build(cls, p, b, torsion_sup, torsion_grad_sup, lambda_p, d_sup, ge) -> "DomainConstants":
        lo, hi = kp_bounds(torsion_sup, torsion_grad_sup, d_sup, p, ge)
        return cls(p, b, torsion_sup, torsion_grad_sup, lambda_p, d_sup, lo, hi)

    def kp(self, endpoint: str = "upper") -> float:
        if endpoint not in KP_ENDPOINTS:
            raise ConfigError(f"kp endpoint must be one of {KP_ENDPOINTS}")
        return self.kp_upper if endpoint == "upper" else self.kp_lower

    @property
    def log_A(self) -> float:
        return (self.p - 1) * math.log(self.torsion_sup)

    def log_B(self, endpoint: str = "upper") -> float:
        return self.b * math.log(self.kp(endpoint)) + (self.p - 1 - self.b) * math.log(self.torsion_sup)

    @property
    def A_p(self) -> float:
        return math.exp(self.log_A)

    def B_p(self, endpoint: str = "upper") -> float:
        return math.exp(self.log_B(endpoint))

    @property
    def B_p_lower(self) -> float:
        return self.B_p("lower")

    @property
    def B_p_upper(self) -> float:
        return self.B_p("upper")

    def as_dict(self) -> dict:
        out = asdict(self)
        out.update(A_p=self.A_p, B_p_lower=self.B_p_lower, B_p_upper=self.B_p_upper)
        return out


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _lse(terms) -> float:
    terms = [t for t in terms if t > -math.inf]
    return float(logsumexp(terms)) if terms else -math.inf


def region_E_log_terms(params: ProblemParams, dc: DomainConstants, M: float, use_upper_kp: bool = True) -> list:
    """Logs of the three terms whose sum defines membership in E(M)."""
    if not M > 0:
        raise ValueError("M must be positive")
    p = params.p
    lm = math.log(M)
    end = "upper" if use_upper_kp else "lower"
    return [
        _log(params.lam) + dc.log_A - (p - params.q) * lm,
        _log(params.beta) + dc.log_B(end) - (p - params.r) * lm,
        _log(params.m) + dc.log_A - (p - params.l) * lm + params.alpha * M ** params.s,
    ]


def region_E_sum(params, dc, M, use_upper_kp=True) -> float:
    return math.exp(_lse(region_E_log_terms(params, dc, M, use_upper_kp)))


def in_region_E(params: ProblemParams, dc: DomainConstants, M: float, use_upper_kp: bool = True) -> bool:
    return _lse(region_E_log_terms(params, dc, M, use_upper_kp)) <= 0.0


def bisect_root(f, lo: float = 1e-8, hi: float = 1.0, cap: float = 1e8, increasing: bool = True,
                rtol: float = 1e-12) -> float:
    """Root of a monotone function on ``(0, inf)``.

    The bracket starts at ``[lo, hi]`` and ``hi`` doubles until the sign
    changes (up to ``cap``). Bisection runs to machine precision; ``rtol`` is
    the accuracy the caller is guaranteed.
    """
    sgn = 1.0 if increasing else -1.0

    def g(t):
        return sgn * f(t)

    if g(lo) > 0:
        raise ValueError(f"no sign change: root lies below {lo}")
    while g(hi) < 0:
        hi *= 2.0
        if hi > cap:
            raise ValueError(f"no sign change below {cap}")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    if hi - lo > rtol * hi:
        raise ArithmeticError("bisection failed to reach its tolerance")
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


_LOG_HALF = math.log(0.5)


def _phi_up_log(params, dc, t, end):
    p = params.p
    lt = math.log(t)
    return _lse([_log(params.lam) + dc.log_A - (p - params.q) * lt,
                 _log(params.beta) + dc.log_B(end) - (p - params.r) * lt])


def compute_Mp_corollary_up(params: ProblemParams, dc: DomainConstants, use_upper_kp: bool = True) -> float:
    """Unique ``M`` with ``lam A/M^(p-q) + beta B/M^(p-(a+b)) = 1/2``."""
    p = params.p
    # the convection exponent only matters when the convection term is present
    if not p > max(params.q, params.r if params.beta > 0 else params.q):
        raise ConfigError(f"need p > max(q, a+b); got p={p}, q={params.q}, a+b={params.r}")
    if params.lam == 0 and params.beta == 0:
        raise ConfigError("need lam > 0 or beta > 0")
    end = "upper" if use_upper_kp else "lower"
    return bisect_root(lambda t: _phi_up_log(params, dc, t, end) - _LOG_HALF, increasing=False)


def phi_corollary_up(params, dc, t, use_upper_kp=True) -> float:
    return math.exp(_phi_up_log(params, dc, t, "upper" if use_upper_kp else "lower"))


def compute_mp(params: ProblemParams, M_p: float, A_p: float) -> float:
    """``m_p = M_p^(p-l) / (2 A_p exp(alpha M_p^s))``."""
    if not A_p > 0:
        raise ValueError("A_p must be positive")
    return math.exp(_log_mp(params, M_p, math.log(A_p)))


def _log_mp(params, M_p, log_A):
    return (params.p - params.l) * math.log(M_p) - math.log(2.0) - log_A - params.alpha * M_p ** params.s


def compute_mp_from_constants(params: ProblemParams, M_p: float, dc: DomainConstants) -> float:
    return math.exp(_log_mp(params, M_p, dc.log_A))


def compute_Mp_cor1(params: ProblemParams, dc: DomainConstants) -> float:
    """Unique ``M`` with ``m A M^(l-p) exp(alpha M^s) = 1/2`` (case l > p >= a+b)."""
    p = params.p
    if not (params.l > p >= params.r):
        raise ConfigError(f"need l > p >= a+b; got l={params.l}, p={p}, a+b={params.r}")
    if not params.m > 0:
        raise ConfigError("need m > 0")

    def f(t):
        return math.log(params.m) + dc.log_A + (params.l - p) * math.log(t) + params.alpha * t ** params.s - _LOG_HALF

    return bisect_root(f, increasing=True)


def region_D_cor1(params: ProblemParams, dc: DomainConstants, M_p: float, use_upper_kp: bool = True) -> bool:
    """``(lam, beta)`` lies below the line ``lam A/M^(p-q) + beta B/M^(p-(a+b)) = 1/2``."""
    return _phi_up_log(params, dc, M_p, "upper" if use_upper_kp else "lower") <= _LOG_HALF


def compute_Mp_cor2(params: ProblemParams, dc: DomainConstants, use_upper_kp: bool = True) -> float:
    """Unique ``M`` with ``beta B M^(a+b-p) + m A M^(l-p) exp(alpha M^s) = 1/2`` (case q < p < min(a+b, l))."""
    p = params.p
    if not (1 <= params.q < p < min(params.r, params.l)):
        raise ConfigError(f"need 1 <= q < p < min(a+b, l); got q={params.q}, p={p}, a+b={params.r}, l={params.l}")
    if not (params.beta > 0 and params.m > 0):
        raise ConfigError("need beta > 0 and m > 0")
    end = "upper" if use_upper_kp else "lower"

    def f(t):
        lt = math.log(t)
        return _lse([math.log(params.beta) + dc.log_B(end) + (params.r - p) * lt,
                     math.log(params.m) + dc.log_A + (params.l - p) * lt + params.alpha * t ** params.s]) - _LOG_HALF

    return bisect_root(f, increasing=True)


def lambda_star(M_p: float, A_p: float, p: float, q: float) -> float:
    return math.exp((p - q) * math.log(M_p) - math.log(2.0 * A_p))


def compute_Mp_cor3(beta: float, B_p: float, a: float, b: float, p: float) -> float:
    """Closed form ``(1/(2 beta B_p))^(1/(a+b-p))`` for the case l = p < a+b."""
    if not a + b > p:
        raise ConfigError("need p < a+b")
    if not (beta > 0 and B_p > 0):
        raise ConfigError("need beta > 0 and B_p > 0")
    return math.exp(-math.log(2.0 * beta * B_p) / (a + b - p))


def region_D_cor3(lam: float, m: float, M_p: float, A_p: float, alpha: float, s: float,
                  p: float, q: float) -> bool:
    if not 1 <= q < p:
        raise ConfigError("need 1 <= q < p")
    terms = [_log(lam) + math.log(A_p) - (p - q) * math.log(M_p),
             _log(m) + math.log(A_p) + alpha * M_p ** s]
    return _lse(terms) <= _LOG_HALF


def compute_m_inf(d_sup: float, lam: float, beta: float, q: float, a: float, l: float,
                  alpha: float, s: float) -> float:
    """Limit threshold ``(lam d^(q-1) + beta d^(a-1)) d^(l-1) exp(-alpha d^s)``, d = max distance."""
    return (lam * d_sup ** (q - 1) + beta * d_sup ** (a - 1)) * d_sup ** (l - 1) * math.exp(-alpha * d_sup ** s)


def _check_nonexistence_args(p, l, alpha, s):
    if not 1 <= l < p:
        raise ConfigError(f"need 1 <= l < p; got l={l}, p={p}")
    if not (alpha > 0 and s > 0):
        raise ConfigError("need alpha > 0 and s > 0")


def nonexistence_scale(p: float, l: float, alpha: float, s: float) -> float:
    """Minimizer ``((p-l)/(alpha s))^(1/s)`` of ``exp(alpha t^s)/t^(p-l)``."""
    _check_nonexistence_args(p, l, alpha, s)
    return ((p - l) / (alpha * s)) ** (1.0 / s)


def nonexistence_bound(lambda_p: float, p: float, l: float, alpha: float, s: float) -> float:
    """A positive solution can only exist for ``m`` strictly below this value."""
    _check_nonexistence_args(p, l, alpha, s)
    return lambda_p * math.exp((p - l) / s * math.log((p - l) / (alpha * s * math.e)))


def exponential_only_bound(lambda_p: float, p: float) -> float:
    """Older bound for ``-Delta_p u = m e^u``: ``lambda_p max(1, ((p-1)/e)^(p-1))``."""
    return lambda_p * max(1.0, ((p - 1) / math.e) ** (p - 1))


def limit_predictions(lam: float, beta: float, q: float, a: float, d_sup: float) -> tuple:
    """Large-p limits ``(lim M_p, lim (max phi_p / M_p)^p)``."""
    denom = lam * d_sup ** (q - 1) + beta * d_sup ** (a - 1)
    if denom == 0:
        raise ConfigError("need lam d^(q-1) + beta d^(a-1) > 0")
    return d_sup, 1.0 / (2.0 * denom)


def Mp_interval(params: ProblemParams, dc: DomainConstants) -> tuple:
    """``M_p`` at both k_p endpoints; the upper endpoint gives the larger value."""
    lo = compute_Mp_corollary_up(params, dc, use_upper_kp=False)
    hi = compute_Mp_corollary_up(params, dc, use_upper_kp=True)
    return lo, hi


def threshold_report(params: ProblemParams, dc: DomainConstants) -> dict:
    """Everything the threshold calculus says about one (params, p) pair."""
    out = {"params": params.as_dict(), "constants": dc.as_dict()}
    M_lo, M_hi = Mp_interval(params, dc)
    m_lo = compute_mp_from_constants(params, M_lo, dc)
    m_hi = compute_mp_from_constants(params, M_hi, dc)
    out["M_p"] = {"kp_lower": M_lo, "kp_upper": M_hi}
    out["m_p"] = {"kp_lower": m_lo, "kp_upper": m_hi}
    out["m_inf"] = compute_m_inf(dc.d_sup, params.lam, params.beta, params.q, params.a,
                                 params.l, params.alpha, params.s)
    if params.l < params.p and params.alpha > 0 and params.s > 0:
        out["nonexistence_bound"] = nonexistence_bound(dc.lambda_p, params.p, params.l, params.alpha, params.s)
        out["nonexistence_scale"] = nonexistence_scale(params.p, params.l, params.alpha, params.s)
    else:
        out["nonexistence_bound"] = None
    M_lim, ratio_lim = limit_predictions(params.lam, params.beta, params.q, params.a, dc.d_sup)
    out["limits"] = {"M_inf": M_lim, "ratio_inf": ratio_lim}
    out["region"] = region_verdicts(params, dc)
    return out


def region_verdicts(params: ProblemParams, dc: DomainConstants, M: float | None = None) -> dict:
    """Membership of params in the corollary regions that apply to its exponents.

    Regions whose hypotheses fail are reported as ``None``.
    """
    p, q, r, l = params.p, params.q, params.r, params.l
    out = {}
    for end in KP_ENDPOINTS:
        up = end == "upper"
        v = {}
        if M is not None:
            v["E(M)"] = in_region_E(params, dc, M, up)
        if p > max(q, r, l) and (params.lam > 0 or params.beta > 0):
            Mp = compute_Mp_corollary_up(params, dc, up)
            mp = compute_mp_from_constants(params, Mp, dc)
            v["corollary_up"] = {"M_p": Mp, "m_p": mp, "m_le_m_p": params.m <= mp,
                                 "in_E(M_p)": in_region_E(params, dc, Mp, up)}
        else:
            v["corollary_up"] = None
        if l > p >= r and params.m > 0:
            Mp = compute_Mp_cor1(params, dc)
            v["cor1"] = {"M_p": Mp, "in_D": region_D_cor1(params, dc, Mp, up)}
        else:
            v["cor1"] = None
        if 1 <= q < p < min(r, l) and params.beta > 0 and params.m > 0:
            Mp = compute_Mp_cor2(params, dc, up)
            ls = lambda_star(Mp, dc.A_p, p, q)
            v["cor2"] = {"M_p": Mp, "lambda_star": ls, "lam_le_lambda_star": 0 < params.lam <= ls}
        else:
            v["cor2"] = None
        if 1 <= q < l == p < r and params.beta > 0:
            Mp = compute_Mp_cor3(params.beta, dc.B_p(end), params.a, params.b, p)
            v["cor3"] = {"M_p": Mp, "in_D": region_D_cor3(params.lam, params.m, Mp, dc.A_p,
                                                          params.alpha, params.s, p, q)}
        else:
            v["cor3"] = None
        out[f"kp_{end}"] = v
    return out
