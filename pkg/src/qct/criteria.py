"""Strong (trajectory-level) and weak (density-level) transition criteria.

All asymptotic comparisons are quantified by a margin factor: an oriented
ratio rhs/lhs (for "<<") or lhs/rhs (for ">>") counts as satisfied when it
reaches the configured factor (default 10). Reports always carry the raw
numbers so any other convention can be recovered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DivisionDomainError, DomainError, InfeasibleError, NonConvergenceError
from .model import HamiltonianSpec, force, force_dx, force_dxx
from .qdyn import MeasurementSpec
from .cdyn import ClassicalEnsemble, orbit

DEFAULT_MARGIN_FACTOR = 10.0


# ---------------------------------------------------------------------------
# phase-space averages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpaceAverages:
    """Time averages of |F|, |dF/dx|, |d2F/dx2| and |p| along noiseless
    orbits (ergodic weighting)."""

    abs_force: float
    abs_force_dx: float
    abs_force_dxx: float
    abs_momentum: float
    t_span: float = 0.0
    n_orbits: int = 1


def pointwise_averages(spec: HamiltonianSpec, x: float, p: float,
                       t: float = 0.0) -> PhaseSpaceAverages:
    """Single-point diagnostic variant of the averaged quantities."""
    return PhaseSpaceAverages(
        abs_force=float(abs(force(spec, x, t))),
        abs_force_dx=float(abs(force_dx(spec, x))),
        abs_force_dxx=float(abs(force_dxx(spec, x))),
        abs_momentum=float(abs(p)),
    )


def phase_space_averages(spec: HamiltonianSpec, ics, t_span: float,
                         dt: float = 1e-3, sample_every: int = 5,
                         rel_tol: float = 0.10) -> PhaseSpaceAverages:
    """Ergodic averages along noiseless orbits started from ``ics``
    (an (x0, p0) pair or a ClassicalEnsemble of starting points).

    Requires t_span of at least 20 drive periods; raises
    NonConvergenceError when the two half-span averages differ by more
    than ``rel_tol`` on any component.
    """
    min_span = 20.0 * 2.0 * np.pi / spec.drive_freq
    if t_span < min_span:
        raise ValueError(
            f"t_span {t_span} shorter than 20 drive periods ({min_span:.2f})"
        )
    if isinstance(ics, ClassicalEnsemble):
        starts = list(zip(ics.x, ics.p))
    else:
        starts = [tuple(ics)]

    halves = np.zeros((2, 4))
    counts = np.zeros(2)
    for x0, p0 in starts:
        ts, xs, ps = orbit(spec, x0, p0, t_span, dt, sample_every)
        vals = np.stack([
            np.abs(force(spec, xs, ts)),
            np.abs(force_dx(spec, xs)),
            np.abs(force_dxx(spec, xs)),
            np.abs(ps),
        ])
        mid = ts.size // 2
        halves[0] += vals[:, :mid].sum(axis=1)
        halves[1] += vals[:, mid:].sum(axis=1)
        counts[0] += mid
        counts[1] += ts.size - mid
    first = halves[0] / counts[0]
    second = halves[1] / counts[1]
    total = (halves[0] + halves[1]) / counts.sum()
    rel = np.abs(first - second) / np.maximum(np.abs(total), 1e-300)
    if np.any(rel > rel_tol):
        raise NonConvergenceError(
            f"half-span averages differ by up to {rel.max():.1%} (> {rel_tol:.0%}); "
            "increase t_span"
        )
    return PhaseSpaceAverages(
        abs_force=float(total[0]), abs_force_dx=float(total[1]),
        abs_force_dxx=float(total[2]), abs_momentum=float(total[3]),
        t_span=t_span, n_orbits=len(starts),
    )


# ---------------------------------------------------------------------------
# action scales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionScales:
    S: float
    S_prime: float
    s_bar: float
    s_tilde: float
    s_dbar: float
    s_nominal: float
    A: float

    def spread(self) -> tuple[float, float]:
        vals = [v for v in (self.s_bar, self.s_tilde, self.s_dbar) if np.isfinite(v)]
        return (min(vals), max(vals))


def accessible_area(x_bound: float, p_bound: float) -> float:
    """Rectangle area from symmetric phase-space bounds."""
    return 4.0 * x_bound * p_bound


def hull_area(xs: np.ndarray, ps: np.ndarray) -> float:
    """Convex-hull estimate of the accessible area from orbit points
    (alternative to the rectangle; not the default)."""
    from scipy.spatial import ConvexHull

    pts = np.column_stack([xs, ps])
    return float(ConvexHull(pts).volume)


def action_scales(m: float, hbar: float, averages: PhaseSpaceAverages, A: float,
                  lambda_bar: float) -> ActionScales:
    """Action scales: S = |p|^3/(8 m |F|), S' = m |F|^3 / (|p| (dF/dx)^2),
    s_bar = min(S, S')/hbar, s_tilde = A/hbar,
    s_dbar = m lambda |F| / (hbar |d2F/dx2|); the nominal s is s_tilde."""
    if hbar <= 0 or m <= 0:
        raise ValueError("m and hbar must be positive")
    F = averages.abs_force
    dF = averages.abs_force_dx
    d2F = averages.abs_force_dxx
    p = averages.abs_momentum
    if F == 0.0:
        raise DivisionDomainError("average |F| vanishes; S undefined")
    if p == 0.0 or dF == 0.0:
        raise DivisionDomainError("average |p| or |dF/dx| vanishes; S' undefined")
    S = p**3 / (8.0 * m * F)
    S_prime = m * F**3 / (p * dF**2)
    s_bar = min(S, S_prime) / hbar
    s_tilde = A / hbar
    s_dbar = m * lambda_bar * F / (hbar * d2F) if d2F > 0 else math.inf
    return ActionScales(S=S, S_prime=S_prime, s_bar=s_bar, s_tilde=s_tilde,
                        s_dbar=s_dbar, s_nominal=s_tilde, A=A)


# ---------------------------------------------------------------------------
# inequality report plumbing
# ---------------------------------------------------------------------------

@dataclass
class InequalityEntry:
    """One evaluated comparison. ``ratio`` is oriented so that larger is
    better; ``satisfied`` means ratio >= margin_factor."""

    name: str
    paper_eq: str
    lhs: float
    rhs: float
    relation: str
    ratio: float
    satisfied: bool
    margin_factor: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_eq": self.paper_eq,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "ratio": self.ratio,
            "satisfied": self.satisfied,
            "margin_factor": self.margin_factor,
        }


def _entry(name, eq, lhs, rhs, relation, margin_factor):
    """Build an entry; relation orients the ratio (lhs << rhs or
    lhs >> rhs; ">=" uses factor 1)."""
    lhs = float(lhs)
    rhs = float(rhs)
    if relation in ("<<", "<="):
        ratio = math.inf if lhs == 0 else rhs / lhs
    elif relation in (">>", ">="):
        ratio = math.inf if rhs == 0 else lhs / rhs
    else:
        raise ValueError(f"unknown relation {relation}")
    factor = 1.0 if relation in ("<=", ">=") else margin_factor
    satisfied = bool(ratio >= factor)
    return InequalityEntry(name=name, paper_eq=eq, lhs=lhs, rhs=rhs,
                           relation=relation, ratio=float(ratio),
                           satisfied=satisfied, margin_factor=factor)


# ---------------------------------------------------------------------------
# strong criteria
# ---------------------------------------------------------------------------

def strong_localization(averages: PhaseSpaceAverages, k: float, hbar: float,
                        m: float,
                        margin_factor: float = DEFAULT_MARGIN_FACTOR):
    """Localization test: a branch test on the nonlinearity strength
    selects which measurement-strength bound applies.

    Weak nonlinearity branch: |d2F| << 4 |F| sqrt(m |dF|)/hbar, then
    k >> |d2F/(8F)| sqrt(|dF|/(2m)); otherwise
    k >> (d2F/(8F))^2 (2 hbar/m).

    Returns (entries, branch) with branch in {"weak-nonlinearity",
    "strong-nonlinearity"}; exactly one k-bound entry is flagged binding.
    """
    F = averages.abs_force
    dF = averages.abs_force_dx
    d2F = averages.abs_force_dxx
    if F == 0.0:
        raise DivisionDomainError("average |F| vanishes in the localization bounds")
    branch_rhs = 4.0 * F * np.sqrt(m * dF) / hbar
    branch_entry = _entry("nonlinearity-branch", "loc-branch", d2F, branch_rhs,
                          "<<", margin_factor)
    rhs_weak = abs(d2F / (8.0 * F)) * np.sqrt(dF / (2.0 * m))
    rhs_strong = (d2F / (8.0 * F)) ** 2 * (2.0 * hbar / m)
    weak_entry = _entry("localization-weak-nonlinearity", "loc-A", k, rhs_weak,
                        ">>", margin_factor)
    strong_entry = _entry("localization-strong-nonlinearity", "loc-B", k,
                          rhs_strong, ">>", margin_factor)
    branch = "weak-nonlinearity" if branch_entry.satisfied else "strong-nonlinearity"
    return [branch_entry, weak_entry, strong_entry], branch


def strong_low_noise(averages: PhaseSpaceAverages, s_bar: float, k: float,
                     hbar: float, m: float | None = None,
                     lambda_bar: float | None = None,
                     margin_factor: float = DEFAULT_MARGIN_FACTOR):
    """Low-noise window 2|dF|/s_bar << hbar k << |dF| s_bar / 4, plus the
    equivalent stretching-rate form (2 m lambda^2/hbar)(1/s_bar) << k <<
    (2 m lambda^2/hbar)(s_bar/8) when m and lambda_bar are given.

    The window is infeasible when s_bar < sqrt(8) (lower bound exceeds
    the upper); the entries still carry the raw numbers.
    """
    dF = averages.abs_force_dx
    entries = [
        _entry("low-noise-lower", "ln-lower", 2.0 * dF / s_bar, hbar * k, "<<",
               margin_factor),
        _entry("low-noise-upper", "ln-upper", hbar * k, dF * s_bar / 4.0, "<<",
               margin_factor),
    ]
    if m is not None and lambda_bar is not None:
        rate = 2.0 * m * lambda_bar**2 / hbar
        entries.append(_entry("low-noise-lower-rate-form", "ln-lower-rate",
                              rate / s_bar, k, "<<", margin_factor))
        entries.append(_entry("low-noise-upper-rate-form", "ln-upper-rate",
                              k, rate * s_bar / 8.0, "<<", margin_factor))
    return entries


def low_noise_window_feasible(s_bar: float) -> bool:
    """The window is non-empty only for s_bar > sqrt(8)."""
    return s_bar > math.sqrt(8.0)


# ---------------------------------------------------------------------------
# weak criteria
# ---------------------------------------------------------------------------

def k_crit(m: float, lambda_bar: float, hbar: float, s_tilde: float,
           xi: float = 1.0) -> float:
    """Threshold 2 m lambda^2 / (hbar ln(xi s_tilde)) between the weak
    regime that runs while classical structures form and the one reached
    after structure growth saturates. The default takes the
    initial-structure parameter at its minimum (most stringent); any
    xi in [1, s_tilde] changes the value by at most a factor of two."""
    if s_tilde <= 1.0:
        raise DomainError(f"s_tilde must exceed 1, got {s_tilde}")
    if xi < 1.0:
        raise DomainError(f"xi must be >= 1, got {xi}")
    return 2.0 * m * lambda_bar**2 / (hbar * math.log(xi * s_tilde))


def weak_window(m: float, lambda_bar: float, hbar: float, s_tilde: float,
                k: float, margin_factor: float = DEFAULT_MARGIN_FACTOR):
    """Window k_crit <~ k << (2 m lambda^2/hbar)(s_tilde/ln s_tilde); the
    lower comparison is a soft threshold (factor 1), the upper a strict
    separation (margin factor); the upper bound keeps the smearing area
    small against the accessible phase space."""
    kc = k_crit(m, lambda_bar, hbar, s_tilde)
    upper = 2.0 * m * lambda_bar**2 / hbar * s_tilde / math.log(s_tilde)
    return [
        _entry("weak-lower", "weak-kcrit", k, kc, ">=", margin_factor),
        _entry("weak-upper", "weak-smearing", k, upper, "<<", margin_factor),
    ]


def solve_l(D: float, m: float, lambda_bar: float, xi: float, A: float,
            rel_tol: float = 1e-10, max_iter: int = 200) -> float:
    """Invert D(l) = 2 m lambda^2 l^2 / ln(xi A / l^2) for the steady-state
    smearing length by bisection on l^2 over (0, xi A / e).

    The domain keeps the logarithm above 1, where D(l) is strictly
    increasing; larger D values are outside the relation's validity and
    raise InfeasibleError.
    """
    if D <= 0:
        raise DomainError("D must be positive")
    if xi <= 0 or A <= 0 or lambda_bar <= 0 or m <= 0:
        raise DomainError("m, lambda_bar, xi and A must be positive")

    def D_of(u):  # u = l^2
        return 2.0 * m * lambda_bar**2 * u / math.log(xi * A / u)

    hi = xi * A / math.e
    if D >= D_of(hi):
        raise InfeasibleError(
            f"D={D} exceeds the relation's domain (max {D_of(hi):.4g}); the "
            "smearing area would not be small against the accessible area"
        )
    lo = hi * 1e-30
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if D_of(mid) < D:
            lo = mid
        else:
            hi = mid
        if abs(D_of(mid) - D) <= rel_tol * D:
            return math.sqrt(mid)
    mid = 0.5 * (lo + hi)
    if abs(D_of(mid) - D) > rel_tol * D:
        raise NonConvergenceError("bisection for the smearing length stalled")
    return math.sqrt(mid)


@dataclass
class WeakScales:
    """Time scales and lengths of the density-level transition.

    l_qu(t) * l_cl(t) = hbar identically; t_star is where diffusion
    smearing catches up with the shrinking structure scale, t_qc where
    interference fringes are washed out.
    """

    l: float
    t_star: float
    t_qc: float
    k_crit: float
    xi: float
    l_cl: Callable[[float], float] = field(repr=False, default=None)
    l_qu: Callable[[float], float] = field(repr=False, default=None)
    delta: Callable[[float], float] = field(repr=False, default=None)


def weak_times(D: float, m: float, lambda_bar: float, hbar: float, xi: float,
               A: float) -> WeakScales:
    """Length/time scales: l_cl(t) = sqrt(D t/(m lambda)),
    delta(t) = sqrt(xi A) exp(-lambda t), l_qu(t) = hbar / l_cl(t),
    t_qc = m hbar lambda / D, and t_star solving l_cl = delta."""
    if min(D, m, lambda_bar, hbar, xi, A) <= 0:
        raise DomainError("all weak-scale inputs must be positive")

    def l_cl(t):
        return np.sqrt(D * np.asarray(t) / (m * lambda_bar))

    def delta(t):
        return np.sqrt(xi * A) * np.exp(-lambda_bar * np.asarray(t))

    def l_qu(t):
        return hbar / l_cl(t)

    t_qc = m * hbar * lambda_bar / D

    def gap(t):
        return l_cl(t) - delta(t)

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NonConvergenceError("no crossing for the structure-saturation time")
    t_star = float(brentq(gap, 1e-300, hi, xtol=1e-14, rtol=1e-12))
    li = solve_l(D, m, lambda_bar, xi, A)
    s_tilde = A / hbar
    kc = k_crit(m, lambda_bar, hbar, s_tilde) if s_tilde > 1 else math.nan
    return WeakScales(l=li, t_star=t_star, t_qc=t_qc, k_crit=kc, xi=xi,
                      l_cl=l_cl, l_qu=l_qu, delta=delta)


# ---------------------------------------------------------------------------
# weak-implies-strong comparisons
# ---------------------------------------------------------------------------

E8 = math.e**8
FIVE7 = 5.0**7


def weak_implies_strong(scales: ActionScales,
                        margin_factor: float = DEFAULT_MARGIN_FACTOR):
    """Conditions under which the fast weak regime forces the trajectory
    transition, expressed through the nominal action s alone.

    Headline thresholds: s >> e^8 (direct route) and s >> 5^7 (combined
    variance-bound route). The per-bound variance-route coefficients are
    reported as diagnostics (their rate prefactors are absorbed the same
    way the combined reduction absorbs them), along with the two
    localization-redundancy checks s >> ln(s)/(16 sqrt 2) and
    s >> sqrt(ln s)/8.
    """
    s = scales.s_nominal
    if s <= 1.0:
        raise DomainError(f"nominal action must exceed 1, got {s}")
    ln_s = math.log(s)
    entries = [
        _entry("weak-implies-strong-direct", "wis-e8", s, E8, ">>", margin_factor),
        _entry("weak-implies-strong-combined", "wis-5^7", s, FIVE7, ">>",
               margin_factor),
        _entry("localization-redundancy-weak-branch", "wis-red-A", s,
               ln_s / (16.0 * math.sqrt(2.0)), ">>", margin_factor),
        _entry("localization-redundancy-strong-branch", "wis-red-B", s,
               math.sqrt(ln_s) / 8.0, ">>", margin_factor),
    ]
    # variance-bound route, coefficient form: each bound must dominate the
    # weak lower threshold 1/ln(s)
    lower = 1.0 / ln_s
    coef_loc = 2.0 * s / math.log(s / 2.0) if s > 2.0 else math.nan
    coef_S = 2.0 ** (2.0 / 3.0) * s ** (1.0 / 3.0) / math.log(2.0 * s**4 / ln_s)
    coef_Sp = 8.0 ** (-1.0 / 7.0) * s ** (1.0 / 7.0) / math.log(
        32.0 * s**5 * ln_s ** (-1.5)
    )
    entries.append(_entry("variance-route-localization", "wis-k1", lower,
                          coef_loc, "<<", margin_factor))
    entries.append(_entry("variance-route-action-S", "wis-k2", lower, coef_S,
                          "<<", margin_factor))
    entries.append(_entry("variance-route-action-Sprime", "wis-k3", lower,
                          coef_Sp, "<<", margin_factor))
    return entries


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

REGIME_LABELS = (
    "strong+weak",
    "weak-while-structures-form",
    "weak-after-steady-state",
    "noise-dominated",
    "no-transition",
    "outside-theory-domain",
)


@dataclass
class RegimeReport:
    entries: list
    branch_taken: str
    verdicts: dict
    label: str
    margin_factor: float
    inputs: dict = field(default_factory=dict)

    def entry(self, name: str) -> InequalityEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_json(self, indent: int = 2) -> str:
        payload = {
            "label": self.label,
            "branch_taken": self.branch_taken,
            "margin_factor": self.margin_factor,
            "verdicts": self.verdicts,
            "inputs": self.inputs,
            "inequalities": [e.to_dict() for e in self.entries],
        }
        return json.dumps(payload, indent=indent, sort_keys=True, allow_nan=True)

    def table(self) -> str:
        rows = [("inequality", "relation", "lhs", "rhs", "ratio", "ok")]
        for e in self.entries:
            rows.append((e.name, e.relation, f"{e.lhs:.6g}", f"{e.rhs:.6g}",
                         f"{e.ratio:.6g}", "yes" if e.satisfied else "NO"))
        widths = [max(len(r[i]) for r in rows) for i in range(6)]
        lines = []
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines)


def classify(spec: HamiltonianSpec, meas: MeasurementSpec,
             averages: PhaseSpaceAverages, scales: ActionScales,
             lambda_bar: float,
             margin_factor: float = DEFAULT_MARGIN_FACTOR) -> RegimeReport:
    """Evaluate every inequality and attach a deterministic regime label.

    The label depends only on the recorded margins: localization uses the
    branch selected by the nonlinearity test; the weak lower threshold is
    a soft comparison (factor 1), every << / >> uses the margin factor.
    """
    m, hbar, k = spec.m, meas.hbar, meas.k
    entries = []

    loc_entries, branch = strong_localization(averages, k, hbar, m, margin_factor)
    entries.extend(loc_entries)
    ln_entries = strong_low_noise(averages, scales.s_bar, k, hbar, m=m,
                                  lambda_bar=lambda_bar,
                                  margin_factor=margin_factor)
    entries.extend(ln_entries)

    outside = scales.s_tilde <= 1.0
    if not outside:
        wk_entries = weak_window(m, lambda_bar, hbar, scales.s_tilde, k,
                                 margin_factor)
        entries.extend(wk_entries)
        wis_entries = weak_implies_strong(scales, margin_factor)
        entries.extend(wis_entries)

    by_name = {e.name: e for e in entries}
    binding = (
        by_name["localization-weak-nonlinearity"]
        if branch == "weak-nonlinearity"
        else by_name["localization-strong-nonlinearity"]
    )
    strong_localized = binding.satisfied
    strong_low = (
        by_name["low-noise-lower"].satisfied and by_name["low-noise-upper"].satisfied
    )
    verdicts = {
        "strong_localized": strong_localized,
        "strong_low_noise": strong_low,
        "low_noise_window_feasible": low_noise_window_feasible(scales.s_bar),
    }

    if outside:
        label = "outside-theory-domain"
        verdicts.update(weak_window_lower=False, weak_window=False,
                        weak_implies_strong_III=False, weak_implies_strong_IV=False)
    else:
        weak_lower = by_name["weak-lower"].satisfied
        weak_upper = by_name["weak-upper"].satisfied
        verdicts.update(
            weak_window_lower=weak_lower,
            weak_window=weak_lower and weak_upper,
            weak_implies_strong_III=by_name["weak-implies-strong-direct"].satisfied,
            weak_implies_strong_IV=by_name["weak-implies-strong-combined"].satisfied,
        )
        if k == 0.0:
            label = "no-transition"
        elif by_name["weak-upper"].ratio < 1.0:
            label = "noise-dominated"
        elif strong_localized and strong_low and weak_lower:
            label = "strong+weak"
        elif weak_lower:
            label = "weak-while-structures-form"
        else:
            label = "weak-after-steady-state"

    inputs = {
        "k": k,
        "hbar": hbar,
        "m": m,
        "lambda_bar": lambda_bar,
        "averages": {
            "abs_force": averages.abs_force,
            "abs_force_dx": averages.abs_force_dx,
            "abs_force_dxx": averages.abs_force_dxx,
            "abs_momentum": averages.abs_momentum,
        },
        "scales": {
            "S": scales.S,
            "S_prime": scales.S_prime,
            "s_bar": scales.s_bar,
            "s_tilde": scales.s_tilde,
            "s_dbar": scales.s_dbar,
            "s_nominal": scales.s_nominal,
            "A": scales.A,
        },
    }
    return RegimeReport(entries=entries, branch_taken=branch, verdicts=verdicts,
                        label=label, margin_factor=margin_factor, inputs=inputs)
