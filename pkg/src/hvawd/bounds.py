"""Regret accounting and exact evaluators for the closed-form regret bounds.

Conventions used throughout: losses are half squared errors, hints enter
through the residuals delta_t = y_t - hint_t, ``path`` is the cumulative
RKHS-norm variation of the comparator sequence, ``hint_sq_sum`` is
sum_t delta_t^2 and ``a`` is the feature bound of the kernel family.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .features import KernelSpec, RkhsFunction, rkhs_norm
from .hierarchy import build_discount_grid


class RegretLedger:
    """Append-only per-step loss accounting.

    Records the algorithm's loss, an optional comparator loss, optional
    per-expert losses, the hint residual and the observed squared feature
    norm. Aggregates are plain running sums over the recorded streams, so a
    direct recomputation reproduces them exactly.
    """

    def __init__(self):
        self.alg_losses: list[float] = []
        self.comparator_losses: list[float | None] = []
        self.deltas_sq: list[float] = []
        self.expert_losses: dict[str, list[float]] = {}
        self.feat_sq_norms: list[float | None] = []
        self._alg_sum = 0.0
        self._comp_sum = 0.0
        self._delta_sq_sum = 0.0
        self._max_delta_sq = 0.0

    @property
    def steps(self) -> int:
        return len(self.alg_losses)

    @staticmethod
    def _half_sq(a: float, b: float) -> float:
        # products overflow to inf instead of raising, unlike float powers
        diff = a - b
        return 0.5 * diff * diff

    def record(
        self,
        y: float,
        hint: float,
        prediction: float,
        comparator_value: float | None = None,
        expert_predictions: dict[str, float] | None = None,
        feat_sq_norm: float | None = None,
    ) -> None:
        y = float(y)
        loss = self._half_sq(float(prediction), y)
        self.alg_losses.append(loss)
        self._alg_sum += loss
        if comparator_value is None:
            self.comparator_losses.append(None)
        else:
            closs = self._half_sq(float(comparator_value), y)
            self.comparator_losses.append(closs)
            self._comp_sum += closs
        d2 = 2.0 * self._half_sq(y, float(hint))
        self.deltas_sq.append(d2)
        self._delta_sq_sum += d2
        self._max_delta_sq = max(self._max_delta_sq, d2)
        if expert_predictions:
            for name, value in expert_predictions.items():
                self.expert_losses.setdefault(name, []).append(self._half_sq(float(value), y))
        self.feat_sq_norms.append(None if feat_sq_norm is None else float(feat_sq_norm))

    @property
    def algorithm_total(self) -> float:
        return self._alg_sum

    @property
    def comparator_total(self) -> float:
        return self._comp_sum

    @property
    def delta_sq_sum(self) -> float:
        return self._delta_sq_sum

    @property
    def max_delta_sq(self) -> float:
        return self._max_delta_sq

    def expert_totals(self) -> dict[str, float]:
        return {name: sum(vals) for name, vals in self.expert_losses.items()}


@dataclass
class ComparatorTrace:
    """A comparator sequence f_1..f_T of finite kernel expansions."""

    spec: KernelSpec
    functions: list[RkhsFunction]
    _path: float | None = field(default=None, repr=False)
    _cap: float | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return len(self.functions)

    @property
    def path(self) -> float:
        if self._path is None:
            self._path = path_length(self)
        return self._path

    @property
    def norm_cap(self) -> float:
        """max_t |f_t| in the RKHS norm."""
        if self._cap is None:
            self._cap = max((rkhs_norm(f) for f in self.functions), default=0.0)
        return self._cap


def increment_norm(f: RkhsFunction, g: RkhsFunction) -> float:
    """|g - f| in the RKHS norm, via the joint gram of both expansions.

    When the expansions share one anchor set the coefficients are
    subtracted first: the duplicated-anchor joint gram is singular and its
    rounding residue would survive the square root (a zero increment would
    come out as ~1e-8), while the difference expansion cancels exactly.
    """
    if f.spec != g.spec:
        raise ValueError("expansions live in different kernel spaces")
    if f.anchors.shape == g.anchors.shape and np.array_equal(f.anchors, g.anchors):
        diff = RkhsFunction(spec=f.spec, anchors=g.anchors, coeffs=g.coeffs - f.coeffs)
        return rkhs_norm(diff)
    anchors = np.vstack([f.anchors, g.anchors])
    coeffs = np.concatenate([-f.coeffs, g.coeffs])
    joint = RkhsFunction(spec=f.spec, anchors=anchors, coeffs=coeffs)
    return rkhs_norm(joint)


def path_length(trace: ComparatorTrace) -> float:
    """Total variation sum_t |f_{t+1} - f_t| of the comparator sequence."""
    if trace.steps < 1:
        raise ValueError("trace must cover at least one step")
    total = 0.0
    for f, g in zip(trace.functions, trace.functions[1:]):
        total += increment_norm(f, g)
    return total


def dynamic_regret(ledger: RegretLedger, trace: ComparatorTrace) -> float:
    """Cumulative algorithm loss minus cumulative comparator loss."""
    if ledger.steps != trace.steps:
        raise ValueError(
            f"ledger covers {ledger.steps} steps but trace covers {trace.steps}"
        )
    if any(c is None for c in ledger.comparator_losses):
        raise ValueError("ledger has steps without a recorded comparator loss")
    return ledger.algorithm_total - ledger.comparator_total


# ---------------------------------------------------------------------------
# closed-form bound evaluators
# ---------------------------------------------------------------------------


def dvaw_regret_bound(gamma, lam, u_seq, feats, labels, hints) -> float:
    """Exact dynamic-regret bound of the discounted forecaster.

    Evaluates, for comparators u_1..u_T and the realized data,

        gamma*lam/2 |u_1|^2
        + m/2 max_t delta_t^2 ln(1 + sum_t gamma^(T-t)|v_t|^2 / (lam m))
        + gamma sum_{t<T} [F_t(u_{t+1}) - F_t(u_t)]
        + m/2 (sum_t delta_t^2) ln(1/gamma)

    with F_t(w) = gamma^t lam/2 |w|^2 + sum_{s<=t} gamma^(t-s) l_s(w). The
    comparator-variation term is computed by direct double summation, which
    is quadratic in T and is the cost driver of bound evaluation (not of
    forecasting).
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"the bound is stated for gamma in (0, 1], got {gamma}")
    if not lam > 0:
        raise ValueError(f"ridge weight lam must be positive, got {lam}")
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    labels = np.asarray(labels, dtype=float).ravel()
    hints = np.asarray(hints, dtype=float).ravel()
    T, m = feats.shape
    if u_seq.shape != (T, m) or labels.shape != (T,) or hints.shape != (T,):
        raise ValueError("comparators, features, labels and hints must cover the same steps")

    deltas_sq = (labels - hints) ** 2
    weights = gamma ** np.arange(T - 1, -1, -1)  # gamma^(T-t), t = 1..T
    energy = float(weights @ np.sum(feats**2, axis=1))

    term1 = gamma * lam / 2.0 * float(u_seq[0] @ u_seq[0])
    term2 = m / 2.0 * float(np.max(deltas_sq)) * math.log1p(energy / (lam * m))

    # losses[s, j] = l_{s+1}(u_{j+1}); only consecutive comparator columns
    # are needed but the full matrix keeps the summation transparent
    preds = feats @ u_seq.T
    losses = 0.5 * (preds - labels[:, None]) ** 2
    u_norms_sq = np.sum(u_seq**2, axis=1)
    variation = 0.0
    for t in range(1, T):  # t = 1..T-1, ahead index t, behind index t-1
        disc = gamma ** np.arange(t - 1, -1, -1)  # gamma^(t-s), s = 1..t
        f_next = gamma**t * lam / 2.0 * u_norms_sq[t] + float(disc @ losses[:t, t])
        f_curr = gamma**t * lam / 2.0 * u_norms_sq[t - 1] + float(disc @ losses[:t, t - 1])
        variation += f_next - f_curr
    term3 = gamma * variation

    term4 = m / 2.0 * float(np.sum(deltas_sq)) * math.log(1.0 / gamma)
    return term1 + term2 + term3 + term4


def vaw_static_bound(lam, u, feats, labels, hints=None) -> float:
    """Static-regret bound of the undiscounted forecaster against a fixed u:

    lam/2 |u|^2 + m/2 max_t delta_t^2 ln(1 + sum_t |v_t|^2 / (lam m)).
    """
    if not lam > 0:
        raise ValueError(f"ridge weight lam must be positive, got {lam}")
    u = np.asarray(u, dtype=float).ravel()
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    labels = np.asarray(labels, dtype=float).ravel()
    T, m = feats.shape
    if hints is None:
        hints = np.zeros(T)
    hints = np.asarray(hints, dtype=float).ravel()
    if u.shape != (m,) or labels.shape != (T,) or hints.shape != (T,):
        raise ValueError("comparator, features, labels and hints shapes are inconsistent")
    max_d2 = float(np.max((labels - hints) ** 2))
    energy = float(np.sum(feats**2))
    return lam / 2.0 * float(u @ u) + m / 2.0 * max_d2 * math.log1p(energy / (lam * m))


def drift_loss_rate(a: float, R: float, Y: float, m) -> float:
    """Rate converting comparator path length into expected loss variation:
    a (a R + Y) + 2 R a^2 / m. ``m = math.inf`` gives the large-m limit."""
    if a < 0 or R < 0 or Y < 0:
        raise ValueError("a, R and Y must be non-negative")
    if m != math.inf and m < 1:
        raise ValueError(f"feature count m must be >= 1, got {m}")
    tail = 0.0 if m == math.inf else 2.0 * R * a**2 / m
    return a * (a * R + Y) + tail


def discount_odds_tradeoff(eta: float, m: int, hint_sq_sum: float, rate: float, path: float) -> float:
    """The eta-dependent part of the regret bound:
    eta * rate * path + m * hint_sq_sum / (2 eta)."""
    if not eta > 0:
        raise ValueError(f"discount odds must be positive, got {eta}")
    return eta * rate * path + m * hint_sq_sum / (2.0 * eta)


def optimal_discount_odds(m: int, hint_sq_sum: float, rate: float, path: float) -> float:
    """Minimizer of :func:`discount_odds_tradeoff` over eta > 0:
    sqrt(m * hint_sq_sum / (2 * rate * path)); infinity when the path
    vanishes (the optimal discount is then 1)."""
    if m < 1:
        raise ValueError(f"feature count m must be >= 1, got {m}")
    if hint_sq_sum < 0 or rate < 0 or path < 0:
        raise ValueError("hint_sq_sum, rate and path must be non-negative")
    denom = 2.0 * rate * path
    if denom == 0.0:
        return math.inf
    return math.sqrt(m * hint_sq_sum / denom)


def discount_grid_size(m: int, horizon: int, base: float) -> int:
    """Number of positive entries in the discount-odds grid."""
    return len(build_discount_grid(m, horizon, base).etas)


def prediction_energy_bound(m: int, horizon: int, base: float, lam: float,
                            Y: float, hint_bound: float, a: float) -> float:
    """Bound on the total squared expert predictions fed to a block's
    aggregator over the horizon:

    Z^2 = [(M-1)((Y+hint_bound)^2 + 4 Y^2) + hint_bound^2] T
          + 2 (M-1) (Y+hint_bound)^2 m ln(1 + a^2 T / lam)

    where M is the discount-odds grid size.
    """
    M = discount_grid_size(m, horizon, base)
    yy = (Y + hint_bound) ** 2
    return ((M - 1) * (yy + 4.0 * Y**2) + hint_bound**2) * horizon + (
        2.0 * (M - 1) * yy * m * math.log1p(a**2 * horizon / lam)
    )


def discount_adaptive_bound(
    a: float,
    Y: float,
    hint_bound: float,
    R: float,
    m: int,
    base: float,
    lam: float,
    lam_base: float,
    horizon: int,
    path: float,
    hint_sq_sum: float,
) -> float:
    """Expected-regret bound for one block: a discount-odds grid of base
    forecasters (ridge weight ``lam_base``) aggregated by an undiscounted
    forecaster (ridge weight ``lam``):

        (1+b) sqrt(m rho_m P D^2 / 2) + (Y+hint_bound)^2 / 2
        + lam_base R P + lam_base R^2 / 2
        + m/2 (Y+hint_bound)^2 ln(1 + a^2 T / (lam_base m))
        + a^2 R^2 T / (2 m) + lam / 2
        + M Y^2 / 2 ln(1 + Z^2 / (lam M))

    with rho_m the drift loss rate, P the comparator path length, D^2 the
    cumulative squared hint residual and Z^2 the prediction energy bound.
    """
    if m < 1:
        raise ValueError(f"feature count m must be >= 1, got {m}")
    for name, value in (("path", path), ("hint_sq_sum", hint_sq_sum), ("R", R),
                        ("Y", Y), ("hint_bound", hint_bound), ("a", a)):
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")
    rate = drift_loss_rate(a, R, Y, m)
    M = discount_grid_size(m, horizon, base)
    z_sq = prediction_energy_bound(m, horizon, base, lam, Y, hint_bound, a)
    yy = (Y + hint_bound) ** 2
    return (
        (1.0 + base) * math.sqrt(m * rate * path * hint_sq_sum / 2.0)
        + 0.5 * yy
        + lam_base * R * path
        + lam_base * R**2 / 2.0
        + m / 2.0 * yy * math.log1p(a**2 * horizon / (lam_base * m))
        + a**2 * R**2 * horizon / (2.0 * m)
        + lam / 2.0
        + M * Y**2 / 2.0 * math.log1p(z_sq / (lam * M))
    )


def hierarchy_regret_envelope(
    horizon: int,
    path: float,
    hint_sq_sum: float,
    a: float,
    Y: float,
    hint_bound: float,
    R: float,
    base: float,
    constants: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> float:
    """Pre-asymptotic envelope for the full hierarchy's expected regret:

    C1 ((1+b)^2 (1+a^2) rho_inf R^2 P D^2 T)^(1/3)
    + C2 (Y+hint_bound)^2 sqrt(T) ln(T) + C3 a^2 R^2 sqrt(T)

    with rho_inf = a (a R + Y). A scaling diagnostic: the constants are not
    claimed to dominate measured regret at any fixed horizon.
    """
    c1, c2, c3 = constants
    if c1 <= 0 or c2 <= 0 or c3 <= 0:
        raise ValueError("envelope constants must be positive")
    rho_inf = drift_loss_rate(a, R, Y, math.inf)
    dyn = ((1.0 + base) ** 2 * (1.0 + a**2) * rho_inf * R**2 * path * hint_sq_sum * horizon) ** (1.0 / 3.0)
    return (
        c1 * dyn
        + c2 * (Y + hint_bound) ** 2 * math.sqrt(horizon) * math.log(horizon)
        + c3 * a**2 * R**2 * math.sqrt(horizon)
    )


@dataclass
class BoundReport:
    """Named bound values plus the constants they were evaluated at.

    Non-finite quantities (the infinite optimal discount odds when the path
    vanishes) are reported through their finite counterparts (the optimal
    discount itself) and omitted from ``values``.
    """

    constants: dict[str, float]
    values: dict[str, float]

    def __post_init__(self):
        for name, value in self.values.items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"bound value {name} must be finite and non-negative, got {value}")

    def as_dict(self) -> dict:
        return {"constants": dict(self.constants), "values": dict(self.values)}
