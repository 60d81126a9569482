"""Discounted and undiscounted VAW forecasters for the unconstrained quadratic loss.

The discounted forecaster keeps the inverse second-moment matrix
S_t^{-1} with S_0 = lam I, S_t = v_t v_t^T + gamma S_{t-1}, plus the
discounted label-feature sum b_t = sum_{s<=t} gamma^(t-s) y_s v_s. Before
the label arrives it predicts

    y_hat_t = <w_t, v_t>,   w_t = S_t^{-1} (hint_t v_t + gamma b_{t-1}),

which is the minimizer of the hinted current-step loss plus the
geometrically discounted past losses (ridge term included). Every step is
split into predict (feature and hint available) and commit (label
available) so the label cannot leak into the prediction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ProtocolError


def woodbury_step(inv: np.ndarray, v: np.ndarray, gamma: float) -> np.ndarray:
    """Discounted rank-one inverse update.

    Given inv = S^{-1}, returns (gamma S + v v^T)^{-1} =
    (inv - inv v v^T inv / (gamma + v^T inv v)) / gamma.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"discount gamma must lie in (0, 1], got {gamma}")
    iv = inv @ v
    denom = gamma + iv @ v
    out = (inv - np.outer(iv, iv / denom)) / gamma
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite entries in inverse update")
    return out


def _symmetrize(a: np.ndarray) -> np.ndarray:
    # Drift control: rank-one updates slowly break symmetry over long runs.
    return (a + a.T) * 0.5


@dataclass
class PredictContext:
    """Staged state between predict and commit: the feature seen and the
    already-advanced inverse matrix, pending the label."""

    feat: np.ndarray
    inv_after: np.ndarray


class DvawForecaster:
    """One discounted forecaster over a fixed m-dimensional feature space.

    gamma = 1 recovers the standard (undiscounted) forecaster. gamma = 0 is
    deliberately not representable here: with no quadratic memory the update
    degenerates, and that grid slot is realized upstream as a plain hint
    passthrough instead.
    """

    def __init__(self, m: int, gamma: float, lam: float):
        if m < 1:
            raise ValueError(f"dimension m must be >= 1, got {m}")
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"discount gamma must lie in (0, 1], got {gamma}")
        if not lam > 0:
            raise ValueError(f"ridge weight lam must be positive, got {lam}")
        self.m = int(m)
        self.gamma = float(gamma)
        self.lam = float(lam)
        self.inv_sigma = np.eye(self.m) / self.lam
        self.disc_sum = np.zeros(self.m)
        self.t = 0
        self._staged: PredictContext | None = None

    def predict(self, feat: np.ndarray, hint: float) -> tuple[float, PredictContext]:
        if self._staged is not None:
            raise ProtocolError("predict called twice without an intervening commit")
        feat = np.asarray(feat, dtype=float)
        if feat.shape != (self.m,):
            raise ValueError(f"feature shape {feat.shape} does not match m={self.m}")
        inv_after = woodbury_step(self.inv_sigma, feat, self.gamma)
        w = inv_after @ (float(hint) * feat + self.gamma * self.disc_sum)
        pred = float(w @ feat)
        if not np.isfinite(pred):
            raise NumericError("non-finite prediction")
        self._staged = PredictContext(feat=feat.copy(), inv_after=inv_after)
        return pred, self._staged

    def commit(self, staged: PredictContext, label: float) -> None:
        if staged is None or staged is not self._staged:
            raise ProtocolError("commit does not match the staged prediction")
        self.disc_sum = self.gamma * self.disc_sum + float(label) * staged.feat
        self.inv_sigma = _symmetrize(staged.inv_after)
        self.t += 1
        self._staged = None


class VawForecaster:
    """Undiscounted forecaster used to aggregate expert prediction vectors.

    Mechanically a gamma = 1, zero-hint specialization of the discounted
    forecaster: S_t = z_t z_t^T + S_{t-1}, prediction <S_t^{-1} sum_{s<t}
    y_s z_s, z_t>.
    """

    def __init__(self, dim: int, lam: float):
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        if not lam > 0:
            raise ValueError(f"ridge weight lam must be positive, got {lam}")
        self.dim = int(dim)
        self.lam = float(lam)
        self.inv_sigma = np.eye(self.dim) / self.lam
        self.label_sum = np.zeros(self.dim)
        self.t = 0
        self._staged: PredictContext | None = None

    def predict(self, z: np.ndarray) -> tuple[float, PredictContext]:
        if self._staged is not None:
            raise ProtocolError("predict called twice without an intervening commit")
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"input shape {z.shape} does not match dim={self.dim}")
        iv = self.inv_sigma @ z
        inv_after = self.inv_sigma - np.outer(iv, iv / (1.0 + iv @ z))
        w = inv_after @ self.label_sum
        pred = float(w @ z)
        if not np.isfinite(pred):
            raise NumericError("non-finite prediction")
        self._staged = PredictContext(feat=z.copy(), inv_after=inv_after)
        return pred, self._staged

    def commit(self, staged: PredictContext, label: float) -> None:
        if staged is None or staged is not self._staged:
            raise ProtocolError("commit does not match the staged prediction")
        self.label_sum = self.label_sum + float(label) * staged.feat
        self.inv_sigma = _symmetrize(staged.inv_after)
        self.t += 1
        self._staged = None


@dataclass
class HintPolicy:
    """How the pre-label hint is produced; emitted hints satisfy |hint| <= clip."""

    kind: str = "last-label"  # zero | last-label | external
    clip: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "last-label", "external"):
            raise ValueError(f"unknown hint policy kind: {self.kind!r}")
        if self.clip < 0:
            raise ValueError(f"hint clip must be >= 0, got {self.clip}")


def hint_emit(
    policy: HintPolicy,
    t: int,
    last_label: float | None = None,
    external: float | None = None,
) -> float:
    """Hint for step t. The first step always gets 0."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if t == 1 or policy.kind == "zero":
        return 0.0
    if policy.kind == "last-label":
        value = 0.0 if last_label is None else float(last_label)
    else:
        if external is None:
            raise ValueError("external hint policy requires a caller-supplied value")
        value = float(external)
    return float(np.clip(value, -policy.clip, policy.clip))


@dataclass
class BankContext:
    """Staged state of a whole forecaster bank between predict and commit."""

    feats: np.ndarray      # (K, dim)
    inv_after: np.ndarray  # (K, dim, dim)


class DvawBank:
    """A bank of discounted forecasters advanced in lockstep.

    Expert k sees feature row V[k] with its own discount gammas[k] and ridge
    weight lams[k]; all experts share one padded dimension. Rows beyond an
    expert's active dimension ``dims[k]`` carry zeros: zero feature
    coordinates never touch the corresponding state coordinates, so padding
    an expert into a larger bank leaves its predictions unchanged. The
    batched update performs the same arithmetic as :class:`DvawForecaster`
    step by step, except that the inert padding block of each inverse is
    held fixed; left alone it would grow like (1/gamma)^t and eventually
    overflow without ever influencing a prediction.
    """

    def __init__(self, dim: int, gammas, lams, dims=None):
        gammas = np.asarray(gammas, dtype=float)
        lams = np.asarray(lams, dtype=float)
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        if gammas.ndim != 1 or gammas.shape != lams.shape:
            raise ValueError("gammas and lams must be matching 1-d arrays")
        if gammas.size == 0:
            raise ValueError("bank must contain at least one expert")
        if np.any(gammas <= 0.0) or np.any(gammas > 1.0):
            raise ValueError("all discounts must lie in (0, 1]")
        if np.any(lams <= 0.0):
            raise ValueError("all ridge weights must be positive")
        self.dim = int(dim)
        self.gammas = gammas
        self.lams = lams
        self.size = int(gammas.size)
        if dims is None:
            dims = np.full(self.size, self.dim, dtype=int)
        dims = np.asarray(dims, dtype=int)
        if dims.shape != gammas.shape or np.any(dims < 1) or np.any(dims > self.dim):
            raise ValueError("dims must give each expert an active dimension in [1, dim]")
        self.dims = dims
        # contiguous runs of equal active dimension, for the padding freeze
        self._pad_runs: list[tuple[slice, int]] = []
        start = 0
        for k in range(1, self.size + 1):
            if k == self.size or dims[k] != dims[start]:
                if dims[start] < self.dim:
                    self._pad_runs.append((slice(start, k), int(dims[start])))
                start = k
        self.inv_sigma = np.eye(self.dim)[None, :, :] / lams[:, None, None]
        self.disc_sums = np.zeros((self.size, self.dim))
        self.t = 0
        self._staged: BankContext | None = None

    def predict(self, feats: np.ndarray, hint: float) -> tuple[np.ndarray, BankContext]:
        if self._staged is not None:
            raise ProtocolError("predict called twice without an intervening commit")
        feats = np.asarray(feats, dtype=float)
        if feats.shape != (self.size, self.dim):
            raise ValueError(
                f"feature block shape {feats.shape} does not match ({self.size}, {self.dim})"
            )
        iv = (self.inv_sigma @ feats[:, :, None])[:, :, 0]
        quad = np.sum(iv * feats, axis=1)
        denom = self.gammas + quad
        inv_after = self.inv_sigma - iv[:, :, None] * (iv / denom[:, None])[:, None, :]
        inv_after /= self.gammas[:, None, None]
        rhs = float(hint) * feats + self.gammas[:, None] * self.disc_sums
        w = (inv_after @ rhs[:, :, None])[:, :, 0]
        preds = np.sum(w * feats, axis=1)
        if not np.all(np.isfinite(preds)):
            raise NumericError("non-finite prediction in forecaster bank")
        self._staged = BankContext(feats=feats.copy(), inv_after=inv_after)
        return preds, self._staged

    def commit(self, staged: BankContext, label: float) -> None:
        if staged is None or staged is not self._staged:
            raise ProtocolError("commit does not match the staged prediction")
        self.disc_sums = self.gammas[:, None] * self.disc_sums + float(label) * staged.feats
        inv = (staged.inv_after + staged.inv_after.transpose(0, 2, 1)) * 0.5
        for run, d in self._pad_runs:
            # undo the 1/gamma rescale on the inert padding block; no
            # feature ever reaches it, so this is observationally exact
            inv[run, d:, d:] *= self.gammas[run, None, None]
        self.inv_sigma = inv
        self.t += 1
        self._staged = None
