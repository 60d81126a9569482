"""Three-level forecaster: discount grid, per-block aggregation, feature-count aggregation.

Level 1 runs one discounted forecaster per grid discount on a shared
feature map (one map per feature count m). Level 2 aggregates each block's
expert predictions with an undiscounted forecaster, learning the discount
on the fly. Level 3 aggregates the block outputs together with a plain
hint expert, learning the feature count. All level-1 experts across all
blocks live in a single zero-padded bank so that one step costs a handful
of batched array operations; padding is exact (zero feature coordinates
never touch the corresponding state entries).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ProtocolError
from .features import FeatureMap, KernelSpec, derive_seed, sample_feature_map
from .forecaster import BankContext, DvawBank, HintPolicy, PredictContext, VawForecaster, hint_emit


@dataclass(frozen=True)
class DiscountGrid:
    """Geometric grid of discount odds eta = gamma / (1 - gamma).

    etas runs from 2m up to m*T in powers of the base (capped and
    deduplicated at the top); gammas prepends the special zero slot, whose
    expert is a hint passthrough: a zero discount erases all quadratic
    memory, so there is nothing to solve and the hint is the only anchor.
    """

    m: int
    horizon: int
    base: float
    etas: tuple[float, ...]
    gammas: tuple[float, ...]  # (0.0, eta_1/(1+eta_1), ...)

    @property
    def size(self) -> int:
        return len(self.gammas)


def build_discount_grid(m: int, horizon: int, base: float) -> DiscountGrid:
    """Grid of discounts for one feature count at a known horizon."""
    if m < 1:
        raise ValueError(f"feature count m must be >= 1, got {m}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not base > 1.0:
        raise ValueError(f"grid base must exceed 1, got {base}")
    eta_min = 2.0 * m
    eta_max = float(m) * float(horizon)
    etas: list[float] = []
    i = 0
    while True:
        value = min(eta_min * base**i, eta_max)
        if not etas or value > etas[-1]:
            etas.append(value)
        if value >= eta_max:
            break
        i += 1
    gammas = (0.0,) + tuple(e / (1.0 + e) for e in etas)
    return DiscountGrid(m=int(m), horizon=int(horizon), base=float(base),
                        etas=tuple(etas), gammas=gammas)


@dataclass(frozen=True)
class FeatureGrid:
    """Dyadic grid of feature counts {0} u {2^j}, topping out in [sqrt(T), 2 sqrt(T)]."""

    horizon: int
    entries: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.entries)


def build_feature_grid(horizon: int) -> FeatureGrid:
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    # smallest j with 4^j >= T, i.e. ceil(log2(T) / 2), in exact integer math
    j_max = 0
    while 4**j_max < horizon:
        j_max += 1
    entries = (0,) + tuple(2**j for j in range(j_max + 1))
    return FeatureGrid(horizon=int(horizon), entries=entries)


@dataclass
class Block:
    """One feature count's worth of machinery: shared map, discount grid,
    the block's slice of the global expert bank, and its level-2 aggregator."""

    m: int
    feature_map: FeatureMap
    grid: DiscountGrid
    bank_lo: int
    bank_hi: int
    aggregator: VawForecaster
    has_hint_slot: bool  # the grid's zero-discount entry, a hint passthrough


@dataclass
class StepTrace:
    """Everything one step produced, kept for the ledger and for commit."""

    step: int
    hint: float
    block_inputs: list[np.ndarray]   # per block: [hint, base expert predictions...]
    zetas: np.ndarray                # level-3 input: [hint, block outputs...]
    prediction: float
    feat_sq_norms: dict[int, float]  # per block m: |Phi_m(x_t)|^2
    _bank_staged: BankContext | None = field(default=None, repr=False)
    _level2_staged: list[PredictContext] = field(default_factory=list, repr=False)
    _level3_staged: PredictContext | None = field(default=None, repr=False)


class HierarchyForecaster:
    """The assembled three-level forecaster.

    Build through :func:`build_hierarchy` for the standard grids; the
    constructor takes explicit parts so reduced configurations can be wired
    up directly in tests.
    """

    def __init__(
        self,
        spec: KernelSpec,
        horizon: int,
        feature_maps: dict[int, FeatureMap],
        discount_grids: dict[int, DiscountGrid],
        lambda2: float,
        hint_policy: HintPolicy,
        base: float,
        master_seed: int | None = None,
        include_hint_expert: bool = True,
    ):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        if not lambda2 > 0:
            raise ValueError(f"level-2 ridge weight must be positive, got {lambda2}")
        if sorted(feature_maps) != sorted(discount_grids):
            raise ValueError("feature maps and discount grids must cover the same blocks")
        self.spec = spec
        self.horizon = int(horizon)
        self.lambda2 = float(lambda2)
        self.hint_policy = hint_policy
        self.base = float(base)
        self.master_seed = master_seed
        self.include_hint_expert = bool(include_hint_expert)

        ms = sorted(feature_maps)
        self.pad_dim = max(ms) if ms else 1
        gammas: list[float] = []
        lams: list[float] = []
        dims: list[int] = []
        self.blocks: list[Block] = []
        lo = 0
        for m in ms:
            grid = discount_grids[m]
            positive = [g for g in grid.gammas if g > 0.0]
            gammas.extend(positive)
            lams.extend([1.0 / m] * len(positive))  # base ridge weight 1/m
            dims.extend([m] * len(positive))
            hi = lo + len(positive)
            self.blocks.append(
                Block(
                    m=m,
                    feature_map=feature_maps[m],
                    grid=grid,
                    bank_lo=lo,
                    bank_hi=hi,
                    aggregator=VawForecaster(dim=grid.size, lam=self.lambda2),
                    has_hint_slot=len(positive) < grid.size,
                )
            )
            lo = hi
        self.bank = DvawBank(self.pad_dim, gammas, lams, dims=dims) if gammas else None
        # level-3 expert order is fixed: the hint expert first, then blocks
        # by ascending feature count
        self.level3 = VawForecaster(
            dim=int(self.include_hint_expert) + len(self.blocks), lam=1.0
        )
        self.t = 0
        self.last_label: float | None = None
        self._staged: StepTrace | None = None

    # -- structure ---------------------------------------------------------

    @property
    def expert_names(self) -> list[str]:
        head = ["hint"] if self.include_hint_expert else []
        return head + [f"m{b.m}" for b in self.blocks]

    def expert_counts(self) -> dict[str, int]:
        """Structural sizes: base slots (incl. zero-discount slots), level-2
        aggregators, and the single level-3 aggregator."""
        return {
            "base": sum(b.grid.size for b in self.blocks),
            "level2": len(self.blocks),
            "level3": 1,
        }

    # -- stepping ----------------------------------------------------------

    def predict(self, x, external_hint: float | None = None) -> tuple[float, StepTrace]:
        if self._staged is not None:
            raise ProtocolError("predict called twice without an intervening commit")
        step = self.t + 1
        hint = hint_emit(self.hint_policy, step, self.last_label, external_hint)

        feat_sq: dict[int, float] = {}
        bank_preds = np.empty(0)
        bank_staged = None
        if self.bank is not None:
            feats = np.zeros((self.bank.size, self.pad_dim))
            for blk in self.blocks:
                phi = blk.feature_map.evaluate(x)
                feats[blk.bank_lo:blk.bank_hi, : blk.m] = phi
                feat_sq[blk.m] = float(phi @ phi)
            bank_preds, bank_staged = self.bank.predict(feats, hint)

        block_inputs: list[np.ndarray] = []
        level2_staged: list[PredictContext] = []
        offset = int(self.include_hint_expert)
        zetas = np.empty(offset + len(self.blocks))
        if self.include_hint_expert:
            zetas[0] = hint  # the m = 0 expert passes the hint through
        for j, blk in enumerate(self.blocks):
            preds = bank_preds[blk.bank_lo:blk.bank_hi]
            z = np.concatenate(([hint], preds)) if blk.has_hint_slot else preds.copy()
            zeta, staged = blk.aggregator.predict(z)
            block_inputs.append(z)
            level2_staged.append(staged)
            zetas[offset + j] = zeta

        prediction, level3_staged = self.level3.predict(zetas)
        if not np.isfinite(prediction):
            raise NumericError(f"non-finite prediction at step {step}")
        trace = StepTrace(
            step=step,
            hint=hint,
            block_inputs=block_inputs,
            zetas=zetas,
            prediction=prediction,
            feat_sq_norms=feat_sq,
            _bank_staged=bank_staged,
            _level2_staged=level2_staged,
            _level3_staged=level3_staged,
        )
        self._staged = trace
        return prediction, trace

    def commit(self, trace: StepTrace, label: float) -> None:
        if trace is None or trace is not self._staged:
            raise ProtocolError("commit does not match the staged prediction")
        label = float(label)
        if self.bank is not None:
            self.bank.commit(trace._bank_staged, label)
        for blk, staged in zip(self.blocks, trace._level2_staged):
            blk.aggregator.commit(staged, label)
        self.level3.commit(trace._level3_staged, label)
        self.last_label = label
        self.t += 1
        self._staged = None


def build_hierarchy(
    horizon: int,
    spec: KernelSpec,
    master_seed: int,
    base: float = 2.0,
    lambda2: float = 1.0,
    hint_policy: HintPolicy | None = None,
) -> HierarchyForecaster:
    """Standard construction: dyadic feature grid, geometric discount grids,
    one feature map per block with a seed split off the master seed."""
    fgrid = build_feature_grid(horizon)
    if hint_policy is None:
        hint_policy = HintPolicy(kind="last-label", clip=1.0)
    feature_maps: dict[int, FeatureMap] = {}
    discount_grids: dict[int, DiscountGrid] = {}
    for m in fgrid.entries:
        if m == 0:
            continue
        feature_maps[m] = sample_feature_map(spec, m, derive_seed(master_seed, "featmap", m))
        discount_grids[m] = build_discount_grid(m, horizon, base)
    return HierarchyForecaster(
        spec=spec,
        horizon=horizon,
        feature_maps=feature_maps,
        discount_grids=discount_grids,
        lambda2=lambda2,
        hint_policy=hint_policy,
        base=base,
        master_seed=master_seed,
    )
