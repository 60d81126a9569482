"""Streaming online regression in RKHS via discounted VAW forecasters
over random feature maps, with exact evaluators for the closed-form
regret bounds and synthetic drift streams that make them checkable."""

from .bounds import (
    BoundReport,
    ComparatorTrace,
    RegretLedger,
    discount_adaptive_bound,
    discount_odds_tradeoff,
    drift_loss_rate,
    dvaw_regret_bound,
    dynamic_regret,
    hierarchy_regret_envelope,
    optimal_discount_odds,
    path_length,
    prediction_energy_bound,
    vaw_static_bound,
)
from .errors import ConfigError, NumericError, ParseError, ProtocolError, SchemaError
from .features import (
    DictionaryKernel,
    FeatureMap,
    GaussianRffKernel,
    KernelSpec,
    RkhsFunction,
    derive_seed,
    kernel,
    kernel_gram,
    lift_comparator,
    rkhs_norm,
    sample_feature_map,
)
from .forecaster import (
    DvawBank,
    DvawForecaster,
    HintPolicy,
    VawForecaster,
    hint_emit,
    woodbury_step,
)
from .hierarchy import (
    DiscountGrid,
    FeatureGrid,
    HierarchyForecaster,
    StepTrace,
    build_discount_grid,
    build_feature_grid,
    build_hierarchy,
)
from .streams import DriftScenario, StreamRecord, generate, ingest, stream_label_bound, write_stream

__version__ = "0.1.0"
