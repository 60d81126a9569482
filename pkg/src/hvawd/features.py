"""Random feature maps, closed-form kernels, and finite kernel expansions.

Two kernel families are supported. The gaussian family uses the cosine
feature construction phi(x; (w, u)) = sqrt(2) cos(<w, x> + u) with
w ~ N(0, I / sigma^2), u ~ U[0, 2pi); inner products of sampled feature
vectors are unbiased estimates of exp(-|x - y|^2 / (2 sigma^2)). The
finite-dictionary family tabulates features on a fixed point set and is
exact, which makes it convenient for closed-form tests.
"""

import hashlib

import numpy as np
from dataclasses import dataclass

from .errors import NumericError

# Quadratic forms on near-singular gram matrices can round slightly below
# zero; magnitudes up to this are clamped, anything worse is an error.
GRAM_CLAMP_TOL = 1e-8


def derive_seed(master_seed: int, *tokens) -> int:
    """Derive a child 64-bit seed from a master seed and a token path.

    Stream splitting is done by hashing the decimal master seed together
    with the tokens (e.g. ``derive_seed(s, "featmap", m)``), so sub-streams
    are stable across platforms and independent of construction order.
    """
    text = ":".join([str(int(master_seed))] + [str(t) for t in tokens])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class GaussianRffKernel:
    """Gaussian kernel exp(-|x-y|^2 / (2 bandwidth^2)) on R^dim.

    The feature bound is a = sqrt(2) exactly: |sqrt(2) cos(.)| <= sqrt(2).
    """

    dim: int
    bandwidth: float

    kind = "gaussian-rff"
    a = float(np.sqrt(2.0))

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not (float(self.bandwidth) > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True, eq=False)
class DictionaryKernel:
    """Finite feature dictionary on a fixed point set.

    ``table[i, j]`` is the j-th base feature at ``points[i]``; the parameter
    measure is uniform over columns, so k(x, y) = mean_j table[ix, j] *
    table[iy, j]. Inputs to evaluation must match a dictionary point exactly.
    """

    points: np.ndarray  # (n, d)
    table: np.ndarray   # (n, n_features)
    a: float

    kind = "finite-dictionary"

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        table = np.atleast_2d(np.asarray(self.table, dtype=float))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "table", table)
        if points.shape[0] != table.shape[0]:
            raise ValueError("points and table must have one row per dictionary point")
        if table.shape[1] < 1:
            raise ValueError("feature table must have at least one column")
        if not (float(self.a) > 0):
            raise ValueError(f"feature bound a must be positive, got {self.a}")
        if not np.all(np.isfinite(table)):
            raise ValueError("feature table contains non-finite entries")
        if np.max(np.abs(table)) > self.a + 1e-12:
            raise ValueError("feature table exceeds the declared bound a")
        points.flags.writeable = False
        table.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, DictionaryKernel)
            and float(self.a) == float(other.a)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.table, other.table)
        )


KernelSpec = GaussianRffKernel | DictionaryKernel


def kernel_spec_to_config(spec: KernelSpec) -> dict:
    """Serialize a kernel spec into plain config data."""
    if isinstance(spec, GaussianRffKernel):
        return {"kind": spec.kind, "dim": spec.dim, "bandwidth": spec.bandwidth}
    return {
        "kind": spec.kind,
        "points": spec.points.tolist(),
        "table": spec.table.tolist(),
        "a": spec.a,
    }


def kernel_spec_from_config(data: dict) -> KernelSpec:
    """Inverse of :func:`kernel_spec_to_config`."""
    kind = data.get("kind")
    if kind == "gaussian-rff":
        return GaussianRffKernel(dim=int(data["dim"]), bandwidth=float(data["bandwidth"]))
    if kind == "finite-dictionary":
        return DictionaryKernel(
            points=np.asarray(data["points"], dtype=float),
            table=np.asarray(data["table"], dtype=float),
            a=float(data["a"]),
        )
    raise ValueError(f"unknown kernel kind: {kind!r}")


def _dictionary_row(spec: DictionaryKernel, x: np.ndarray) -> int:
    matches = np.flatnonzero(np.all(spec.points == x, axis=1))
    if matches.size == 0:
        raise ValueError("input does not match any dictionary point")
    return int(matches[0])


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A frozen draw of m feature parameters; evaluates x -> R^m.

    Evaluation returns (1/sqrt(m)) (phi(x; th_1), ..., phi(x; th_m)). It is
    a pure function of (spec, m, seed): maps rebuilt from the same seed give
    bitwise-identical outputs.
    """

    spec: KernelSpec
    m: int
    params: tuple
    seed: int

    def __post_init__(self):
        for arr in self.params:
            arr.flags.writeable = False

    def evaluate(self, x) -> np.ndarray:
        """Feature vector at a single point, shape (m,)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.spec.dim:
            raise ValueError(
                f"input dimension {x.shape} does not match kernel dim {self.spec.dim}"
            )
        if isinstance(self.spec, GaussianRffKernel):
            omegas, phases = self.params
            raw = np.sqrt(2.0) * np.cos(omegas @ x + phases)
        else:
            (indices,) = self.params
            raw = self.spec.table[_dictionary_row(self.spec, x), indices]
        return raw / np.sqrt(self.m)

    def evaluate_many(self, xs) -> np.ndarray:
        """Feature vectors for rows of ``xs``, shape (n, m)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.spec.dim:
            raise ValueError(
                f"input dimension {xs.shape[1]} does not match kernel dim {self.spec.dim}"
            )
        if isinstance(self.spec, GaussianRffKernel):
            omegas, phases = self.params
            raw = np.sqrt(2.0) * np.cos(xs @ omegas.T + phases)
        else:
            (indices,) = self.params
            rows = np.array([_dictionary_row(self.spec, x) for x in xs])
            raw = self.spec.table[np.ix_(rows, indices)]
        return raw / np.sqrt(self.m)


def sample_feature_map(spec: KernelSpec, m: int, seed: int) -> FeatureMap:
    """Draw m i.i.d. feature parameters from the spec's parameter measure."""
    if m < 1:
        raise ValueError(f"feature count m must be >= 1, got {m}")
    rng = np.random.default_rng(int(seed) % 2**64)
    if isinstance(spec, GaussianRffKernel):
        omegas = rng.normal(0.0, 1.0 / spec.bandwidth, size=(m, spec.dim))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=m)
        params = (omegas, phases)
    elif isinstance(spec, DictionaryKernel):
        indices = rng.integers(0, spec.table.shape[1], size=m)
        params = (indices,)
    else:
        raise ValueError(f"unsupported kernel spec: {spec!r}")
    return FeatureMap(spec=spec, m=int(m), params=params, seed=int(seed))


def kernel(spec: KernelSpec, x, y) -> float:
    """Exact closed-form kernel value k(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] != spec.dim:
        raise ValueError("kernel inputs must be vectors matching the spec dimension")
    if isinstance(spec, GaussianRffKernel):
        d2 = float(np.sum((x - y) ** 2))
        return float(np.exp(-d2 / (2.0 * spec.bandwidth**2)))
    ix = _dictionary_row(spec, x)
    iy = _dictionary_row(spec, y)
    return float(spec.table[ix] @ spec.table[iy] / spec.table.shape[1])


def kernel_gram(spec: KernelSpec, xs, zs=None) -> np.ndarray:
    """Gram matrix K[i, j] = k(xs[i], zs[j]); zs defaults to xs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    zs = xs if zs is None else np.atleast_2d(np.asarray(zs, dtype=float))
    if xs.shape[1] != spec.dim or zs.shape[1] != spec.dim:
        raise ValueError("gram inputs must match the spec dimension")
    if isinstance(spec, GaussianRffKernel):
        sq = (
            np.sum(xs**2, axis=1)[:, None]
            + np.sum(zs**2, axis=1)[None, :]
            - 2.0 * xs @ zs.T
        )
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * spec.bandwidth**2))
    rows_x = np.array([_dictionary_row(spec, x) for x in xs])
    rows_z = np.array([_dictionary_row(spec, z) for z in zs])
    return spec.table[rows_x] @ spec.table[rows_z].T / spec.table.shape[1]


@dataclass(frozen=True, eq=False)
class RkhsFunction:
    """Finite kernel expansion f = sum_i coeffs[i] k(., anchors[i])."""

    spec: KernelSpec
    anchors: np.ndarray  # (n, d)
    coeffs: np.ndarray   # (n,)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if coeffs.size == 0:
            anchors = np.zeros((0, self.spec.dim))
        else:
            anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "coeffs", coeffs)
        if anchors.shape[0] != coeffs.shape[0]:
            raise ValueError("one coefficient per anchor is required")
        if anchors.shape[1] != self.spec.dim:
            raise ValueError("anchor dimension does not match the kernel spec")
        anchors.flags.writeable = False
        coeffs.flags.writeable = False

    def evaluate(self, x) -> float:
        """f(x) = sum_i coeffs[i] k(x, anchors[i])."""
        col = kernel_gram(self.spec, self.anchors, np.asarray(x, dtype=float)[None, :])
        return float(self.coeffs @ col[:, 0])

    def evaluate_many(self, xs) -> np.ndarray:
        return self.coeffs @ kernel_gram(self.spec, self.anchors, xs)


def rkhs_norm(f: RkhsFunction) -> float:
    """RKHS norm sqrt(c^T K c) of a finite expansion.

    Tiny negative quadratic forms (rounding on near-singular grams) clamp
    to zero; anything below -GRAM_CLAMP_TOL raises NumericError.
    """
    if f.coeffs.size == 0:
        return 0.0
    gram = kernel_gram(f.spec, f.anchors)
    q = float(f.coeffs @ gram @ f.coeffs)
    if q < -GRAM_CLAMP_TOL:
        raise NumericError(f"gram quadratic form is negative beyond tolerance: {q}")
    return float(np.sqrt(max(q, 0.0)))


def lift_comparator(f: RkhsFunction, fmap: FeatureMap) -> np.ndarray:
    """Finite-dimensional image of f under the sampled feature map.

    Returns w = sum_i coeffs[i] Phi(anchors[i]); over the feature draw,
    <w, Phi(x)> is an unbiased estimate of f(x) and E|w|^2 equals the
    squared RKHS norm of f.
    """
    if f.spec != fmap.spec:
        raise ValueError("function and feature map were built from different kernel specs")
    if f.coeffs.size == 0:
        return np.zeros(fmap.m)
    return f.coeffs @ fmap.evaluate_many(f.anchors)
