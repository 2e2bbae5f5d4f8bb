"""Linear soft-margin SVM: binary grading and one-vs-one site discrimination.

The decision value is ``z = w . x~ - b`` on standardised features ``x~``;
``z < 0`` selects the negative label (Qualified for grading) and ``z >= 0``
the positive one.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import FewerThanTwoClasses, SchemeMismatch, SingleClassTrainingSet
from .features import FeatureScheme, FeatureVector
from .seeding import derive_seed

QUALIFIED = "Qualified"
DEFECTIVE = "Defective"
GRADES = (QUALIFIED, DEFECTIVE)

SCALE_FLOOR = 1e-9


@dataclass(frozen=True)
class TrainConfig:
    c: float = 1.0
    tolerance: float = 1e-3
    max_epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: str

    @property
    def scheme(self) -> FeatureScheme:
        return self.features.scheme


@dataclass(frozen=True, eq=False)
class LinearModel:
    scheme: FeatureScheme
    weights: np.ndarray
    bias: float
    shift: np.ndarray
    scale: np.ndarray
    label_map: tuple[str, str] = GRADES  # (label for z < 0, label for z >= 0)
    train_config: TrainConfig | None = None
    class_counts: dict[str, int] | None = None
    epoch_objectives: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        d = self.scheme.dimension
        for name in ("weights", "shift", "scale"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != (d,) or not np.isfinite(arr).all():
                raise ValueError(f"{name} must hold {d} finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.scale <= 0).any():
            raise ValueError("standardisation scales must be positive")
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "label_map", tuple(self.label_map))

    @classmethod
    def identity(cls, scheme: FeatureScheme, weights, bias: float, **kw) -> "LinearModel":
        d = scheme.dimension
        return cls(scheme, weights, bias, np.zeros(d), np.ones(d), **kw)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.shift) / self.scale

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        """Vectorised ``decision_value`` over the rows of a raw feature matrix."""
        return self.standardize(np.asarray(X, dtype=np.float64)) @ self.weights - self.bias

    def scaled(self, factor: float) -> "LinearModel":
        return LinearModel(self.scheme, self.weights * factor, self.bias * factor,
                           self.shift, self.scale, self.label_map)


def _check_scheme(model, x: FeatureVector):
    if x.scheme != model.scheme:
        raise SchemeMismatch(f"model expects scheme {model.scheme}, got {x.scheme}")


def decision_value(model: LinearModel, x: FeatureVector) -> float:
    _check_scheme(model, x)
    return float(model.decision_values(x.values[None, :])[0])


def predict(model: LinearModel, x: FeatureVector) -> str:
    z = decision_value(model, x)
    return model.label_map[0] if z < 0 else model.label_map[1]


def _matrix(samples, scheme=None) -> tuple[FeatureScheme, np.ndarray]:
    if not samples:
        raise ValueError("no samples given")
    scheme = scheme or samples[0].features.scheme
    for s in samples:
        if s.features.scheme != scheme:
            raise SchemeMismatch(f"mixed schemes: {scheme} and {s.features.scheme}")
    return scheme, np.stack([s.features.values for s in samples])


def _signs(samples, label_map) -> np.ndarray:
    neg, pos = label_map
    y = np.empty(len(samples))
    for k, s in enumerate(samples):
        if s.label == neg:
            y[k] = -1.0
        elif s.label == pos:
            y[k] = 1.0
        else:
            raise ValueError(f"label {s.label!r} not in {label_map}")
    return y


def _hinge_sum(margins: np.ndarray) -> float:
    return float(np.maximum(0.0, 1.0 - margins).sum())


def objective(model: LinearModel, samples, c: float) -> float:
    """Soft-margin primal ``0.5 |w|^2 + c * sum(hinge)`` on standardised features."""
    scheme, X = _matrix(samples)
    if scheme != model.scheme:
        raise SchemeMismatch(f"model expects scheme {model.scheme}, got {scheme}")
    y = _signs(samples, model.label_map)
    z = model.decision_values(X)
    return 0.5 * float(model.weights @ model.weights) + c * _hinge_sum(y * z)


def optimal_bias(scores: np.ndarray, y: np.ndarray) -> float:
    """Exact minimiser over b of sum(max(0, 1 - y * (scores - b))).

    The sum is convex and piecewise linear in b with kinks at ``scores - y``;
    the midpoint of the minimising interval is returned.
    """
    p = np.sort(scores[y > 0] - 1.0)   # contributes (b - p) when b > p
    q = np.sort(scores[y < 0] + 1.0)   # contributes (q - b) when b < q
    cand = np.unique(np.concatenate([p, q]))
    cp = np.concatenate([[0.0], np.cumsum(p)])
    cq = np.concatenate([[0.0], np.cumsum(q)])
    k = np.searchsorted(p, cand, side="left")
    m = np.searchsorted(q, cand, side="right")
    h = (k * cand - cp[k]) + ((cq[-1] - cq[m]) - (len(q) - m) * cand)
    hmin = h.min()
    opt = cand[h <= hmin + 1e-12 * max(1.0, abs(hmin))]
    return 0.5 * (opt[0] + opt[-1])


def _solve(X: np.ndarray, y: np.ndarray, c: float, tol: float, max_epochs: int,
           rng: np.random.Generator):
    """Pairwise dual coordinate descent (SMO updates) with an unregularised bias.

    Each epoch visits every sample once in a shuffled order and pairs it with
    its maximally violating partner. After the epoch the primal point
    ``(w, b*)`` is formed with the exact optimal bias; the best primal point
    seen so far is kept, so the recorded objective never increases.
    """
    n = len(y)
    K = X @ X.T
    alpha = np.zeros(n)
    v = np.ones(n) * y          # -y * grad of the dual; grad starts at -1
    up = y > 0                  # alpha may move so that y*alpha grows
    low = y < 0
    best_w, best_b, best_obj = None, 0.0, np.inf
    history = []
    for _ in range(max_epochs):
        for i in rng.permutation(n):
            gap, pair = 0.0, None
            if up[i]:
                j = int(np.where(low, v, np.inf).argmin())
                if v[i] - v[j] > gap:
                    gap, pair = v[i] - v[j], (i, j)
            if low[i]:
                j = int(np.where(up, v, -np.inf).argmax())
                if v[j] - v[i] > gap:
                    gap, pair = v[j] - v[i], (j, i)
            if pair is None or gap <= tol:
                continue
            iu, jl = pair
            curv = max(K[iu, iu] + K[jl, jl] - 2.0 * K[iu, jl], 1e-12)
            room_u = c - alpha[iu] if y[iu] > 0 else alpha[iu]
            room_l = alpha[jl] if y[jl] > 0 else c - alpha[jl]
            t = min(gap / curv, room_u, room_l)
            alpha[iu] = min(c, max(0.0, alpha[iu] + y[iu] * t))
            alpha[jl] = min(c, max(0.0, alpha[jl] - y[jl] * t))
            if t == room_u:
                alpha[iu] = c if y[iu] > 0 else 0.0
            if t == room_l:
                alpha[jl] = 0.0 if y[jl] > 0 else c
            v -= t * (K[:, iu] - K[:, jl])
            for k in (iu, jl):
                up[k] = (y[k] > 0 and alpha[k] < c) or (y[k] < 0 and alpha[k] > 0)
                low[k] = (y[k] > 0 and alpha[k] > 0) or (y[k] < 0 and alpha[k] < c)

        w = X.T @ (alpha * y)
        scores = X @ w
        b = optimal_bias(scores, y)
        obj = 0.5 * float(w @ w) + c * _hinge_sum(y * (scores - b))
        if obj < best_obj:
            best_w, best_b, best_obj = w, b, obj
        history.append(best_obj)
        violation = (v[up].max() if up.any() else -np.inf) - \
                    (v[low].min() if low.any() else np.inf)
        if violation < tol:
            break
    return best_w, best_b, tuple(history)


def train_binary(samples, cfg: TrainConfig = TrainConfig(),
                 label_map: tuple[str, str] = GRADES) -> LinearModel:
    """Fit ``z = w . x~ - b`` so that ``label_map[0]`` samples land at z < 0."""
    scheme, X = _matrix(samples)
    y = _signs(samples, label_map)
    if (y > 0).all() or (y < 0).all():
        raise SingleClassTrainingSet(
            f"training set needs both {label_map[0]} and {label_map[1]} samples")
    shift = X.mean(axis=0)
    scale = np.maximum(X.std(axis=0), SCALE_FLOOR)
    Xs = (X - shift) / scale
    w, b, history = _solve(Xs, y, cfg.c, cfg.tolerance, cfg.max_epochs,
                           np.random.default_rng(cfg.seed))
    counts = Counter(s.label for s in samples)
    return LinearModel(scheme, w, b, shift, scale, label_map, cfg,
                       {lab: counts[lab] for lab in label_map}, history)


# --- multiclass ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MulticlassModel:
    classes: tuple[str, ...]
    pairwise: dict[tuple[str, str], LinearModel]
    scheme: FeatureScheme

    def __post_init__(self):
        k = len(self.classes)
        if k < 2:
            raise FewerThanTwoClasses("a multiclass model needs at least two classes")
        if len(self.pairwise) != k * (k - 1) // 2:
            raise ValueError("need one pairwise model per unordered class pair")
        if any(m.scheme != self.scheme for m in self.pairwise.values()):
            raise SchemeMismatch("pairwise models disagree on the feature scheme")


def train_multiclass(samples, cfg: TrainConfig = TrainConfig()) -> MulticlassModel:
    scheme, _ = _matrix(samples)
    classes = tuple(sorted({s.label for s in samples}))
    if len(classes) < 2:
        raise FewerThanTwoClasses(f"need at least two site labels, got {list(classes)}")
    pairwise = {}
    for (ia, a), (ib, b) in itertools.combinations(enumerate(classes), 2):
        subset = [s for s in samples if s.label in (a, b)]
        pair_cfg = TrainConfig(cfg.c, cfg.tolerance, cfg.max_epochs,
                               derive_seed(cfg.seed, ia, ib))
        pairwise[(a, b)] = train_binary(subset, pair_cfg, label_map=(a, b))
    return MulticlassModel(classes, pairwise, scheme)


def site_votes(model: MulticlassModel, x: FeatureVector) -> tuple[dict, dict]:
    if x.scheme != model.scheme:
        raise SchemeMismatch(f"model expects scheme {model.scheme}, got {x.scheme}")
    votes = dict.fromkeys(model.classes, 0)
    strength = dict.fromkeys(model.classes, 0.0)
    for pair_model in model.pairwise.values():
        z = decision_value(pair_model, x)
        winner = pair_model.label_map[0] if z < 0 else pair_model.label_map[1]
        votes[winner] += 1
        strength[winner] += abs(z)
    return votes, strength


def predict_site(model: MulticlassModel, x: FeatureVector) -> str:
    """Majority vote; ties go to the larger summed |z| of the winning votes, then class order."""
    votes, strength = site_votes(model, x)
    order = {c: k for k, c in enumerate(model.classes)}
    return max(model.classes, key=lambda c: (votes[c], strength[c], -order[c]))
