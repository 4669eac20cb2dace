"""Per-view evidence heads and the end-to-end training loop.

Each view gets a small MLP (one ReLU hidden layer, softplus output) that
emits non-negative evidence. Evidence becomes an opinion, opinions fuse
with Dempster's rule, and the fused opinion maps back to a Dirichlet whose
loss trains every head jointly. Backpropagation is written out by hand,
including the path through the fusion operator. Optimization is plain Adam
with bias correction; everything is deterministic given the seed.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .errors import DataError, DataFormatError, DimensionError
from .losses import anneal_coefficient, sample_loss_batch
from .rand import DEFAULT_SEED, STREAM_INIT, STREAM_SHUFFLE, stream
from .sl import DirichletParams, EvidenceVector, Opinion

CHECKPOINT_MAGIC = b"EVMV-MDL"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class HeadConfig:
    input_dim: int
    hidden_dim: int = 64
    num_classes: int = 2

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.num_classes) < 1:
            raise DimensionError("all head dimensions must be >= 1")


class EvidenceHead:
    """x -> softplus(W2 relu(W1 x + b1) + b2), a non-negative evidence vector."""

    def __init__(self, config, w1, b1, w2, b2):
        self.config = config
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        expected = [
            (config.hidden_dim, config.input_dim),
            (config.hidden_dim,),
            (config.num_classes, config.hidden_dim),
            (config.num_classes,),
        ]
        for arr, shape in zip(self.params(), expected):
            if arr.shape != shape or not np.all(np.isfinite(arr)):
                raise DimensionError(f"head parameter shape {arr.shape}, expected {shape}")

    @classmethod
    def initialized(cls, config, rng):
        def glorot(fan_out, fan_in):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_out, fan_in))

        return cls(
            config,
            glorot(config.hidden_dim, config.input_dim),
            np.zeros(config.hidden_dim),
            glorot(config.num_classes, config.hidden_dim),
            np.zeros(config.num_classes),
        )

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 12
    max_epochs: int = 15
    anneal_epochs: int = 10
    patience: int = 3
    seed: int = DEFAULT_SEED
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if min(self.batch_size, self.max_epochs, self.anneal_epochs, self.patience) < 1:
            raise ValueError("batch_size, max_epochs, anneal_epochs, patience must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


class ModelBundle:
    """One evidence head per view plus shared class count and train config."""

    def __init__(self, heads, view_names, num_classes, train_config):
        heads = list(heads)
        view_names = list(view_names)
        if not heads:
            raise DimensionError("a bundle needs at least one head")
        if len(heads) != len(view_names):
            raise DimensionError("one view name per head required")
        if any(h.config.num_classes != num_classes for h in heads):
            raise DimensionError("all heads must share the bundle's class count")
        self.heads = heads
        self.view_names = view_names
        self.num_classes = num_classes
        self.train_config = train_config

    @classmethod
    def initialized(cls, view_dims, view_names, num_classes, train_config, hidden_dim=64):
        rng = stream(train_config.seed, STREAM_INIT)
        heads = [
            EvidenceHead.initialized(HeadConfig(d, hidden_dim, num_classes), rng)
            for d in view_dims
        ]
        return cls(heads, view_names, num_classes, train_config)

    @property
    def num_views(self):
        return len(self.heads)

    def without_view(self, name):
        """Ablation helper: drop one view's head."""
        if name not in self.view_names:
            raise DataError(f"no view named {name!r} in bundle")
        if self.num_views < 2:
            raise DimensionError("cannot drop the only view")
        keep = [i for i, n in enumerate(self.view_names) if n != name]
        return ModelBundle(
            [self.heads[i] for i in keep],
            [self.view_names[i] for i in keep],
            self.num_classes,
            self.train_config,
        )

    def all_params(self):
        return [p for h in self.heads for p in h.params()]


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    predicted_class: int
    fused_probs: np.ndarray
    fused_uncertainty: float
    per_view_opinions: tuple
    final_conflict: float


@dataclass
class EpochStats:
    epoch: int
    lam: float
    train_loss: float
    val_loss: float


class _ForwardCache:
    """Everything the backward pass needs, batched over N samples."""

    __slots__ = (
        "views", "z1", "h", "z2", "e", "alpha_v", "s_v", "b_v", "u_v",
        "fold_b", "fold_u", "fold_kappa", "alpha_f", "s_f",
    )


def _forward_batch(bundle, views):
    if len(views) != bundle.num_views:
        raise DimensionError(f"{len(views)} feature blocks for {bundle.num_views} heads")
    k = bundle.num_classes
    cache = _ForwardCache()
    cache.views = views
    cache.z1, cache.h, cache.z2, cache.e = [], [], [], []
    cache.alpha_v, cache.s_v, cache.b_v, cache.u_v = [], [], [], []
    for head, x in zip(bundle.heads, views):
        if x.ndim != 2 or x.shape[1] != head.config.input_dim:
            raise DimensionError(
                f"features of shape {x.shape} for head expecting dim {head.config.input_dim}"
            )
        z1 = x @ head.w1.T + head.b1
        h = np.maximum(z1, 0.0)
        z2 = h @ head.w2.T + head.b2
        e = kernels.softplus(z2)
        alpha = e + 1.0
        s = alpha.sum(axis=1)
        cache.z1.append(z1)
        cache.h.append(h)
        cache.z2.append(z2)
        cache.e.append(e)
        cache.alpha_v.append(alpha)
        cache.s_v.append(s)
        cache.b_v.append(e / s[:, None])
        cache.u_v.append(k / s)
    # Left fold of Dempster combination; keep every intermediate state.
    cache.fold_b = [cache.b_v[0]]
    cache.fold_u = [cache.u_v[0]]
    cache.fold_kappa = []
    for v in range(1, bundle.num_views):
        b, u, kap = kernels.combine_pair_batch(
            cache.fold_b[-1], cache.fold_u[-1], cache.b_v[v], cache.u_v[v]
        )
        cache.fold_b.append(b)
        cache.fold_u.append(u)
        cache.fold_kappa.append(kap)
    s_f = k / cache.fold_u[-1]
    cache.alpha_f = cache.fold_b[-1] * s_f[:, None] + 1.0
    cache.s_f = s_f
    return cache


def _combine_backward(left_b, left_u, right_b, right_u, out_b, out_u, kappa, gb, gu):
    """Gradients of one Dempster combination step.

    Uses the identity that the output masses already carry the 1/(1-kappa)
    factor, so the quotient-rule terms reduce to projections onto them.
    """
    denom = (1.0 - kappa)[:, None]
    proj = ((gb * out_b).sum(axis=1) + gu * out_u)[:, None]
    s_left = left_b.sum(axis=1, keepdims=True)
    s_right = right_b.sum(axis=1, keepdims=True)
    g_left_b = ((right_b + right_u[:, None]) * gb + (s_right - right_b) * proj) / denom
    g_left_u = ((gb * right_b).sum(axis=1) + gu * right_u) / denom[:, 0]
    g_right_b = ((left_b + left_u[:, None]) * gb + (s_left - left_b) * proj) / denom
    g_right_u = ((gb * left_b).sum(axis=1) + gu * left_u) / denom[:, 0]
    return g_left_b, g_left_u, g_right_b, g_right_u


def _loss_and_grads_batch(bundle, views, y, lam):
    """Mean overall loss on a batch plus gradients for every head parameter."""
    cache = _forward_batch(bundle, views)
    n = y.shape[0]
    k = bundle.num_classes
    scale = 1.0 / n

    total_f, _, _, grad_f = sample_loss_batch(cache.alpha_f, y, lam)
    loss = total_f.sum()
    g_alpha_view = []
    for alpha in cache.alpha_v:
        total_v, _, _, grad_v = sample_loss_batch(alpha, y, lam)
        loss += total_v.sum()
        g_alpha_view.append(grad_v * scale)
    loss *= scale

    # Fused Dirichlet -> fused opinion: alpha_f = b * (K/u) + 1.
    g_alpha_f = grad_f * scale
    b_f = cache.fold_b[-1]
    u_f = cache.fold_u[-1]
    gb = g_alpha_f * cache.s_f[:, None]
    gu = -(cache.s_f / u_f) * (g_alpha_f * b_f).sum(axis=1)

    # Walk the fold right to left, peeling off one view per step.
    g_view_b = [None] * bundle.num_views
    g_view_u = [None] * bundle.num_views
    for v in range(bundle.num_views - 1, 0, -1):
        gb, gu, grb, gru = _combine_backward(
            cache.fold_b[v - 1], cache.fold_u[v - 1],
            cache.b_v[v], cache.u_v[v],
            cache.fold_b[v], cache.fold_u[v],
            cache.fold_kappa[v - 1], gb, gu,
        )
        g_view_b[v] = grb
        g_view_u[v] = gru
    g_view_b[0] = gb
    g_view_u[0] = gu

    grads = []
    for v, head in enumerate(bundle.heads):
        # Opinion -> evidence: b = e/S, u = K/S with S = sum(e) + K.
        s = cache.s_v[v][:, None]
        bb = cache.b_v[v]
        ge = g_view_b[v] / s - (
            (g_view_b[v] * bb).sum(axis=1) + g_view_u[v] * cache.u_v[v]
        )[:, None] / s
        ge += g_alpha_view[v]
        gz2 = ge * kernels.softplus_grad(cache.z2[v])
        gw2 = gz2.T @ cache.h[v]
        gb2 = gz2.sum(axis=0)
        gh = gz2 @ head.w2
        gz1 = gh * (cache.z1[v] > 0.0)
        gw1 = gz1.T @ cache.views[v]
        gb1 = gz1.sum(axis=0)
        grads.extend([gw1, gb1, gw2, gb2])
    return float(loss), grads, cache


def _loss_batch(bundle, views, y, lam):
    """Mean overall loss only (no gradients), for validation passes."""
    cache = _forward_batch(bundle, views)
    total_f, _, _, _ = sample_loss_batch(cache.alpha_f, y, lam)
    loss = total_f.sum()
    for alpha in cache.alpha_v:
        total_v, _, _, _ = sample_loss_batch(alpha, y, lam)
        loss += total_v.sum()
    return float(loss / y.shape[0])


def head_forward(head, features):
    """Evidence for a single feature vector."""
    x = np.asarray(features, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != head.config.input_dim:
        raise DimensionError(
            f"feature length {x.shape[1]} for head expecting {head.config.input_dim}"
        )
    z1 = x @ head.w1.T + head.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ head.w2.T + head.b2
    return EvidenceVector(kernels.softplus(z2)[0])


def forward_fused(bundle, sample, sample_id="sample"):
    """Fuse one sample's views; returns fused and per-view Dirichlets plus a record."""
    views = [np.asarray(x, dtype=np.float64).reshape(1, -1) for x in sample]
    cache = _forward_batch(bundle, views)
    fused = DirichletParams(cache.alpha_f[0])
    per_view = [DirichletParams(a[0]) for a in cache.alpha_v]
    record = _record_from_cache(bundle, cache, 0, sample_id)
    return fused, per_view, record


def _record_from_cache(bundle, cache, i, sample_id):
    alpha = cache.alpha_f[i]
    s = float(alpha.sum())
    probs = alpha / s
    opinions = tuple(
        Opinion(cache.b_v[v][i], float(cache.u_v[v][i]), bundle.num_classes)
        for v in range(bundle.num_views)
    )
    conflict = float(cache.fold_kappa[-1][i]) if cache.fold_kappa else 0.0
    return PredictionRecord(
        sample_id=sample_id,
        predicted_class=int(np.argmax(probs)),
        fused_probs=probs,
        fused_uncertainty=bundle.num_classes / s,
        per_view_opinions=opinions,
        final_conflict=conflict,
    )


def backward(bundle, sample, y, lam):
    """Parameter gradients of the overall loss for a single sample.

    Returns one [dW1, db1, dW2, db2] list per head.
    """
    views = [np.asarray(x, dtype=np.float64).reshape(1, -1) for x in sample]
    yv = np.asarray(y.one_hot if hasattr(y, "one_hot") else y, dtype=np.float64).reshape(1, -1)
    _, grads, _ = _loss_and_grads_batch(bundle, views, yv, lam)
    return [grads[4 * v : 4 * v + 4] for v in range(bundle.num_views)]


@dataclass
class AdamState:
    m: list
    v: list

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state, t, config):
    """In-place Adam update with bias correction; returns (params, state)."""
    if t < 1:
        raise ValueError("Adam step count t starts at 1")
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)
    return params, state


def _dataset_tensors(dataset, bundle):
    views = []
    for name, head in zip(bundle.view_names, bundle.heads):
        vm = dataset.view(name)
        if vm.dims != head.config.input_dim:
            raise DimensionError(
                f"view {name!r} has dim {vm.dims}, head expects {head.config.input_dim}"
            )
        views.append(np.asarray(vm.data, dtype=np.float64))
    if dataset.num_classes != bundle.num_classes:
        raise DimensionError(
            f"dataset has K={dataset.num_classes}, bundle has K={bundle.num_classes}"
        )
    y = np.zeros((len(dataset), bundle.num_classes))
    y[np.arange(len(dataset)), dataset.labels] = 1.0
    return views, y


def train(bundle, train_set, val_set, config=None):
    """Mini-batch Adam with per-epoch KL annealing and early stopping.

    The validation overall loss is monitored at the final KL weight
    (lambda = 1) so epochs stay comparable while the training weight ramps;
    training stops once it has failed to improve for `patience`
    consecutive epochs and the best-epoch parameters are restored.
    """
    config = config or bundle.train_config
    if len(train_set) == 0 or len(val_set) == 0:
        raise DataError("training and validation sets must be non-empty")
    views_tr, y_tr = _dataset_tensors(train_set, bundle)
    views_va, y_va = _dataset_tensors(val_set, bundle)
    n = len(train_set)

    params = bundle.all_params()
    state = AdamState.zeros_like(params)
    shuffle_rng = stream(config.seed, STREAM_SHUFFLE)

    history = []
    best_val = np.inf
    best_params = [p.copy() for p in params]
    bad_epochs = 0
    t = 0
    for epoch in range(config.max_epochs):
        lam = anneal_coefficient(epoch, config.anneal_epochs)
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            batch_views = [v[idx] for v in views_tr]
            loss, grads, _ = _loss_and_grads_batch(bundle, batch_views, y_tr[idx], lam)
            t += 1
            adam_step(params, grads, state, t, config)
            epoch_loss += loss * len(idx)
        train_loss = epoch_loss / n
        val_loss = _loss_batch(bundle, views_va, y_va, 1.0)
        history.append(EpochStats(epoch, lam, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_params = [p.copy() for p in params]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    for p, best in zip(params, best_params):
        p[...] = best
    return bundle, history


def predict_batch(bundle, dataset):
    """One PredictionRecord per sample, in dataset order."""
    views, _ = _dataset_tensors(dataset, bundle)
    cache = _forward_batch(bundle, views)
    return [
        _record_from_cache(bundle, cache, i, dataset.sample_ids[i])
        for i in range(len(dataset))
    ]


def save_bundle(bundle, path):
    """Binary checkpoint (magic, version, dims, float64 params) + JSON sidecar."""
    path = str(path)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<III", CHECKPOINT_VERSION, bundle.num_classes, bundle.num_views))
        for head in bundle.heads:
            f.write(struct.pack("<II", head.config.input_dim, head.config.hidden_dim))
        for head in bundle.heads:
            for p in head.params():
                f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    sidecar = {
        "format": CHECKPOINT_MAGIC.decode(),
        "version": CHECKPOINT_VERSION,
        "num_classes": bundle.num_classes,
        "view_names": bundle.view_names,
        "heads": [
            {"input_dim": h.config.input_dim, "hidden_dim": h.config.hidden_dim}
            for h in bundle.heads
        ],
        "train_config": {
            "learning_rate": bundle.train_config.learning_rate,
            "batch_size": bundle.train_config.batch_size,
            "max_epochs": bundle.train_config.max_epochs,
            "anneal_epochs": bundle.train_config.anneal_epochs,
            "patience": bundle.train_config.patience,
            "seed": bundle.train_config.seed,
            "adam_beta1": bundle.train_config.adam_beta1,
            "adam_beta2": bundle.train_config.adam_beta2,
            "adam_eps": bundle.train_config.adam_eps,
        },
    }
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_exact(f, n, path, what):
    data = f.read(n)
    if len(data) != n:
        raise DataFormatError(f"{path}: truncated checkpoint while reading {what}")
    return data


def load_bundle(path):
    path = str(path)
    try:
        sidecar_raw = open(path + ".json", "r", encoding="utf-8").read()
    except OSError as exc:
        raise DataError(f"missing checkpoint sidecar {path}.json: {exc}") from exc
    sidecar = json.loads(sidecar_raw)
    with open(path, "rb") as f:
        magic = _read_exact(f, 8, path, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}"
            )
        version, k, v = struct.unpack("<III", _read_exact(f, 12, path, "header"))
        if version != CHECKPOINT_VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        dims = [
            struct.unpack("<II", _read_exact(f, 8, path, "head dims")) for _ in range(v)
        ]
        heads = []
        for input_dim, hidden_dim in dims:
            config = HeadConfig(input_dim, hidden_dim, k)
            shapes = [
                (hidden_dim, input_dim),
                (hidden_dim,),
                (k, hidden_dim),
                (k,),
            ]
            arrays = []
            for shape in shapes:
                count = int(np.prod(shape))
                raw = _read_exact(f, count * 8, path, "parameters")
                arrays.append(np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
            heads.append(EvidenceHead(config, *arrays))
        if f.read(1):
            raise DataFormatError(f"{path}: trailing bytes after parameters")
    tc = sidecar["train_config"]
    train_config = TrainConfig(
        learning_rate=tc["learning_rate"],
        batch_size=tc["batch_size"],
        max_epochs=tc["max_epochs"],
        anneal_epochs=tc["anneal_epochs"],
        patience=tc["patience"],
        seed=tc["seed"],
        adam_beta1=tc["adam_beta1"],
        adam_beta2=tc["adam_beta2"],
        adam_eps=tc["adam_eps"],
    )
    return ModelBundle(heads, sidecar["view_names"], k, train_config)
