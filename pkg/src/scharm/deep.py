"""Site-conditioned adversarial autoencoders for connectome harmonization.

Two architectures share one five-part layout: an encoder producing a
site-invariant embedding, a site-classifier trained adversarially through a
gradient reversal layer, a site-mapper embedding the target-site one-hot
code, a latent-fusion stage (concatenation for the fully connected model,
AdaIN for the graph model), and a decoder reconstructing the connectome
conditioned on the fused representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import checkpoint
from .autodiff import (
    AdamState,
    Tensor,
    adam_step,
    concat,
    grad_reversal,
    sigmoid_bce,
    softmax,
    softmax_cross_entropy,
    weighted_mae_loss,
    zero_grads,
)
from .core import (
    CohortManifest,
    ConnectivityMatrix,
    SiteDescriptor,
    devectorize,
    edge_count,
    highest_quality_site,
    lowest_quality_site,
    substream,
    vectorize_upper,
)
from .errors import (
    DimensionMismatch,
    EmptyCohort,
    EmptyHistory,
    NonFiniteLoss,
    UnknownSite,
    ValidationError,
)
from .linear import round_half_away
from .metrics import normalized_laplacian
from .nn import AdaInConditioner, ChebConv, Dense, MLP, UnitNorm


@dataclass
class ArchitectureConfig:
    kind: str  # "fae" | "gae"
    n_nodes: int
    n_sites: int
    embedding_dim: int = 64
    encoder_widths: list[int] = field(default_factory=lambda: [512, 128])
    decoder_widths: list[int] = field(default_factory=lambda: [128, 512])
    classifier_widths: list[int] = field(default_factory=lambda: [64])
    mapper_widths: list[int] = field(default_factory=lambda: [32])
    cheb_order: int = 3
    cheb_layers: int = 2
    gae_hidden: int = 64
    norm: str = "batch"  # FAE hidden normalization
    edge_loss_weight: float = 2.5
    bce_enabled: bool = False

    def __post_init__(self):
        if self.kind not in ("fae", "gae"):
            raise ValidationError(f"unknown architecture kind {self.kind!r}")
        widths = self.encoder_widths + self.decoder_widths + self.classifier_widths + self.mapper_widths
        if any(w <= 0 for w in widths) or self.embedding_dim <= 0:
            raise ValidationError("layer widths must be positive")

    @classmethod
    def fae_default(cls, n_nodes: int, n_sites: int) -> "ArchitectureConfig":
        # one wide hidden layer converges much faster than a deep funnel at
        # desk scale, which matters within a fixed 200-epoch budget
        return cls(kind="fae", n_nodes=n_nodes, n_sites=n_sites, embedding_dim=64,
                   encoder_widths=[1024], decoder_widths=[1024], bce_enabled=False)

    @classmethod
    def gae_default(cls, n_nodes: int, n_sites: int) -> "ArchitectureConfig":
        return cls(
            kind="gae",
            n_nodes=n_nodes,
            n_sites=n_sites,
            embedding_dim=32,
            cheb_order=3,
            cheb_layers=2,
            gae_hidden=64,
            bce_enabled=True,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ArchitectureConfig":
        return cls(**payload)


@dataclass
class EpochRecord:
    epoch: int
    total_loss: float
    mae_loss: float
    ce_loss: float
    bce_loss: float
    lam: float
    val_mae: float
    val_fa: float
    lr_encdec: float
    lr_aux: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"records": [asdict(r) for r in self.records]}

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainingHistory":
        return cls(records=[EpochRecord(**r) for r in payload["records"]])


def lambda_schedule(epoch: int, warmup_epochs: int = 100, gamma: float = 10.0) -> float:
    """Adversarial weight ramp: 2 / (1 + exp(-gamma * p)) - 1 with progress
    p = min(epoch / warmup_epochs, 1); zero at epoch 0, ~1 after warmup."""
    if epoch < 0 or warmup_epochs < 1:
        raise ValidationError("epoch must be >= 0 and warmup_epochs >= 1")
    p = min(epoch / warmup_epochs, 1.0)
    return 2.0 / (1.0 + np.exp(-gamma * p)) - 1.0


class HarmonizerModel:
    """Parameter container for one architecture plus encode/decode plumbing."""

    def __init__(self, config: ArchitectureConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = substream(seed, "init", config.kind)
        c = config
        k = c.embedding_dim
        if c.kind == "fae":
            d = edge_count(c.n_nodes)
            self.encoder = MLP(rng, [d] + c.encoder_widths + [k], norm=c.norm)
            # sphere-normalized embedding keeps the adversarial game bounded
            self.embed_norm = UnitNorm()
            self.decoder = MLP(rng, [2 * k] + c.decoder_widths + [d], norm=c.norm)
            self.conditioners = []
        else:
            self.enc_convs = [
                ChebConv(rng, c.n_nodes, c.gae_hidden, c.cheb_order, norm="layer", act="relu"),
                ChebConv(rng, c.gae_hidden, k, c.cheb_order, norm="none", act="none"),
            ]
            # decoder: per-node dense, two ChebConv blocks, per-node linear head;
            # every block is followed by its own AdaIN conditioner on f_M
            self.dec_dense = Dense(rng, k, c.gae_hidden, norm="none", act="none")
            self.dec_convs = [
                ChebConv(rng, c.gae_hidden, c.gae_hidden, c.cheb_order, norm="none", act="none"),
                ChebConv(rng, c.gae_hidden, k, c.cheb_order, norm="none", act="none"),
            ]
            self.head = Dense(rng, k, c.n_nodes, norm="none", act="none")
            self.conditioners = [
                AdaInConditioner(rng, k, c.gae_hidden),
                AdaInConditioner(rng, k, c.gae_hidden),
                AdaInConditioner(rng, k, k),
            ]
        cls_in = k if c.kind == "fae" else 2 * k
        # sphere-normalized classifier input keeps the adversarial game bounded
        self.pool_norm = UnitNorm()
        self.classifier = MLP(rng, [cls_in] + c.classifier_widths + [c.n_sites])
        self.mapper = MLP(rng, [c.n_sites] + c.mapper_widths + [k])
        self.epoch = 0

    # -- parameter bookkeeping ------------------------------------------------

    def _module_map(self) -> dict[str, object]:
        if self.config.kind == "fae":
            mods = {"encoder": self.encoder, "decoder": self.decoder}
        else:
            mods = {"enc_conv0": self.enc_convs[0], "enc_conv1": self.enc_convs[1],
                    "dec_dense": self.dec_dense, "dec_conv0": self.dec_convs[0],
                    "dec_conv1": self.dec_convs[1], "head": self.head}
            for i, cond in enumerate(self.conditioners):
                mods[f"fusion{i}"] = cond
        mods["classifier"] = self.classifier
        mods["mapper"] = self.mapper
        return mods

    def named_parameters(self) -> dict[str, Tensor]:
        named = {}
        for name, mod in self._module_map().items():
            named.update(mod.named_parameters(prefix=f"{name}."))
        return named

    def encdec_parameters(self) -> list[Tensor]:
        """Encoder, decoder and latent-fusion parameters (main learning-rate group)."""
        aux = set(map(id, self.aux_parameters()))
        return [p for p in self.named_parameters().values() if id(p) not in aux]

    def aux_parameters(self) -> list[Tensor]:
        """Site-classifier and site-mapper parameters (auxiliary group)."""
        return self.classifier.parameters() + self.mapper.parameters()

    def _buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, mod in self._module_map().items():
            layers = getattr(mod, "layers", [])
            for i, layer in enumerate(layers):
                norm = getattr(layer, "norm", None)
                if norm is not None and hasattr(norm, "running_mean"):
                    out[f"{name}.{i}.running_mean"] = norm.running_mean
                    out[f"{name}.{i}.running_var"] = norm.running_var
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {name: p.data for name, p in self.named_parameters().items()}
        arrays.update(self._buffers())
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        buffers = self._buffers()
        for name, arr in arrays.items():
            if name in params:
                if params[name].data.shape != arr.shape:
                    raise DimensionMismatch(f"{name}: {arr.shape} vs {params[name].data.shape}")
                params[name].data[...] = arr
            elif name in buffers:
                buffers[name][...] = arr
            else:
                raise ValidationError(f"unknown tensor {name!r} in checkpoint")

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state_arrays().items()}

    # -- preprocessing ---------------------------------------------------------

    def _fae_input(self, matrices: list[ConnectivityMatrix]) -> np.ndarray:
        return np.log1p(np.stack([vectorize_upper(m).values for m in matrices]))

    def _gae_laplacians(self, matrices: list[ConnectivityMatrix]) -> np.ndarray:
        # rescaled with lambda_max fixed at 2: L~ = L - I, spectrum in [-1, 1]
        return np.stack([normalized_laplacian(m) - np.eye(m.n) for m in matrices])

    def _one_hot(self, site_indices: np.ndarray) -> np.ndarray:
        eye = np.eye(self.config.n_sites)
        return eye[np.asarray(site_indices, dtype=int)]

    # -- forward passes ---------------------------------------------------------

    def encode_batch(self, matrices: list[ConnectivityMatrix], training: bool = False):
        """Returns (embedding Tensor, laplacian batch or None)."""
        for m in matrices:
            if m.n != self.config.n_nodes:
                raise DimensionMismatch(f"matrix has {m.n} nodes, model expects {self.config.n_nodes}")
        if self.config.kind == "fae":
            x = Tensor(self._fae_input(matrices))
            return self.embed_norm(self.encoder(x, training=training), training=training), None
        laps = self._gae_laplacians(matrices)
        x = Tensor(np.broadcast_to(np.eye(self.config.n_nodes), laps.shape).copy())
        h = x
        for conv in self.enc_convs:
            h = conv(h, Tensor(laps), training=training)
        return h, laps

    def classify_logits(self, f_e: Tensor, lam: float = 0.0, training: bool = False) -> Tensor:
        rev = grad_reversal(f_e, lam)
        if self.config.kind == "gae":
            pooled = self.pool_norm(concat([rev.mean(axis=1), rev.max(axis=1)], axis=1))
        else:
            pooled = rev
        return self.classifier(pooled, training=training)

    def classify_site(self, f_e: Tensor) -> np.ndarray:
        """Softmax site probabilities for an embedding batch."""
        return softmax(self.classify_logits(f_e, lam=0.0, training=False).data)

    def decode_batch(self, f_e: Tensor, site_indices: np.ndarray, laps: np.ndarray | None,
                     training: bool = False) -> Tensor:
        """Raw (pre-rounding) reconstruction: (B, D) for FAE, (B, N, N) for GAE."""
        onehot = Tensor(self._one_hot(site_indices))
        f_m = self.mapper(onehot, training=training)
        if self.config.kind == "fae":
            fused = concat([f_e, f_m], axis=1)
            return self.decoder(fused, training=training)
        h = self.dec_dense(f_e, training=training)
        h = self.conditioners[0](h, f_m, training=training).relu()
        lap_t = Tensor(laps)
        h = self.dec_convs[0](h, lap_t, training=training)
        h = self.conditioners[1](h, f_m, training=training).relu()
        h = self.dec_convs[1](h, lap_t, training=training)
        h = self.conditioners[2](h, f_m, training=training).relu()
        z = self.head(h, training=training)  # (B, N, N)
        sym = (z + z.transpose(0, 2, 1)) * 0.5
        mask = 1.0 - np.eye(self.config.n_nodes)
        return sym * Tensor(mask[None, :, :])

    # -- public single-matrix API ------------------------------------------------

    def encode(self, m: ConnectivityMatrix) -> np.ndarray:
        f_e, _ = self.encode_batch([m], training=False)
        return f_e.data[0].copy()

    def decode(self, f_e: np.ndarray, target_site: SiteDescriptor,
               source_matrix: ConnectivityMatrix | None = None) -> ConnectivityMatrix:
        if target_site.site_index >= self.config.n_sites:
            raise UnknownSite(f"site index {target_site.site_index} >= {self.config.n_sites}")
        laps = None
        if self.config.kind == "gae":
            if source_matrix is None:
                raise ValidationError("GAE decoding needs the source matrix for its graph support")
            laps = self._gae_laplacians([source_matrix])
        raw = self.decode_batch(Tensor(f_e[None, ...]), np.array([target_site.site_index]), laps,
                                training=False).data[0]
        return self._postprocess(raw)

    def _postprocess(self, raw: np.ndarray) -> ConnectivityMatrix:
        if self.config.kind == "fae":
            return devectorize(round_half_away(np.maximum(raw, 0.0)), self.config.n_nodes)
        sym = (raw + raw.T) / 2.0
        np.fill_diagonal(sym, 0.0)
        return ConnectivityMatrix(round_half_away(np.maximum(sym, 0.0)))

    def harmonize(self, m: ConnectivityMatrix, target_site: SiteDescriptor) -> ConnectivityMatrix:
        return self.decode(self.encode(m), target_site, source_matrix=m)

    def harmonize_many(self, matrices: list[ConnectivityMatrix],
                       target_site: SiteDescriptor) -> list[ConnectivityMatrix]:
        if not matrices:
            return []
        f_e, laps = self.encode_batch(matrices, training=False)
        idx = np.full(len(matrices), target_site.site_index)
        raw = self.decode_batch(f_e, idx, laps, training=False).data
        return [self._postprocess(r) for r in raw]

    # -- persistence ----------------------------------------------------------

    def save(self, path, history: TrainingHistory | None = None) -> None:
        checkpoint.save_tensors(self.state_arrays(), path)
        sidecar = {
            "config": self.config.to_dict(),
            "seed": self.seed,
            "epoch": self.epoch,
            "history": history.to_dict() if history is not None else None,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=1)

    @classmethod
    def load(cls, path) -> tuple["HarmonizerModel", TrainingHistory | None]:
        with open(str(path) + ".json") as fh:
            sidecar = json.load(fh)
        model = cls(ArchitectureConfig.from_dict(sidecar["config"]), seed=sidecar.get("seed", 0))
        model.epoch = sidecar.get("epoch", 0)
        model.load_state_arrays(checkpoint.load_tensors(path))
        history = TrainingHistory.from_dict(sidecar["history"]) if sidecar.get("history") else None
        return model, history


@dataclass
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 32
    lr_encdec: float = 1e-2
    lr_aux: float = 1e-3
    plateau_factor: float = 0.9
    plateau_patience: int = 5
    plateau_threshold: float = 1e-5
    warmup_epochs: int = 100
    grl_gamma: float = 10.0
    seed: int = 0
    restore_best: bool = True


def _upper_vectors(matrices: list[ConnectivityMatrix]) -> np.ndarray:
    return np.stack([vectorize_upper(m).values for m in matrices])


def _val_mae_fa(harmonized: list[ConnectivityMatrix],
                targets: list[ConnectivityMatrix]) -> tuple[float, float]:
    hv = _upper_vectors(harmonized)
    tv = _upper_vectors(targets)
    pair = np.abs(hv[:, None, :] - tv[None, :, :]).mean(axis=2)
    mae = float(np.diagonal(pair).mean())
    n = pair.shape[0]
    hits = 0
    for i in range(n):
        row = pair[i]
        if row[i] < np.min(np.delete(row, i)):
            hits += 1
    fa = hits / n if n else 0.0
    return mae, fa


def train(model: HarmonizerModel, cohort: CohortManifest,
          hyper: TrainingConfig | None = None) -> tuple[HarmonizerModel, TrainingHistory]:
    """Adversarial self-reconstruction training with per-epoch validation.

    Each sample is reconstructed conditioned on its own site; the classifier
    sees the embedding through the gradient reversal layer. Validation
    harmonizes the lowest-quality-site matrices to the highest-quality site
    and scores edge MAE and fingerprinting accuracy against the observed
    highest-quality matrices.
    """
    hyper = hyper or TrainingConfig()
    cfg = model.config
    train_records = cohort.records(split="train")
    if not train_records:
        raise EmptyCohort("no training subjects")
    if hyper.batch_size > len(train_records):
        raise ValidationError("batch size exceeds training set size")

    matrices = [r.matrix for r in train_records]
    site_idx = np.array([r.site.site_index for r in train_records])
    if cfg.kind == "fae":
        targets = _upper_vectors(matrices)
    else:
        targets = np.stack([m.values.astype(np.float64) for m in matrices])
    bce_targets = (targets > 0).astype(np.float64) if cfg.bce_enabled else None

    low = lowest_quality_site(cohort.sites)
    high = highest_quality_site(cohort.sites)
    val_low = sorted(cohort.records(split="val", site_index=low.site_index), key=lambda r: r.subject_id)
    val_high = {r.subject_id: r.matrix
                for r in cohort.records(split="val", site_index=high.site_index)}
    val_pairs = [(r.matrix, val_high[r.subject_id]) for r in val_low if r.subject_id in val_high]

    opt_encdec = AdamState(model.encdec_parameters())
    opt_aux = AdamState(model.aux_parameters())
    lr_encdec, lr_aux = hyper.lr_encdec, hyper.lr_aux
    best_loss = np.inf
    stall = 0
    history = TrainingHistory()
    best_score = np.inf
    best_state = None

    baseline_mae = None
    if val_pairs:
        baseline_mae, _ = _val_mae_fa([p[0] for p in val_pairs], [p[1] for p in val_pairs])

    n = len(train_records)
    for epoch in range(hyper.epochs):
        lam = lambda_schedule(epoch, hyper.warmup_epochs, hyper.grl_gamma)
        order = substream(hyper.seed, "shuffle", epoch).permutation(n)
        sums = {"total": 0.0, "mae": 0.0, "ce": 0.0, "bce": 0.0}
        seen = 0
        for b_start in range(0, n, hyper.batch_size):
            batch = order[b_start : b_start + hyper.batch_size]
            batch_mats = [matrices[i] for i in batch]
            f_e, laps = model.encode_batch(batch_mats, training=True)
            logits = model.classify_logits(f_e, lam=lam, training=True)
            recon = model.decode_batch(f_e, site_idx[batch], laps, training=True)
            l_mae = weighted_mae_loss(recon, targets[batch], cfg.edge_loss_weight)
            l_ce = softmax_cross_entropy(logits, model._one_hot(site_idx[batch]))
            total = l_mae + l_ce
            l_bce_val = 0.0
            if cfg.bce_enabled:
                l_bce = sigmoid_bce(recon, bce_targets[batch])
                total = total + l_bce
                l_bce_val = float(l_bce.data)
            if not np.isfinite(total.data):
                raise NonFiniteLoss(epoch, b_start // hyper.batch_size)
            zero_grads(opt_encdec.params)
            zero_grads(opt_aux.params)
            total.backward()
            adam_step(opt_encdec, lr_encdec)
            adam_step(opt_aux, lr_aux)
            w = len(batch)
            sums["total"] += float(total.data) * w
            sums["mae"] += float(l_mae.data) * w
            sums["ce"] += float(l_ce.data) * w
            sums["bce"] += l_bce_val * w
            seen += w
        epoch_loss = sums["total"] / seen

        val_mae, val_fa = np.nan, np.nan
        if val_pairs:
            harmonized = model.harmonize_many([p[0] for p in val_pairs], high)
            val_mae, val_fa = _val_mae_fa(harmonized, [p[1] for p in val_pairs])
            score = val_mae / baseline_mae - val_fa
            if hyper.restore_best and score < best_score:
                best_score = score
                best_state = model.snapshot()

        history.records.append(
            EpochRecord(
                epoch=epoch,
                total_loss=epoch_loss,
                mae_loss=sums["mae"] / seen,
                ce_loss=sums["ce"] / seen,
                bce_loss=sums["bce"] / seen,
                lam=lam,
                val_mae=float(val_mae),
                val_fa=float(val_fa),
                lr_encdec=lr_encdec,
                lr_aux=lr_aux,
            )
        )

        # plateau scheduler on the training total loss
        if epoch_loss < best_loss - hyper.plateau_threshold:
            best_loss = epoch_loss
            stall = 0
        else:
            stall += 1
            if stall >= hyper.plateau_patience:
                lr_encdec *= hyper.plateau_factor
                lr_aux *= hyper.plateau_factor
                stall = 0
        model.epoch = epoch + 1

    if hyper.restore_best and best_state is not None:
        model.load_state_arrays(best_state)
    return model, history


def select_best_epoch(history: TrainingHistory, baseline_mae: float) -> int:
    """Epoch minimizing (val MAE / baseline MAE) - val FA; earliest tie wins."""
    if not history.records:
        raise EmptyHistory("history has no epochs")
    if baseline_mae <= 0:
        raise ValidationError("baseline_mae must be > 0")
    scores = [r.val_mae / baseline_mae - r.val_fa for r in history.records]
    return int(np.argmin(scores))


def export_embeddings(model: HarmonizerModel, cohort: CohortManifest,
                      include_full: bool = False) -> str:
    """CSV dump of encoder embeddings, one row per (subject, site) record.

    GAE embeddings are mean-pooled over nodes to K values; include_full
    appends the flattened N x K embedding as extra columns.
    """
    k = model.config.embedding_dim
    header = ["subject_id", "site_index"] + [f"e{i}" for i in range(k)]
    if include_full and model.config.kind == "gae":
        header += [f"full{i}" for i in range(model.config.n_nodes * k)]
    lines = [",".join(header)]
    for rec in cohort.subjects:
        emb = model.encode(rec.matrix)
        pooled = emb.mean(axis=0) if emb.ndim == 2 else emb
        row = [rec.subject_id, str(rec.site.site_index)] + [f"{v:.10g}" for v in pooled]
        if include_full and model.config.kind == "gae":
            row += [f"{v:.10g}" for v in emb.reshape(-1)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
