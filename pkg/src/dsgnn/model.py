"""The property-prediction network and its training loop.

Pipeline per crystal: build the dual-scale graph, expand distances/angles
in their bases, embed atoms (atomic number + group, each one-hot through
its own perceptron), embed edges (angle branch Hadamard radial branch,
then a fusing perceptron), run a stack of gated message-passing blocks
with residual + layer norm, mean-pool the atoms, and regress a scalar.

With ``use_angles=False`` the edge embedding uses the radial branch alone,
so predictions are invariant to any perturbation of the angle sets.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .crystal import Crystal, PropertyRecord
from .elements import MAX_Z
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DivergedError,
    NonFiniteTensorError,
)
from .featurize import BasisConfig, FeaturizedGraph, featurize_graph
from .graph import CrystalGraph, CutoffConfig, build_graph
from .nn import MLP, OptimConfig, Parameter, adam_step, mae, mse_loss

NUM_GROUPS = 18


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 128
    num_blocks: int = 4
    basis: BasisConfig = field(default_factory=BasisConfig)
    cutoffs: CutoffConfig = field(default_factory=CutoffConfig.paper_mode)
    use_angles: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if abs(self.basis.edge_cutoff - self.cutoffs.edge_cutoff) > 1e-12:
            raise ConfigError(
                f"basis edge cutoff {self.basis.edge_cutoff} differs from "
                f"graph edge cutoff {self.cutoffs.edge_cutoff}"
            )

    def to_dict(self) -> dict:
        return {
            "hidden_dim": self.hidden_dim,
            "num_blocks": self.num_blocks,
            "n_rbf": self.basis.n_rbf,
            "n_sbf": self.basis.n_sbf,
            "angle_reduction": self.basis.angle_reduction,
            "edge_cutoff": self.cutoffs.edge_cutoff,
            "angle_cutoff": self.cutoffs.angle_cutoff,
            "max_neighbors": self.cutoffs.max_neighbors,
            "use_angles": self.use_angles,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            hidden_dim=int(d.get("hidden_dim", 128)),
            num_blocks=int(d.get("num_blocks", 4)),
            basis=BasisConfig(
                n_rbf=int(d.get("n_rbf", 8)),
                n_sbf=int(d.get("n_sbf", 8)),
                edge_cutoff=float(d.get("edge_cutoff", 8.0)),
                angle_reduction=d.get("angle_reduction", "mean"),
            ),
            cutoffs=CutoffConfig(
                edge_cutoff=float(d.get("edge_cutoff", 8.0)),
                angle_cutoff=float(d.get("angle_cutoff", 8.0**0.5)),
                max_neighbors=d.get("max_neighbors"),
            ),
            use_angles=bool(d.get("use_angles", True)),
            seed=int(d.get("seed", 0)),
        )

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


class InteractionBlock:
    """Parameters of one message-passing layer."""

    def __init__(self, index: int, hidden: int, rng: np.random.Generator):
        self.mlp_message = MLP(f"block{index}.message", [3 * hidden, hidden, hidden], rng)
        self.ln_gain = Parameter(f"block{index}.ln_gain", np.ones(hidden))
        self.ln_shift = Parameter(f"block{index}.ln_shift", np.zeros(hidden))

    def parameters(self) -> list[Parameter]:
        return self.mlp_message.parameters() + [self.ln_gain, self.ln_shift]


class ModelState:
    """All trainable parameters, keyed by stable names."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        h = config.hidden_dim
        self.config = config
        self.mlp_atom_number = MLP("atom_number", [MAX_Z, h, h], rng)
        self.mlp_atom_group = MLP("atom_group", [NUM_GROUPS, h, h], rng)
        self.mlp_node = MLP("node", [2 * h, h, h], rng)
        self.mlp_angle_branch = MLP("angle_branch", [2 * config.basis.n_sbf, h, h], rng)
        self.mlp_radial_branch = MLP("radial_branch", [config.basis.n_rbf, h, h], rng)
        self.mlp_structure = MLP("structure", [h, h, h], rng)
        self.blocks = [InteractionBlock(i, h, rng) for i in range(config.num_blocks)]
        self.mlp_readout = MLP("readout", [h, h, 1], rng)

    @classmethod
    def initialize(cls, config: ModelConfig) -> "ModelState":
        return cls(config, np.random.default_rng(config.seed))

    def parameters(self) -> list[Parameter]:
        params = (
            self.mlp_atom_number.parameters()
            + self.mlp_atom_group.parameters()
            + self.mlp_node.parameters()
            + self.mlp_angle_branch.parameters()
            + self.mlp_radial_branch.parameters()
            + self.mlp_structure.parameters()
        )
        for block in self.blocks:
            params += block.parameters()
        return params + self.mlp_readout.parameters()

    def parameter_groups(self) -> dict[str, list[Parameter]]:
        groups = {
            "atom_number": self.mlp_atom_number.parameters(),
            "atom_group": self.mlp_atom_group.parameters(),
            "node": self.mlp_node.parameters(),
            "angle_branch": self.mlp_angle_branch.parameters(),
            "radial_branch": self.mlp_radial_branch.parameters(),
            "structure": self.mlp_structure.parameters(),
            "readout": self.mlp_readout.parameters(),
        }
        for i, block in enumerate(self.blocks):
            groups[f"block{i}"] = block.parameters()
        return groups

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_arrays(self, include_optimizer: bool = True) -> dict[str, np.ndarray]:
        arrays = {}
        for p in self.parameters():
            arrays[p.name] = p.data.copy()
            if include_optimizer:
                arrays[p.name + ".adam_m"] = p.adam_m.copy()
                arrays[p.name + ".adam_v"] = p.adam_v.copy()
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray], adam_step_count: int = 0) -> None:
        for p in self.parameters():
            if p.name not in arrays:
                raise CheckpointError(f"checkpoint is missing tensor {p.name!r}")
            p.data = arrays[p.name]
            if p.name + ".adam_m" in arrays:
                p.adam_m = arrays[p.name + ".adam_m"].copy()
                p.adam_v = arrays[p.name + ".adam_v"].copy()
            p.step_count = adam_step_count


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def _one_hot(indices: np.ndarray, depth: int) -> np.ndarray:
    out = np.zeros((indices.size, depth))
    out[np.arange(indices.size), indices] = 1.0
    return out


def node_embed(state: ModelState, atom_pairs: np.ndarray) -> Tensor:
    """Initial per-atom states from (atomic number, group) one-hots."""
    numbers = _one_hot(atom_pairs[:, 0] - 1, MAX_Z)
    groups = _one_hot(atom_pairs[:, 1] - 1, NUM_GROUPS)
    a_n = state.mlp_atom_number(Tensor(numbers))
    a_g = state.mlp_atom_group(Tensor(groups))
    return state.mlp_node(ad.concat([a_n, a_g], axis=1))


def structure_embed(state: ModelState, feat: FeaturizedGraph,
                    use_angles: bool | None = None) -> Tensor:
    """Per-edge embeddings; the angle branch gates the radial branch
    elementwise unless angles are disabled."""
    if use_angles is None:
        use_angles = state.config.use_angles
    radial = state.mlp_radial_branch(Tensor(feat.edge_rbf))
    if use_angles:
        angular = state.mlp_angle_branch(Tensor(feat.edge_sbf))
        fused = ad.mul(angular, radial)
    else:
        fused = radial
    return state.mlp_structure(fused)


def interaction_block(block: InteractionBlock, h: Tensor, s: Tensor,
                      src: np.ndarray, dst: np.ndarray, num_atoms: int) -> Tensor:
    """Gated edge messages summed onto each source atom, then
    residual + layer norm + ReLU."""
    h_src = ad.gather_rows(h, src)
    h_dst = ad.gather_rows(h, dst)
    e = block.mlp_message(ad.concat([h_src, h_dst, s], axis=1))
    gated = ad.mul(ad.sigmoid(e), e)
    t = ad.segment_sum(gated, src, num_atoms)
    normed = ad.layer_norm(t, block.ln_gain.tensor, block.ln_shift.tensor)
    return ad.relu(ad.add(h, normed))


def readout(state: ModelState, h: Tensor) -> Tensor:
    """Mean-pool atom states (order-canonical) and regress; shape (1,)."""
    pooled = ad.sorted_mean_rows(h)
    return ad.reshape(state.mlp_readout(pooled), (1,))


def forward(state: ModelState, feat: FeaturizedGraph) -> Tensor:
    h = node_embed(state, feat.atom_pairs)
    s = structure_embed(state, feat)
    for block in state.blocks:
        h = interaction_block(block, h, s, feat.src, feat.dst, feat.num_atoms)
    return readout(state, h)


def prepare_features(crystal: Crystal, config: ModelConfig) -> FeaturizedGraph:
    graph = build_graph(crystal, config.cutoffs, include_angles=config.use_angles)
    return featurize_graph(graph, config.basis)


def predict(crystal: Crystal, state: ModelState) -> float:
    return float(forward(state, prepare_features(crystal, state.config)).data[0])


def predict_graph(graph: CrystalGraph, state: ModelState) -> float:
    """Prediction from a prebuilt graph (featurize + forward)."""
    feat = featurize_graph(graph, state.config.basis)
    return float(forward(state, feat).data[0])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainReport:
    """Per-epoch metrics plus the run outcome.

    ``epoch_seconds`` is measured wall-clock and therefore varies run to
    run; everything else is a deterministic function of data, config and
    seed. ``deterministic_dict`` exposes exactly that reproducible part.
    """

    train_mae: list[float] = field(default_factory=list)
    train_mse: list[float] = field(default_factory=list)
    valid_mae: list[float] = field(default_factory=list)
    valid_mse: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = 0
    final_test_mae: float | None = None
    num_parameters: int = 0
    epochs_run: int = 0

    def deterministic_dict(self) -> dict:
        return {
            "train_mae": self.train_mae,
            "train_mse": self.train_mse,
            "valid_mae": self.valid_mae,
            "valid_mse": self.valid_mse,
            "best_epoch": self.best_epoch,
            "final_test_mae": self.final_test_mae,
            "num_parameters": self.num_parameters,
            "epochs_run": self.epochs_run,
        }

    def to_dict(self) -> dict:
        out = self.deterministic_dict()
        out["epoch_seconds"] = self.epoch_seconds
        return out

    def csv_rows(self) -> list[dict]:
        rows = []
        for i in range(len(self.train_mae)):
            rows.append({
                "epoch": i + 1,
                "train_mae": self.train_mae[i],
                "train_mse": self.train_mse[i],
                "valid_mae": self.valid_mae[i] if i < len(self.valid_mae) else "",
                "valid_mse": self.valid_mse[i] if i < len(self.valid_mse) else "",
                "seconds": self.epoch_seconds[i],
            })
        return rows


def _evaluate(state: ModelState, feats: list[FeaturizedGraph],
              targets: np.ndarray) -> tuple[float, float]:
    preds = np.array([float(forward(state, f).data[0]) for f in feats])
    return mae(preds, targets), float(np.mean((preds - targets) ** 2))


def train(
    dataset: list[PropertyRecord],
    model_config: ModelConfig,
    optim_config: OptimConfig,
    valid: list[PropertyRecord] | None = None,
    test: list[PropertyRecord] | None = None,
    log=None,
    start_epoch: int = 0,
    state: ModelState | None = None,
) -> tuple[ModelState, TrainReport]:
    """Run the full training loop; returns the best-checkpoint state.

    Without an explicit validation set, a 90/10 split is derived by a
    seeded shuffle (skipped for datasets smaller than 5 records). Raises
    DivergedError if any forward pass stops being finite.
    """
    if not dataset:
        raise DataError("empty training dataset")

    rng = np.random.default_rng(optim_config.seed)
    if valid is None:
        if len(dataset) >= 5:
            order = rng.permutation(len(dataset))
            n_valid = max(1, len(dataset) // 10)
            valid = [dataset[i] for i in order[:n_valid]]
            dataset = [dataset[i] for i in order[n_valid:]]
        else:
            valid = []

    if state is None:
        state = ModelState.initialize(model_config)

    train_feats = [prepare_features(r.crystal, model_config) for r in dataset]
    train_targets = np.array([r.target for r in dataset])
    valid_feats = [prepare_features(r.crystal, model_config) for r in valid]
    valid_targets = np.array([r.target for r in valid])

    n = len(dataset)
    batch = min(optim_config.batch_size, n)
    batches_per_epoch = (n + batch - 1) // batch
    total_steps = optim_config.epochs * batches_per_epoch

    report = TrainReport(num_parameters=state.num_parameters())
    params = state.parameters()
    best_metric = np.inf
    best_arrays: dict[str, np.ndarray] | None = None
    step = start_epoch * batches_per_epoch

    for epoch in range(start_epoch, optim_config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        abs_err_sum = 0.0
        sq_err_sum = 0.0
        try:
            for b0 in range(0, n, batch):
                idx = order[b0:b0 + batch]
                state.zero_grad()
                preds = ad.concat([forward(state, train_feats[i]) for i in idx], axis=0)
                targets = Tensor(train_targets[idx])
                loss = mse_loss(preds, targets)
                ad.backward(loss)
                step += 1
                adam_step(params, optim_config, step, total_steps)
                err = preds.data - train_targets[idx]
                abs_err_sum += float(np.abs(err).sum())
                sq_err_sum += float((err**2).sum())
        except NonFiniteTensorError as exc:
            raise DivergedError(f"training diverged in epoch {epoch + 1}: {exc}") from exc

        report.train_mae.append(abs_err_sum / n)
        report.train_mse.append(sq_err_sum / n)
        if valid_feats:
            v_mae, v_mse = _evaluate(state, valid_feats, valid_targets)
            report.valid_mae.append(v_mae)
            report.valid_mse.append(v_mse)
            metric = v_mae
        else:
            metric = report.train_mae[-1]
        if metric < best_metric:
            best_metric = metric
            best_arrays = state.state_arrays()
            report.best_epoch = epoch + 1
        report.epoch_seconds.append(time.perf_counter() - t0)
        report.epochs_run = epoch + 1
        if log is not None:
            msg = (f"epoch {epoch + 1}/{optim_config.epochs} "
                   f"train_mae={report.train_mae[-1]:.6f}")
            if valid_feats:
                msg += f" valid_mae={report.valid_mae[-1]:.6f}"
            log(msg)

    if best_arrays is not None:
        state.load_arrays(best_arrays, adam_step_count=params[0].step_count)

    if test:
        test_feats = [prepare_features(r.crystal, model_config) for r in test]
        test_targets = np.array([r.target for r in test])
        report.final_test_mae, _ = _evaluate(state, test_feats, test_targets)

    return state, report


# ---------------------------------------------------------------------------
# Checkpoint round trip
# ---------------------------------------------------------------------------

def save_model(state: ModelState, path, epoch: int = 0, extra_meta: dict | None = None) -> None:
    meta = {
        "config": state.config.to_dict(),
        "config_hash": state.config.hash(),
        "epoch": epoch,
        "adam_step_count": state.parameters()[0].step_count,
    }
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, state.state_arrays(), meta)


def load_model(path) -> tuple[ModelState, dict]:
    arrays, meta = load_checkpoint(path)
    config = ModelConfig.from_dict(meta["config"])
    if config.hash() != meta.get("config_hash"):
        raise CheckpointError(f"{path}: config echo does not match its hash")
    state = ModelState.initialize(config)
    state.load_arrays(arrays, adam_step_count=int(meta.get("adam_step_count", 0)))
    return state, meta
