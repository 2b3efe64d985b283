"""Joint optimization of decoder and reverb under the MSS objective.

Adam with a staircase learning-rate schedule (x0.98 every 10k steps),
global-norm gradient clipping at 2, per-step loss logging and periodic
checkpoints in a versioned binary container. Runs are deterministic given
the seed: dropout streams and minibatch order are pure functions of
(seed, step), so resuming from a checkpoint reproduces a straight run.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import dataset as ds
from . import features as ft
from . import fmsynth as fm
from . import reverb as rv
from . import spectral as sp
from . import tcn

CHECKPOINT_MAGIC = b"FMRS"
CHECKPOINT_VERSION = 1

I_MAX_CHOICES = {"2": 2.0, "2pi": 2.0 * np.pi, "4pi": 4.0 * np.pi}


@dataclass(frozen=True)
class RunConfig:
    corpus_dir: str
    patch_path: str
    i_max: float = 2.0
    steps: int = 120000
    batch: int = 16
    lr0: float = 3e-4
    lr_decay: float = 0.98
    lr_decay_every: int = 10000
    clip_norm: float = 2.0
    seed: int = 0
    checkpoint_every: int = 10000
    hidden_channels: int = 128
    blocks: int = 5
    dropout_p: float = 0.5

    def __post_init__(self):
        for name in ("i_max", "steps", "batch", "lr0", "lr_decay",
                     "lr_decay_every", "clip_norm", "checkpoint_every"):
            if getattr(self, name) <= 0:
                raise ValueError(f"RunConfig.{name} must be positive")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def lr_at(step, lr0=3e-4, decay=0.98, every=10000):
    """Staircase schedule: lr0 * decay ** floor(step / every)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return lr0 * decay ** (step // every)


def clip_gradients(grads, max_norm=2.0):
    """Scale the whole gradient set so its global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected Adam update, in place on params."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        v = state.v[name]
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.values = p.values - lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# checkpoint container
#
# magic(4) | version u32 | digest(32) | step u64 | n_blobs u32 |
# per blob: name_len u16 | name utf-8 | ndim u8 | dims u32... | f64 LE data
# Blobs are ordered by name, so save -> load -> save is byte-identical.

def save_checkpoint(path, run, step, params, reverb_params, adam):
    blobs = {}
    for name, p in {**params, **rv.reverb_param_dict(reverb_params)}.items():
        blobs[f"param/{name}"] = np.atleast_1d(np.asarray(p.values, dtype=np.float64))
    for name, m in adam.m.items():
        blobs[f"adam_m/{name}"] = np.atleast_1d(m)
    for name, v in adam.v.items():
        blobs[f"adam_v/{name}"] = np.atleast_1d(v)
    blobs["adam_t"] = np.array([float(adam.t)])

    out = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION),
           run.digest(), struct.pack("<Q", step),
           struct.pack("<I", len(blobs))]
    for name in sorted(blobs):
        arr = blobs[name]
        enc = name.encode()
        out.append(struct.pack("<H", len(enc)))
        out.append(enc)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.astype("<f8").tobytes())
    data = b"".join(out)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def load_checkpoint(path, run=None):
    """Returns (step, blobs dict). Verifies magic, version and, when a
    RunConfig is given, its digest."""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {version} unsupported")
    digest = data[8:40]
    if run is not None and digest != run.digest():
        raise ValueError(f"{path}: checkpoint was written by a different RunConfig")
    (step,) = struct.unpack_from("<Q", data, 40)
    (n_blobs,) = struct.unpack_from("<I", data, 48)
    offset = 52
    blobs = {}
    for _ in range(n_blobs):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset: offset + name_len].decode()
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        blobs[name] = arr.reshape(shape).copy()
    return step, blobs


def _restore_state(blobs, params, reverb_params, adam):
    everything = {**params, **rv.reverb_param_dict(reverb_params)}
    for name, p in everything.items():
        arr = blobs[f"param/{name}"]
        p.values = arr.reshape(p.values.shape)
    for key, arr in blobs.items():
        if key.startswith("adam_m/"):
            name = key[len("adam_m/"):]
            adam.m[name] = arr.reshape(everything[name].values.shape)
        elif key.startswith("adam_v/"):
            name = key[len("adam_v/"):]
            adam.v[name] = arr.reshape(everything[name].values.shape)
    adam.t = int(blobs["adam_t"][0])


# ---------------------------------------------------------------------------
# training loop

def build_model(run, config):
    spec = tcn.TcnSpec(out_channels=config.n_oscillators, i_max=run.i_max,
                       hidden_channels=run.hidden_channels, blocks=run.blocks,
                       dropout_p=run.dropout_p)
    params = tcn.init_weights(spec, seed=run.seed)
    reverb_params = rv.init_reverb(seed=run.seed + 1)
    return spec, params, reverb_params


def clip_loss(spec, params, reverb_params, config, audio, track,
              mode="train", seed=0):
    """Scalar MSS loss Tensor for one clip: cond -> decode -> render ->
    reverb -> mss against the target audio (raw or precomputed
    spectrograms from spectral.target_spectrograms)."""
    cond = ft.normalize(track)
    env = tcn.decode(spec, params, config, cond.frames, mode=mode, seed=seed)
    render_spec = fm.RenderSpec(sample_rate=track.sample_rate, hop=track.hop,
                                f0_frames=track.f0_hz)
    dry = fm.render(config, env, render_spec, i_max=spec.i_max)
    wet = rv.apply_reverb(dry, reverb_params)
    return sp.mss_loss(audio, wet)


def _validation_loss(spec, params, reverb_params, config, clips):
    total = 0.0
    for audio, track in clips:
        loss = clip_loss(spec, params, reverb_params, config, audio, track,
                         mode="inference")
        total += loss.item()
    return total / len(clips)


def train(run, out_dir, resume_from=None, log_name="loss_log.csv"):
    """Run the optimization; returns the final checkpoint path.

    Writes checkpoints and an append-only CSV loss log (columns: step, lr,
    train_loss, valid_loss) under out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = ds.load_manifest(Path(run.corpus_dir) / "manifest.json")
    config = fm.load_config(run.patch_path)
    spec, params, reverb_params = build_model(run, config)
    all_params = {**params, **rv.reverb_param_dict(reverb_params)}
    adam = AdamState()

    start_step = 0
    if resume_from is not None:
        start_step, blobs = load_checkpoint(resume_from, run)
        _restore_state(blobs, params, reverb_params, adam)

    train_records = manifest.split_records("train")
    if not train_records:
        raise ValueError("train split is empty")
    valid_records = manifest.split_records("valid")

    cache = {}
    for r in manifest.records:
        audio, track, _env = ds.load_clip(run.corpus_dir, r)
        cache[r.clip_id] = (sp.target_spectrograms(audio), track)
    valid_clips = [cache[r.clip_id] for r in valid_records]

    batches_per_epoch = max(1, int(np.ceil(len(train_records) / run.batch)))
    log_path = out_dir / log_name
    mode = "a" if start_step > 0 and log_path.exists() else "w"
    last_ckpt = None
    with open(log_path, mode) as logfh:
        if mode == "w":
            logfh.write("step,lr,train_loss,valid_loss\n")
        for step in range(start_step, run.steps):
            epoch = step // batches_per_epoch
            batch_idx = step % batches_per_epoch
            batch = ds.minibatch(manifest, "train", run.batch,
                                 seed=run.seed, epoch=epoch)[batch_idx]

            total = None
            for j, record in enumerate(batch):
                audio, track = cache[record.clip_id]
                loss = clip_loss(spec, params, reverb_params, config, audio,
                                 track, mode="train",
                                 seed=_dropout_seed(run.seed, step, j))
                total = loss if total is None else ad.add(total, loss)
            total = ad.mul(total, ad.constant(1.0 / len(batch)))
            train_loss = total.item()
            if not np.isfinite(train_loss):
                raise FloatingPointError(
                    f"non-finite loss at step {step}; last checkpoint: {last_ckpt}"
                )
            for p in all_params.values():
                p.zero_grad()
            ad.backward(total)
            grads = {name: (p.grad if p.grad is not None
                            else np.zeros_like(p.values))
                     for name, p in all_params.items()}
            grads = clip_gradients(grads, run.clip_norm)
            lr = lr_at(step, run.lr0, run.lr_decay, run.lr_decay_every)
            adam_step(all_params, grads, adam, lr)

            valid_loss = ""
            is_ckpt = (step + 1) % run.checkpoint_every == 0 or step + 1 == run.steps
            if is_ckpt:
                if valid_clips:
                    valid_loss = f"{_validation_loss(spec, params, reverb_params, config, valid_clips):.10g}"
                last_ckpt = out_dir / f"checkpoint_{step + 1:08d}.ckpt"
                save_checkpoint(last_ckpt, run, step + 1, params,
                                reverb_params, adam)
            logfh.write(f"{step},{lr:.10g},{train_loss:.10g},{valid_loss}\n")
    return last_ckpt


def _dropout_seed(seed, step, clip_index):
    return (seed * 1000003 + step) * 97 + clip_index


def match_envelopes(config, target_audio, f0_frames, i_max=2.0,
                    steps=3000, lr=0.1, lr_half_every=300, seed=0,
                    sample_rate=16000, hop=64, mss_spec=None):
    """Directly fit envelope frames to a target by gradient descent on MSS.

    Optimizes unconstrained logits gated to (0, A_max) per channel with a
    sigmoid, so the rendered envelopes always satisfy the level bounds.
    The L1 spectral terms leave Adam circling a noise floor proportional
    to the step size, so the rate is halved every lr_half_every steps.
    Returns (envelopes [T, n_osc], loss history).
    """
    mss_spec = mss_spec or sp.MssSpec()
    t_frames = len(f0_frames)
    render_spec = fm.RenderSpec(sample_rate=sample_rate, hop=hop,
                                f0_frames=np.asarray(f0_frames, dtype=np.float64))
    a_max = config.a_max(i_max)[:, None]
    rng = np.random.default_rng(seed)
    z = ad.parameter(rng.normal(0.0, 0.01, size=(config.n_oscillators, t_frames)))
    adam = AdamState()
    history = []
    for step in range(steps):
        env = ad.scale_shift(ad.sigmoid(z), ad.constant(a_max), ad.constant(0.0))
        pred = fm.render(config, env, render_spec, i_max=i_max)
        loss = sp.mss_loss(target_audio, pred, mss_spec)
        history.append(loss.item())
        z.zero_grad()
        ad.backward(loss)
        adam_step({"z": z}, {"z": z.grad}, adam,
                  lr * 0.5 ** (step // lr_half_every))
    env = 1.0 / (1.0 + np.exp(-z.values)) * config.a_max(i_max)[:, None]
    return env.T, history
