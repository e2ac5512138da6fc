"""SFT and DPO objectives on a small autoregressive table model, with exact gradients.

The model is an order-``k`` context table: the next-token logits depend on
the previous ``k`` tokens (left-padded with a BOS symbol). Everything is
numpy and single threaded, so a fixed seed gives bit-identical results.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np


class UsageError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    boundary: int  # ids[:boundary] condition, ids[boundary:] are scored

    def __post_init__(self):
        if not 0 <= self.boundary <= len(self.ids):
            raise UsageError(f"boundary {self.boundary} outside sequence of length {len(self.ids)}")


class ToyModel:
    def __init__(self, vocab_size: int, order: int = 2, seed: int = 0, init_scale: float = 0.1):
        if vocab_size < 1 or order < 0:
            raise UsageError("vocab_size must be >= 1 and order >= 0")
        self.vocab_size = vocab_size
        self.order = order
        self.seed = seed
        self.n_contexts = (vocab_size + 1) ** order
        rng = np.random.default_rng(seed)
        self.W = rng.normal(0.0, init_scale, size=(self.n_contexts, vocab_size))

    @property
    def bos(self) -> int:
        return self.vocab_size

    def copy(self) -> "ToyModel":
        m = ToyModel.__new__(ToyModel)
        m.vocab_size, m.order, m.seed, m.n_contexts = (self.vocab_size, self.order, self.seed,
                                                       self.n_contexts)
        m.W = self.W.copy()
        return m

    def context_index(self, history) -> int:
        ctx = list(history)[-self.order:] if self.order else []
        ctx = [self.bos] * (self.order - len(ctx)) + ctx
        idx = 0
        for c in ctx:
            idx = idx * (self.vocab_size + 1) + c
        return idx

    def probs(self) -> np.ndarray:
        z = self.W - self.W.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def log_normalizer(self) -> np.ndarray:
        m = self.W.max(axis=1)
        return m + np.log(np.exp(self.W - m[:, None]).sum(axis=1))


@dataclass
class Encoded:
    """Flattened scored positions of a list of sequences."""

    ctx: np.ndarray
    tok: np.ndarray
    seg: np.ndarray
    lengths: np.ndarray

    @property
    def n_seq(self) -> int:
        return len(self.lengths)

    def subset(self, idx) -> "Encoded":
        idx = np.asarray(idx)
        starts = np.concatenate([[0], np.cumsum(self.lengths)])
        parts = [np.arange(starts[i], starts[i + 1]) for i in idx]
        pos = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        seg = np.repeat(np.arange(len(idx)), self.lengths[idx])
        return Encoded(self.ctx[pos], self.tok[pos], seg, self.lengths[idx])


def encode(model: ToyModel, seqs: list[TokenSequence]) -> Encoded:
    ctx, tok, seg, lengths = [], [], [], []
    for s, seq in enumerate(seqs):
        for t in seq.ids:
            if not 0 <= t < model.vocab_size:
                raise UsageError(f"token {t} outside vocabulary of size {model.vocab_size}")
        n = 0
        for pos in range(seq.boundary, len(seq.ids)):
            ctx.append(model.context_index(seq.ids[:pos]))
            tok.append(seq.ids[pos])
            seg.append(s)
            n += 1
        lengths.append(n)
    return Encoded(np.array(ctx, dtype=np.int64), np.array(tok, dtype=np.int64),
                   np.array(seg, dtype=np.int64), np.array(lengths, dtype=np.int64))


def _as_encoded(model, batch) -> Encoded:
    if isinstance(batch, Encoded):
        return batch
    if isinstance(batch, TokenSequence):
        batch = [batch]
    return encode(model, list(batch))


def sequence_logprobs(model: ToyModel, batch) -> np.ndarray:
    """Per-sequence sum of target-token log-probabilities."""
    enc = _as_encoded(model, batch)
    lse = model.log_normalizer()
    per_pos = model.W[enc.ctx, enc.tok] - lse[enc.ctx]
    return np.bincount(enc.seg, weights=per_pos, minlength=enc.n_seq)


def sequence_logprob(model: ToyModel, seq: TokenSequence) -> float:
    return float(sequence_logprobs(model, [seq])[0])


def _logprob_grad(model: ToyModel, enc: Encoded, weights: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_i weights[i] * logprob_i`` w.r.t. the logits table."""
    w_pos = weights[enc.seg]
    counts = np.zeros_like(model.W)
    np.add.at(counts, (enc.ctx, enc.tok), w_pos)
    row = np.bincount(enc.ctx, weights=w_pos, minlength=model.n_contexts)
    return counts - row[:, None] * model.probs()


def sft_loss(model: ToyModel, batch, per_token: bool = False) -> float:
    return sft_loss_and_grad(model, batch, per_token, grad=False)[0]


def sft_loss_and_grad(model: ToyModel, batch, per_token: bool = False, grad: bool = True):
    """Mean negative sequence log-likelihood and its gradient.

    ``per_token`` divides each sequence's log-likelihood by its target length.
    """
    enc = _as_encoded(model, batch)
    if enc.n_seq == 0:
        raise UsageError("empty batch")
    lp = sequence_logprobs(model, enc)
    scale = np.full(enc.n_seq, 1.0 / enc.n_seq)
    if per_token:
        scale = scale / np.maximum(enc.lengths, 1)
    loss = float(-(scale * lp).sum())
    return loss, (-_logprob_grad(model, enc, scale) if grad else None)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-_softplus(-x))


def dpo_loss(lp_theta_chosen, lp_ref_chosen, lp_theta_rej, lp_ref_rej, beta: float = 0.9) -> float:
    """``-log sigmoid(beta * (chosen log-ratio - rejected log-ratio))``, averaged."""
    arrs = [np.atleast_1d(np.asarray(a, dtype=np.float64))
            for a in (lp_theta_chosen, lp_ref_chosen, lp_theta_rej, lp_ref_rej)]
    if not all(np.all(np.isfinite(a)) for a in arrs):
        raise UsageError("non-finite log-probability")
    if not beta > 0:
        raise UsageError("beta must be positive")
    tc, rc, tr, rr = arrs
    z = beta * ((tc - rc) - (tr - rr))
    return float(_softplus(-z).mean())


def reward(lp_theta, lp_ref, beta: float = 0.9):
    return beta * (np.asarray(lp_theta) - np.asarray(lp_ref))


@dataclass
class PreferenceBatch:
    """Tokenized triples: prompt+chosen and prompt+rejected sequences."""

    chosen: Encoded
    rejected: Encoded

    @property
    def size(self) -> int:
        return self.chosen.n_seq

    def subset(self, idx) -> "PreferenceBatch":
        return PreferenceBatch(self.chosen.subset(idx), self.rejected.subset(idx))


def encode_triples(model: ToyModel, triples) -> PreferenceBatch:
    """``triples`` are ``(prompt_ids, chosen_ids, rejected_ids)``."""
    ch = [TokenSequence(tuple(p) + tuple(c), len(p)) for p, c, _ in triples]
    rj = [TokenSequence(tuple(p) + tuple(r), len(p)) for p, _, r in triples]
    return PreferenceBatch(encode(model, ch), encode(model, rj))


def reward_accuracy(batch: PreferenceBatch, theta: ToyModel, ref: ToyModel,
                    beta: float = 0.9) -> float:
    """Share of triples whose chosen reward strictly beats the rejected one."""
    if batch.size == 0:
        raise UsageError("empty triple set")
    rc = reward(sequence_logprobs(theta, batch.chosen), sequence_logprobs(ref, batch.chosen), beta)
    rr = reward(sequence_logprobs(theta, batch.rejected),
                sequence_logprobs(ref, batch.rejected), beta)
    return float(np.mean(rc > rr))


def dpo_loss_and_grad(theta: ToyModel, batch: PreferenceBatch, ref_chosen: np.ndarray,
                      ref_rejected: np.ndarray, beta: float = 0.9, grad: bool = True):
    tc = sequence_logprobs(theta, batch.chosen)
    tr = sequence_logprobs(theta, batch.rejected)
    loss = dpo_loss(tc, ref_chosen, tr, ref_rejected, beta)
    if not grad:
        return loss, None
    z = beta * ((tc - ref_chosen) - (tr - ref_rejected))
    w = -beta * _sigmoid(-z) / batch.size  # dL/d logprob_chosen
    g = _logprob_grad(theta, batch.chosen, w) - _logprob_grad(theta, batch.rejected, w)
    return loss, g


def gradient_check(loss_fn, model: ToyModel, probe_count: int = 100, seed: int = 0,
                   h: float = 1e-5, candidates=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(model) -> (loss, grad)``. Probes are drawn from ``candidates``
    (flat parameter indices) or from all parameters.
    """
    _, g = loss_fn(model)
    g = g.ravel()
    flat = model.W.reshape(-1)
    rng = np.random.default_rng(seed)
    pool = np.arange(flat.size) if candidates is None else np.asarray(candidates)
    probes = rng.choice(pool, size=min(probe_count, len(pool)), replace=False)
    worst = 0.0
    for i in probes:
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(model)[0]
        flat[i] = orig - h
        down = loss_fn(model)[0]
        flat[i] = orig
        num = (up - down) / (2 * h)
        rel = abs(g[i] - num) / max(abs(g[i]), abs(num), 1e-10)
        worst = max(worst, rel)
    return worst


def active_parameters(model: ToyModel, *encs: Encoded) -> np.ndarray:
    """Flat indices of every parameter in a context row the data visits."""
    rows = np.unique(np.concatenate([e.ctx for e in encs]))
    return (rows[:, None] * model.vocab_size + np.arange(model.vocab_size)).ravel()


def preference_active_parameters(model: ToyModel, batch: "PreferenceBatch") -> np.ndarray:
    """Parameters the DPO loss structurally depends on.

    Within one triple, positions shared by the chosen and rejected sides
    cancel in the log-ratio difference. Parameter ``(c, v)`` is kept when
    some triple has a nonzero net count for ``(c, v)`` or for row ``c``;
    every other parameter has an exactly zero gradient.
    """
    V = model.vocab_size
    keep = np.zeros(model.W.size, dtype=bool)
    cs = np.concatenate([[0], np.cumsum(batch.chosen.lengths)])
    rs = np.concatenate([[0], np.cumsum(batch.rejected.lengths)])
    for j in range(batch.size):
        net: dict[int, int] = {}
        rows: dict[int, int] = {}
        for enc, st, sign in ((batch.chosen, cs, 1), (batch.rejected, rs, -1)):
            for c, v in zip(enc.ctx[st[j]:st[j + 1]], enc.tok[st[j]:st[j + 1]]):
                net[c * V + v] = net.get(c * V + v, 0) + sign
                rows[c] = rows.get(c, 0) + sign
        for k, n in net.items():
            if n:
                keep[k] = True
        for c, n in rows.items():
            if n:
                keep[c * V:(c + 1) * V] = True
    return np.flatnonzero(keep)


# -- training ----------------------------------------------------------------


@dataclass
class SftConfig:
    learning_rate: float = 0.5
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.0
    val_fraction: float = 0.05
    per_token: bool = False


@dataclass
class DpoConfig:
    beta: float = 0.9
    learning_rate: float = 0.5
    epochs: int = 3
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise UsageError("beta must be positive")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")


@dataclass
class TrainingCurves:
    records: list[dict] = field(default_factory=list)

    COLUMNS = ("step", "phase", "sft_loss", "val_loss", "rl_loss", "reward_accuracy",
               "chosen_reward", "rejected_reward", "eval_reward_accuracy")

    def add(self, **row):
        row["step"] = len(self.records)
        self.records.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records if r.get(name) is not None], dtype=float)

    def extend(self, other: "TrainingCurves"):
        for r in other.records:
            r = dict(r)
            r.pop("step")
            self.add(**r)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.records:
            w.writerow(["" if r.get(c) is None else _fmt(r[c]) for c in self.COLUMNS])
        return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _check(loss: float):
    if not math.isfinite(loss):
        raise TrainingError(f"loss diverged ({loss})")


def _batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, size):
        yield order[s:s + size]


def train_sft(model: ToyModel, sequences: list[TokenSequence], config: SftConfig = SftConfig()
              ) -> tuple[ToyModel, TrainingCurves]:
    """Minibatch gradient descent on the SFT loss with a held-out slice."""
    rng = np.random.default_rng(config.seed)
    enc = encode(model, sequences)
    n_val = int(round(enc.n_seq * config.val_fraction)) if enc.n_seq > 1 else 0
    perm = rng.permutation(enc.n_seq)
    val = enc.subset(perm[:n_val]) if n_val else None
    train = enc.subset(perm[n_val:])
    if train.n_seq == 0:
        raise UsageError("no training sequences")
    model = model.copy()
    vel = np.zeros_like(model.W)
    curves = TrainingCurves()
    for _ in range(config.epochs):
        for idx in _batches(train.n_seq, config.batch_size, rng):
            loss, g = sft_loss_and_grad(model, train.subset(idx), config.per_token)
            _check(loss)
            vel = config.momentum * vel - config.learning_rate * g
            model.W += vel
            val_loss = sft_loss(model, val, config.per_token) if val is not None else None
            curves.add(phase="sft", sft_loss=loss, val_loss=val_loss)
    return model, curves


def train_dpo(theta: ToyModel, ref: ToyModel, triples: PreferenceBatch,
              config: DpoConfig = DpoConfig(), held_out: PreferenceBatch | None = None
              ) -> tuple[ToyModel, TrainingCurves]:
    """Minibatch gradient descent on the DPO loss against a frozen reference.

    Each step logs the batch loss, reward accuracy and mean chosen/rejected
    rewards measured before the update, plus held-out reward accuracy when
    ``held_out`` is given.
    """
    rng = np.random.default_rng(config.seed)
    theta = theta.copy()
    ref_c = sequence_logprobs(ref, triples.chosen)
    ref_r = sequence_logprobs(ref, triples.rejected)
    vel = np.zeros_like(theta.W)
    curves = TrainingCurves()
    for _ in range(config.epochs):
        for idx in _batches(triples.size, config.batch_size, rng):
            b = triples.subset(idx)
            loss, g = dpo_loss_and_grad(theta, b, ref_c[idx], ref_r[idx], config.beta)
            _check(loss)
            rc = reward(sequence_logprobs(theta, b.chosen), ref_c[idx], config.beta)
            rr = reward(sequence_logprobs(theta, b.rejected), ref_r[idx], config.beta)
            vel = config.momentum * vel - config.learning_rate * g
            theta.W += vel
            ev = reward_accuracy(held_out, theta, ref, config.beta) if held_out is not None else None
            curves.add(phase="dpo", rl_loss=loss, reward_accuracy=float(np.mean(rc > rr)),
                       chosen_reward=float(rc.mean()), rejected_reward=float(rr.mean()),
                       eval_reward_accuracy=ev)
    return theta, curves


def slope(values) -> float:
    """Least-squares slope of ``values`` against their index."""
    y = np.asarray(values, dtype=float)
    if len(y) < 2:
        return 0.0
    x = np.arange(len(y), dtype=float)
    return float(np.polyfit(x, y, 1)[0])


# -- synthetic data ----------------------------------------------------------


def synthetic_preferences(n_prompts: int, vocab_size: int = 12, prompt_len: int = 4,
                          target_len: int = 6, rejected_per_prompt: int = 3, seed: int = 0):
    """Prompts whose correct continuation follows ``t[i] = t[i-1] + t[i-2] (mod V)``.

    Rejected continuations break the rule at one or two positions. Returns
    ``(sft_sequences, triples)`` where triples are
    ``(prompt_ids, chosen_ids, rejected_ids)``.
    """
    rng = np.random.default_rng(seed)
    V = vocab_size

    def follow(seq, n):
        seq = list(seq)
        for _ in range(n):
            seq.append((seq[-1] + seq[-2]) % V)
        return seq

    sft, triples = [], []
    for _ in range(n_prompts):
        prompt = [int(x) for x in rng.integers(0, V, size=prompt_len)]
        chosen = follow(prompt, target_len)[prompt_len:]
        sft.append(TokenSequence(tuple(prompt + chosen), prompt_len))
        seen = set()
        for _ in range(rejected_per_prompt * 4):
            if len(seen) >= rejected_per_prompt:
                break
            rej = list(prompt)
            bad = set(int(p) for p in rng.choice(target_len, size=int(rng.integers(1, 3)),
                                                 replace=False))
            for pos in range(target_len):
                nxt = (rej[-1] + rej[-2]) % V
                if pos in bad:
                    nxt = (nxt + int(rng.integers(1, V))) % V
                rej.append(nxt)
            rej = tuple(rej[prompt_len:])
            if rej in seen or rej == tuple(chosen):
                continue
            seen.add(rej)
            triples.append((tuple(prompt), tuple(chosen), rej))
    return sft, triples


def toy_experiment(n_prompts: int = 1500, vocab_size: int = 12, order: int = 2,
                   beta: float = 0.9, seed: int = 0, sft_config: SftConfig | None = None,
                   dpo_config: DpoConfig | None = None, held_out_fraction: float = 0.1) -> dict:
    """SFT warm-up then DPO on a synthetic preference corpus.

    Prompts are split in half: one half supplies SFT sequences, the other
    half's triples are used for DPO, with ``held_out_fraction`` of them kept
    aside for evaluation.
    """
    sft_config = sft_config or SftConfig(learning_rate=2.0, epochs=30, seed=seed)
    dpo_config = dpo_config or DpoConfig(beta=beta, seed=seed)
    sft, triples = synthetic_preferences(n_prompts, vocab_size, seed=seed)
    order_ = np.random.default_rng(seed).permutation(len(sft))
    half = len(sft) // 2
    sft_seqs = [sft[i] for i in order_[:half]]
    rl_prompts = {sft[i].ids[:sft[i].boundary] for i in order_[half:]}
    rl = [t for t in triples if t[0] in rl_prompts]
    model = ToyModel(vocab_size, order, seed=seed)
    ref, c_sft = train_sft(model, sft_seqs, sft_config)
    cut = int(round(len(rl) * (1.0 - held_out_fraction)))
    train_b = encode_triples(ref, rl[:cut])
    held = encode_triples(ref, rl[cut:]) if cut < len(rl) else None
    ref_before = ref.W.copy()
    theta, c_dpo = train_dpo(ref, ref, train_b, dpo_config, held)
    assert np.array_equal(ref.W, ref_before)
    curves = TrainingCurves()
    curves.extend(c_sft)
    curves.extend(c_dpo)
    return {
        "ref": ref, "theta": theta, "curves": curves, "sft_curves": c_sft, "dpo_curves": c_dpo,
        "n_triples": len(triples), "n_rl_triples": len(rl), "held_out": held,
        "held_out_accuracy": (reward_accuracy(held, theta, ref, dpo_config.beta)
                              if held is not None else None),
    }


# -- parameter dump ----------------------------------------------------------

_MAGIC = b"COLTTOY\x00"
_VERSION = 1


def dump_model(model: ToyModel) -> bytes:
    header = _MAGIC + struct.pack("<IIIQ", _VERSION, model.vocab_size, model.order, model.W.size)
    return header + model.W.astype("<f8").tobytes()


def load_model(data: bytes) -> ToyModel:
    if data[:8] != _MAGIC:
        raise UsageError("not a toy model dump")
    version, vocab, order, n = struct.unpack_from("<IIIQ", data, 8)
    if version != _VERSION:
        raise UsageError(f"unsupported model dump version {version}")
    model = ToyModel(vocab, order)
    off = 8 + struct.calcsize("<IIIQ")
    model.W = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64).reshape(
        model.n_contexts, vocab)
    return model
