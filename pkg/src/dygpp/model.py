"""Forward pass: fused sequence features -> FFN -> pooled node embeddings -> link logit."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .autodiff import NumericError, Parameter, ParameterStore, Tape
from .autodiff.ops import sigmoid
from .encoders import cooccurrence_counts, edge_values, init_omega
from .events import PASSENGER, STATION, EventLog, sample_negatives
from .sampling import MAX_SEQUENCE_LENGTH, NeighborSequence, SequenceBatch, sample_sequences


@dataclass
class ModelConfig:
    num_neighbors: int = 20
    dim_node: int = 172
    dim_edge: int = 172
    dim_time: int = 100
    dim_channel: int = 50
    dim_embed: int = 172
    dim_out: int = 172
    ffn_layers: int = 1
    dropout: float = 0.1
    time_scale: float = 1e-6
    ablate_edge: bool = False
    ablate_time: bool = False
    ablate_co: bool = False
    ablate_co_self: bool = False
    ablate_co_cross: bool = False
    literal_head: bool = False

    def __post_init__(self):
        for name in ("dim_node", "dim_edge", "dim_time", "dim_channel", "dim_embed", "dim_out",
                     "ffn_layers", "num_neighbors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sequence_length > MAX_SEQUENCE_LENGTH:
            raise ValueError(f"num_neighbors + 1 must not exceed {MAX_SEQUENCE_LENGTH}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")

    @property
    def sequence_length(self) -> int:
        return self.num_neighbors + 1

    @property
    def dim_fused_input(self) -> int:
        return self.dim_node + self.dim_edge + self.dim_time + self.dim_channel

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def parameter_shapes(config: ModelConfig, num_passengers: int, num_stations: int) -> dict:
    c = config
    d_in, d_head = c.dim_fused_input, 2 * c.dim_out
    shapes = {
        "node.passenger": (num_passengers + 1, c.dim_node),
        "node.station": (num_stations + 1, c.dim_node),
        "time.omega": (c.dim_time,),
        "co.weight": (c.dim_channel,),
        "co.bias": (c.dim_channel,),
        "proj.weight": (d_in, c.dim_embed),
        "proj.bias": (c.dim_embed,),
    }
    for layer in range(c.ffn_layers):
        shapes[f"ffn.{layer}.weight"] = (c.dim_embed, c.dim_embed)
        shapes[f"ffn.{layer}.bias"] = (c.dim_embed,)
    shapes.update({"out.weight": (c.dim_embed, c.dim_out), "out.bias": (c.dim_out,),
                   "head.w1": (d_head, d_head), "head.b1": (d_head,),
                   "head.w2": (d_head, 1), "head.b2": (1,)})
    return shapes


def init_parameters(config: ModelConfig, num_passengers: int, num_stations: int,
                    seed: int | np.random.Generator = 0) -> ParameterStore:
    """Random initial weights. Row 0 of both node tables is a frozen zero padding row."""
    rng = np.random.default_rng(seed)
    c = config
    store = ParameterStore()

    def table(name, rows):
        value = rng.normal(0.0, 0.1, size=(rows + 1, c.dim_node))
        value[0] = 0.0
        store.add(Parameter(name, value, frozen_rows=(0,)))

    table("node.passenger", num_passengers)
    table("node.station", num_stations)
    store.add(Parameter("time.omega", init_omega(c.dim_time)))
    store.add(Parameter("co.weight", rng.uniform(-1.0, 1.0, size=c.dim_channel)))
    store.add(Parameter("co.bias", rng.uniform(-1.0, 1.0, size=c.dim_channel)))
    d_in = c.dim_fused_input
    store.add(Parameter("proj.weight", _uniform(rng, d_in, (d_in, c.dim_embed))))
    store.add(Parameter("proj.bias", _uniform(rng, d_in, c.dim_embed)))
    for layer in range(c.ffn_layers):
        store.add(Parameter(f"ffn.{layer}.weight", _uniform(rng, c.dim_embed, (c.dim_embed, c.dim_embed))))
        store.add(Parameter(f"ffn.{layer}.bias", _uniform(rng, c.dim_embed, c.dim_embed)))
    store.add(Parameter("out.weight", _uniform(rng, c.dim_embed, (c.dim_embed, c.dim_out))))
    store.add(Parameter("out.bias", _uniform(rng, c.dim_embed, c.dim_out)))
    d_head = 2 * c.dim_out
    store.add(Parameter("head.w1", _uniform(rng, d_head, (d_head, d_head))))
    store.add(Parameter("head.b1", _uniform(rng, d_head, d_head)))
    store.add(Parameter("head.w2", _uniform(rng, d_head, (d_head, 1))))
    store.add(Parameter("head.b2", _uniform(rng, d_head, 1)))
    return store


def concat_sequences(parts: list[SequenceBatch]) -> SequenceBatch:
    kinds = {p.kind for p in parts}
    if len(kinds) != 1:
        raise ValueError("cannot concatenate sequences of different node kinds")
    return SequenceBatch(parts[0].kind, *(np.concatenate([getattr(p, f) for p in parts])
                                          for f in ("ids", "labels", "times", "padding", "ref_times")))


@dataclass
class PairBatch:
    """Candidate (passenger, station) pairs with their sequences and co-occurrence counts.

    ``u_seq`` holds ``P / u_repeat`` rows; pair ``i`` uses row ``i % len(u_seq)``.
    This lets a positive and its station-corrupted negative share one
    passenger sequence.
    """

    u_seq: SequenceBatch
    s_seq: SequenceBatch
    co_u: np.ndarray
    co_s: np.ndarray
    u_repeat: int = 1

    def __len__(self) -> int:
        return len(self.s_seq)


def build_pairs(u_seq: SequenceBatch, s_seqs: list[SequenceBatch]) -> PairBatch:
    """Pair one passenger-sequence block with one or more station-sequence blocks."""
    co_u, co_s = [], []
    for s_seq in s_seqs:
        a, b = cooccurrence_counts(u_seq, s_seq)
        co_u.append(a)
        co_s.append(b)
    return PairBatch(u_seq, concat_sequences(s_seqs) if len(s_seqs) > 1 else s_seqs[0],
                     np.concatenate(co_u), np.concatenate(co_s), u_repeat=len(s_seqs))


@dataclass
class LinkLogit:
    value: float

    @property
    def probability(self) -> float:
        return float(sigmoid(np.array([self.value]))[0])


class DyGPPModel:
    """Binds a :class:`ModelConfig` to a :class:`ParameterStore`."""

    def __init__(self, config: ModelConfig, store: ParameterStore):
        self.config = config
        self.store = store
        self._check_store()

    def _check_store(self) -> None:
        for name, shape in parameter_shapes(self.config, self.num_passengers,
                                            self.num_stations).items():
            if name not in self.store:
                raise ValueError(f"missing parameter {name!r}")
            if self.store[name].shape != shape:
                raise ValueError(f"dimension mismatch for {name!r}: "
                                 f"{self.store[name].shape} vs config {shape}")

    @classmethod
    def initialize(cls, config: ModelConfig, num_passengers: int, num_stations: int, seed=0):
        return cls(config, init_parameters(config, num_passengers, num_stations, seed))

    @property
    def num_passengers(self) -> int:
        return self.store["node.passenger"].shape[0] - 1

    @property
    def num_stations(self) -> int:
        return self.store["node.station"].shape[0] - 1

    # -- forward pieces ----------------------------------------------------------
    def _node_block(self, tape: Tape, seq: SequenceBatch, w_node, right=None) -> object:
        own, other = ("node.passenger", "node.station") if seq.kind == PASSENGER else \
                     ("node.station", "node.passenger")

        def project(table, ids):
            # project the distinct table rows once, then gather per position
            uniq, inv = np.unique(ids, return_inverse=True)
            rows = tape.affine(tape.gather(tape.param(self.store[table]), uniq), w_node)
            if right is not None:
                rows = tape.affine(rows, right)
            return tape.gather(rows, inv.reshape(ids.shape))

        return tape.concat([project(own, seq.ids[:, :1]), project(other, seq.ids[:, 1:])], axis=1)

    def _co_counts(self, co: np.ndarray) -> np.ndarray:
        c = self.config
        total = np.zeros(co.shape[:-1])
        if not c.ablate_co_self:
            total = total + co[..., 0]
        if not c.ablate_co_cross:
            total = total + co[..., 1]
        return total

    def _fused(self, tape: Tape, seq: SequenceBatch, co: np.ndarray, repeat: int, right,
               extra_bias=None):
        """``Z @ right`` without the bias term, where ``Z`` is the fused embedding.

        ``right=None`` gives ``Z`` itself; ``extra_bias`` is added last. Each input block contributes an
        affine map over its row slice of the projection weight. The edge block
        and the co-occurrence block are rank one per position: a scalar column
        replicated across channels, and ``f(own) + f(cross)`` with ``f`` affine,
        so their products reduce to outer products with a projected vector.
        Folding ``right`` into the weights lets the first FFN layer skip the
        per-position ``dim_embed x dim_embed`` product.
        """
        c = self.config
        W = tape.param(self.store["proj.weight"])
        o1 = c.dim_node
        o2 = o1 + c.dim_edge
        o3 = o2 + c.dim_time

        def fold(w):
            return w if right is None else tape.affine(w, right)

        def fold_vec(v):
            return tape.reshape(fold(tape.reshape(v, (1, -1))), (-1,))

        parts = [self._node_block(tape, seq, tape.slice_rows(W, 0, o1), right)]
        if not c.ablate_edge:
            parts.append(tape.outer(edge_values(seq), fold_vec(tape.colsum(tape.slice_rows(W, o1, o2)))))
        if not c.ablate_time:
            x_time = tape.cos_time(seq.delta_t(), tape.param(self.store["time.omega"]), c.time_scale)
            parts.append(tape.affine(x_time, fold(tape.slice_rows(W, o2, o3))))
        base = tape.add(*parts) if len(parts) > 1 else parts[0]
        bias = [fold_vec(tape.param(self.store["proj.bias"]))]
        if extra_bias is not None:
            bias.append(extra_bias)
        if c.ablate_co:
            if repeat > 1:
                base = tape.concat([base] * repeat, axis=0)
            return tape.add(base, tape.add(*bias))
        w_co = tape.slice_rows(W, o3, c.dim_fused_input)
        row = (1, c.dim_channel)
        slope = fold_vec(tape.affine(tape.reshape(tape.param(self.store["co.weight"]), row), w_co))
        offset = fold_vec(tape.affine(tape.reshape(tape.param(self.store["co.bias"]), row), w_co))
        # f(own) + f(cross) = (own + cross) * w + 2 b
        counts = self._co_counts(co)
        P, N = counts.shape
        co_part = tape.outer(counts.reshape(repeat, P // repeat, N), slope)
        out = tape.add(co_part, base, tape.add(*bias, offset, offset))
        return tape.reshape(out, (P, N, -1))

    def fuse(self, tape: Tape, seq: SequenceBatch, co: np.ndarray, repeat: int = 1):
        """Fused per-position embedding ``(P, N, dim_embed)``, the projection of the
        concatenated node, edge, time and co-occurrence features."""
        return self._fused(tape, seq, co, repeat, None)

    def encode(self, tape: Tape, seq: SequenceBatch, co: np.ndarray, *, train: bool = False,
               rng=None, repeat: int = 1):
        """Node embeddings ``(P, dim_out)``: FFN stack, mean over positions, output layer."""
        c = self.config
        z = None
        for layer in range(c.ffn_layers):
            w = tape.param(self.store[f"ffn.{layer}.weight"])
            b = tape.param(self.store[f"ffn.{layer}.bias"])
            if z is None:
                # the first layer is applied inside the fused block sums
                z = self._fused(tape, seq, co, repeat, w, extra_bias=b)
            else:
                z = tape.affine(z, w, b)
            z = tape.relu_dropout(z, c.dropout, train, rng)
        pooled = tape.mean_rows(z)
        return tape.affine(pooled, tape.param(self.store["out.weight"]),
                           tape.param(self.store["out.bias"]))

    def head(self, tape: Tape, h_u, h_s):
        z = tape.concat([h_u, h_s], axis=-1)
        w1 = tape.param(self.store["head.w1"])
        b1 = tape.param(self.store["head.b1"])
        if self.config.literal_head:
            hidden = tape.add(tape.relu(tape.affine(z, w1)), b1)
        else:
            hidden = tape.relu(tape.affine(z, w1, b1))
        logit = tape.affine(hidden, tape.param(self.store["head.w2"]),
                            tape.param(self.store["head.b2"]))
        return tape.reshape(logit, (-1,))

    def forward(self, tape: Tape, pairs: PairBatch, *, train: bool = False, rng=None):
        h_u = self.encode(tape, pairs.u_seq, pairs.co_u, train=train, rng=rng, repeat=pairs.u_repeat)
        h_s = self.encode(tape, pairs.s_seq, pairs.co_s, train=train, rng=rng)
        return self.head(tape, h_u, h_s)

    # -- public API ----------------------------------------------------------------
    def logits(self, pairs: PairBatch) -> np.ndarray:
        out = self.forward(Tape(record=False), pairs).value
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite logits")
        return out

    def loss(self, pairs: PairBatch, targets, *, train: bool = False, rng=None,
             backward: bool = True) -> float:
        """Mean BCE over the pairs; with ``backward`` the store's gradients are accumulated."""
        tape = Tape(record=backward)
        logits = self.forward(tape, pairs, train=train, rng=rng)
        loss, out = tape.sigmoid_bce(logits, np.asarray(targets, dtype=np.float64))
        if not np.isfinite(loss):
            raise NumericError("non-finite loss")
        if backward:
            tape.backward(out)
        return loss

    def embed_node(self, seq: NeighborSequence, counterpart: NeighborSequence) -> np.ndarray:
        """Eval-mode embedding of ``seq``'s owner against its counterpart sequence."""
        a, b = seq.as_batch(), counterpart.as_batch()
        co, _ = cooccurrence_counts(a, b)
        return self.encode(Tape(record=False), a, co).value[0]

    def predict_link(self, h_u, h_s) -> LinkLogit:
        tape = Tape(record=False)
        out = self.head(tape, tape.const(np.atleast_2d(h_u)), tape.const(np.atleast_2d(h_s)))
        return LinkLogit(float(out.value[0]))

    def decision_function(self, history: EventLog, passengers, stations, times,
                          batch_size: int = 1024) -> np.ndarray:
        """Eval-mode logits for arbitrary ``(passenger, station, time)`` queries."""
        p = np.asarray(passengers, dtype=np.int64)
        s = np.asarray(stations, dtype=np.int64)
        t = np.asarray(times, dtype=np.int64)
        if len(p) and (p.min() < 1 or p.max() > self.num_passengers):
            raise ValueError("passenger id outside the model's id space")
        if len(s) and (s.min() < 1 or s.max() > self.num_stations):
            raise ValueError("station id outside the model's id space")
        N = self.config.sequence_length
        out = np.empty(len(p))
        for lo in range(0, len(p), batch_size):
            sl = slice(lo, lo + batch_size)
            u_seq = sample_sequences(history, p[sl], PASSENGER, t[sl], N)
            s_seq = sample_sequences(history, s[sl], STATION, t[sl], N)
            out[sl] = self.logits(build_pairs(u_seq, [s_seq]))
        return out

    def score_pairs(self, history: EventLog, events: EventLog, negatives,
                    batch_size: int = 1024) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode logits for every event in ``events`` and its corrupted twin."""
        negatives = np.asarray(negatives, dtype=np.int64)
        pos = np.empty(len(events))
        neg = np.empty(len(events))
        for lo in range(0, len(events), batch_size):
            sl = slice(lo, min(lo + batch_size, len(events)))
            pairs = positive_negative_pairs(self, history, events, sl, negatives[sl])
            out = self.logits(pairs)
            k = sl.stop - sl.start
            pos[sl], neg[sl] = out[:k], out[k:]
        return pos, neg

    def predict_proba(self, history: EventLog, passengers, stations, times) -> np.ndarray:
        return sigmoid(self.decision_function(history, passengers, stations, times))


class SequenceCache:
    """Positive-event sequences for a fixed event slice, built once and reused every epoch."""

    def __init__(self, history: EventLog, events: EventLog, length: int):
        self.u_seq = sample_sequences(history, events.passengers, PASSENGER, events.timestamps, length)
        self.s_seq = sample_sequences(history, events.stations, STATION, events.timestamps, length)

    def take(self, sl: slice) -> tuple[SequenceBatch, SequenceBatch]:
        return self.u_seq.take(sl), self.s_seq.take(sl)


def positive_negative_pairs(model: DyGPPModel, history: EventLog, events: EventLog, sl: slice,
                            negatives: np.ndarray, cache: SequenceCache | None = None) -> PairBatch:
    """Pairs ``[positives..., negatives...]`` for the events in ``sl``."""
    N = model.config.sequence_length
    t = events.timestamps[sl]
    if cache is not None:
        u_seq, s_pos = cache.take(sl)
    else:
        u_seq = sample_sequences(history, events.passengers[sl], PASSENGER, t, N)
        s_pos = sample_sequences(history, events.stations[sl], STATION, t, N)
    s_neg = sample_sequences(history, negatives, STATION, t, N)
    return build_pairs(u_seq, [s_pos, s_neg])


def batch_loss(model: DyGPPModel, history: EventLog, events: EventLog, sl: slice,
               rng: np.random.Generator, *, train: bool = True, negatives=None,
               cache: SequenceCache | None = None, backward: bool = True,
               candidates=None) -> float:
    """BCE over each positive in ``events[sl]`` and one station-corrupted negative.

    Negatives are drawn from ``rng`` (restricted to ``candidates`` if given)
    unless passed explicitly; dropout also draws from ``rng``.
    """
    if sl.stop - sl.start <= 0:
        raise ValueError("empty batch")
    if negatives is None:
        negatives = sample_negatives(history.num_stations, events.stations[sl], rng, candidates)
    pairs = positive_negative_pairs(model, history, events, sl, negatives, cache)
    B = len(negatives)
    targets = np.concatenate([np.ones(B), np.zeros(B)])
    return model.loss(pairs, targets, train=train, rng=rng, backward=backward)
