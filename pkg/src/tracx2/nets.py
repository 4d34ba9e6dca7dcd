"""TRACX2, its Delta-free RAE variant, and an Elman SRN, all in plain numpy.

Every unit uses a saturating linear squashing function, ``clamp(x / 5, -1, 1)``.
Learning is per-step backpropagation of squared error with a Fahlman offset
added to the activation slope.  The autoencoder's familiarity signal ``E`` is
the mean absolute input/output difference; it is not the training loss.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .corpus import Corpus, Song
from .encoding import CODE_SIZE, MIN_INTERVAL, code_table

log = logging.getLogger(__name__)

SATURATION = _kernels.SATURATION
_NO_TRACE = np.empty((0, 2))
MODES = ("tracx2", "rae")
MODELS = ("tracx2", "rae", "srn")


class NumericError(FloatingPointError):
    pass


@dataclass
class Hyperparams:
    learning_rate: float = 0.01
    momentum: float = 0.0
    fahlman_offset: float = 0.1
    temperature: float = 5.0
    epochs: int = 30
    weight_init_range: float = 0.5
    hidden_size: int = CODE_SIZE

    def __post_init__(self):
        if self.momentum != 0:
            raise ValueError("momentum is not supported")
        if self.learning_rate < 0 or self.fahlman_offset < 0 or self.temperature <= 0:
            raise ValueError(f"invalid hyperparameters: {self}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def activation(x):
    return np.clip(np.asarray(x, dtype=float) / SATURATION, -1.0, 1.0)


def activation_deriv(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < SATURATION, 1.0 / SATURATION, 0.0)


def delta_from_error(E, temperature: float = 5.0):
    """Squash an error in [0, 2] into a gate in [0, 1]; tanh(temperature * E)."""
    return np.tanh(temperature * np.asarray(E, dtype=float))


def next_lhs(hidden: np.ndarray, delta: float, prev_rhs: np.ndarray) -> np.ndarray:
    return (1.0 - delta) * hidden + delta * prev_rhs


@dataclass
class StepTrace:
    E: float
    delta: float
    hidden: np.ndarray
    lhs_next: np.ndarray


def _seed_rngs(seed, n: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _as_words(words) -> np.ndarray:
    arr = np.asarray([tuple(w) for w in words], dtype=int)
    if arr.ndim != 2:
        raise ValueError("words in one batch must share a length")
    return arr


class Tracx2Net:
    """78-39-78 autoencoder over (LHS, RHS) interval codes.

    ``mode="rae"`` pins Delta to 0 when forming the next LHS, so the hidden
    state is always recycled; learning is otherwise identical.
    """

    kind = "tracx2"

    def __init__(self, hp: Hyperparams | None = None, seed=None, encoding: str = "ordinal",
                 mode: str = "tracx2"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.hp = hp or Hyperparams()
        self.encoding = encoding
        self.mode = mode
        self.codes = code_table(encoding)
        n, h = CODE_SIZE, self.hp.hidden_size
        if h != n:
            raise ValueError("hidden layer must match the code length")
        rng = np.random.default_rng(seed)
        r = self.hp.weight_init_range
        self.W_ih = rng.uniform(-r, r, size=(h, 2 * n + 1))
        self.W_ho = rng.uniform(-r, r, size=(2 * n, h + 1))
        self.check_finite = True

    # -- single-pair passes -------------------------------------------------

    def forward(self, lhs: np.ndarray, rhs: np.ndarray):
        x = np.concatenate([lhs, rhs])
        hidden = activation(self.W_ih[:, :-1] @ x + self.W_ih[:, -1])
        output = activation(self.W_ho[:, :-1] @ hidden + self.W_ho[:, -1])
        return hidden, output, float(np.mean(np.abs(x - output)))

    def gradients(self, lhs: np.ndarray, rhs: np.ndarray, offset: float | None = None):
        """Gradients of 0.5 * sum((output - input)**2); the input is the fixed target."""
        if offset is None:
            offset = self.hp.fahlman_offset
        x = np.concatenate([lhs, rhs])
        xb = np.append(x, 1.0)
        net_h = self.W_ih @ xb
        hidden = activation(net_h)
        hb = np.append(hidden, 1.0)
        net_o = self.W_ho @ hb
        output = activation(net_o)
        g_o = (output - x) * (activation_deriv(net_o) + offset)
        g_h = (self.W_ho[:, :-1].T @ g_o) * (activation_deriv(net_h) + offset)
        E = float(np.mean(np.abs(x - output)))
        return np.outer(g_h, xb), np.outer(g_o, hb), hidden, E

    def backprop_step(self, lhs: np.ndarray, rhs: np.ndarray, gate: bool = True) -> StepTrace:
        gW_ih, gW_ho, hidden, E = self.gradients(lhs, rhs)
        lr = self.hp.learning_rate
        self.W_ih -= lr * gW_ih
        self.W_ho -= lr * gW_ho
        if self.check_finite and not (np.isfinite(self.W_ih).all() and np.isfinite(self.W_ho).all()):
            raise NumericError(f"non-finite weights after a step with E={E}")
        delta = float(delta_from_error(E, self.hp.temperature)) if gate and self.mode == "tracx2" else 0.0
        return StepTrace(E, delta, hidden, next_lhs(hidden, delta, rhs))

    # -- training -----------------------------------------------------------

    def train_sequence(self, intervals: Sequence[int], trace: list | None = None) -> None:
        """One pass over a song; LHS/RHS state starts fresh from its first two intervals."""
        if len(intervals) < 2:
            warnings.warn("sequence with fewer than 2 intervals skipped", stacklevel=2)
            return
        idx = np.asarray(intervals, dtype=np.int64) - MIN_INTERVAL
        buf = np.empty((len(idx) - 1, 2)) if trace is not None else _NO_TRACE
        hp = self.hp
        _kernels.tracx2_train_sequence(self.W_ih, self.W_ho, idx, self.codes, hp.learning_rate,
                                       hp.fahlman_offset, hp.temperature, self.mode == "tracx2", buf, 0)
        self._check()
        if trace is not None:
            trace.extend(map(tuple, buf))

    def train_sequence_stepwise(self, intervals: Sequence[int], trace: list | None = None) -> None:
        """Same as ``train_sequence`` but driven by ``backprop_step`` in numpy (slow reference)."""
        codes = self.codes
        idx = np.asarray(intervals, dtype=int) - MIN_INTERVAL
        lhs = codes[idx[0]]
        for t in range(1, len(idx)):
            rhs = codes[idx[t]]
            step = self.backprop_step(lhs, rhs)
            if trace is not None:
                trace.append((step.E, step.delta))
            lhs = step.lhs_next

    def _check(self):
        if self.check_finite and not (np.isfinite(self.W_ih).all() and np.isfinite(self.W_ho).all()):
            raise NumericError("non-finite weights after training")

    def fit(self, corpus: Corpus | Iterable[Song], epochs: int | None = None, seed=None,
            trace: list | None = None) -> "Tracx2Net":
        """Per epoch, songs in a fresh random order; state resets at each song."""
        epochs = self.hp.epochs if epochs is None else epochs
        songs = list(corpus)
        rng = np.random.default_rng(seed)
        for _ in range(epochs):
            for i in rng.permutation(len(songs)):
                self.train_sequence(songs[i].intervals, trace)
        return self

    # -- frozen-weight scoring ----------------------------------------------

    def _run_words(self, words) -> tuple[np.ndarray, np.ndarray]:
        """Batched word pass.  Returns (per-step errors (B, n-1), final hidden (B, 39))."""
        arr = _as_words(words)
        if arr.shape[1] < 2:
            raise ValueError("a word needs at least two intervals to be scored")
        codes = self.codes[arr - MIN_INTERVAL]  # (B, n, 39)
        Wl, Wr, bh = self.W_ih[:, :CODE_SIZE], self.W_ih[:, CODE_SIZE:-1], self.W_ih[:, -1]
        Wo, bo = self.W_ho[:, :-1], self.W_ho[:, -1]
        lhs = codes[:, 0]
        errs = []
        for t in range(1, arr.shape[1]):
            rhs = codes[:, t]
            hidden = activation(lhs @ Wl.T + rhs @ Wr.T + bh)
            out = activation(hidden @ Wo.T + bo)
            E = np.mean(np.abs(np.concatenate([lhs, rhs], axis=1) - out), axis=1)
            errs.append(E)
            if self.mode == "tracx2":
                delta = delta_from_error(E, self.hp.temperature)[:, None]
            else:
                delta = np.zeros((len(E), 1))
            lhs = next_lhs(hidden, delta, rhs)
        return np.stack(errs, axis=1), hidden

    def word_errors(self, words) -> np.ndarray:
        return self._run_words(words)[0].mean(axis=1)

    def hidden_reps(self, words) -> np.ndarray:
        return self._run_words(words)[1]

    def step_errors(self, word) -> np.ndarray:
        return self._run_words([word])[0][0]

    # -- persistence --------------------------------------------------------

    def weights(self) -> dict[str, np.ndarray]:
        return {"W_ih": self.W_ih, "W_ho": self.W_ho}

    def copy(self):
        twin = object.__new__(type(self))
        twin.__dict__.update(self.__dict__)
        for k, v in self.weights().items():
            setattr(twin, k, v.copy())
        return twin


class SrnNet:
    """Elman network predicting the next interval code from the current one
    plus a copy of the previous hidden state."""

    kind = "srn"
    mode = "srn"

    def __init__(self, hp: Hyperparams | None = None, seed=None, encoding: str = "ordinal"):
        self.hp = hp or Hyperparams()
        self.encoding = encoding
        self.codes = code_table(encoding)
        n, h = CODE_SIZE, self.hp.hidden_size
        rng = np.random.default_rng(seed)
        r = self.hp.weight_init_range
        self.W = rng.uniform(-r, r, size=(h, n + h + 1))
        self.V = rng.uniform(-r, r, size=(n, h + 1))
        self.check_finite = True

    def forward(self, item: np.ndarray, context: np.ndarray):
        hidden = activation(self.W[:, :-1] @ np.concatenate([item, context]) + self.W[:, -1])
        output = activation(self.V[:, :-1] @ hidden + self.V[:, -1])
        return hidden, output

    def gradients(self, item, context, target, offset: float | None = None):
        if offset is None:
            offset = self.hp.fahlman_offset
        xb = np.concatenate([item, context, [1.0]])
        net_h = self.W @ xb
        hidden = activation(net_h)
        hb = np.append(hidden, 1.0)
        net_o = self.V @ hb
        output = activation(net_o)
        g_o = (output - target) * (activation_deriv(net_o) + offset)
        g_h = (self.V[:, :-1].T @ g_o) * (activation_deriv(net_h) + offset)
        E = float(np.mean(np.abs(target - output)))
        return np.outer(g_h, xb), np.outer(g_o, hb), hidden, E

    def train_sequence(self, intervals: Sequence[int], trace: list | None = None) -> None:
        """Context starts at 0 for every song; no backpropagation through time."""
        if len(intervals) < 2:
            warnings.warn("sequence with fewer than 2 intervals skipped", stacklevel=2)
            return
        idx = np.asarray(intervals, dtype=np.int64) - MIN_INTERVAL
        buf = np.empty((len(idx) - 1, 2)) if trace is not None else _NO_TRACE
        _kernels.srn_train_sequence(self.W, self.V, idx, self.codes, self.hp.learning_rate,
                                    self.hp.fahlman_offset, buf, 0)
        if self.check_finite and not (np.isfinite(self.W).all() and np.isfinite(self.V).all()):
            raise NumericError("non-finite weights after training")
        if trace is not None:
            trace.extend(map(tuple, buf))

    def train_sequence_stepwise(self, intervals: Sequence[int], trace: list | None = None) -> None:
        idx = np.asarray(intervals, dtype=int) - MIN_INTERVAL
        context = np.zeros(self.hp.hidden_size)
        lr = self.hp.learning_rate
        for t in range(len(idx) - 1):
            gW, gV, hidden, E = self.gradients(self.codes[idx[t]], context, self.codes[idx[t + 1]])
            self.W -= lr * gW
            self.V -= lr * gV
            if trace is not None:
                trace.append((E, float("nan")))
            context = hidden

    def fit(self, corpus, epochs: int | None = None, seed=None, trace: list | None = None) -> "SrnNet":
        epochs = self.hp.epochs if epochs is None else epochs
        songs = list(corpus)
        rng = np.random.default_rng(seed)
        for _ in range(epochs):
            for i in rng.permutation(len(songs)):
                self.train_sequence(songs[i].intervals, trace)
        return self

    def _run_words(self, words):
        """Context starts at 0.  Returns (prediction errors (B, n-1), hidden after the last item)."""
        arr = _as_words(words)
        if arr.shape[1] < 2:
            raise ValueError("a word needs at least two intervals to be scored")
        codes = self.codes[arr - MIN_INTERVAL]
        n = CODE_SIZE
        Wi, Wc, bh = self.W[:, :n], self.W[:, n:-1], self.W[:, -1]
        Vo, bo = self.V[:, :-1], self.V[:, -1]
        context = np.zeros((arr.shape[0], self.hp.hidden_size))
        errs = []
        for t in range(arr.shape[1]):
            hidden = activation(codes[:, t] @ Wi.T + context @ Wc.T + bh)
            if t + 1 < arr.shape[1]:
                out = activation(hidden @ Vo.T + bo)
                errs.append(np.mean(np.abs(codes[:, t + 1] - out), axis=1))
            context = hidden
        return np.stack(errs, axis=1), hidden

    def word_errors(self, words) -> np.ndarray:
        return self._run_words(words)[0].mean(axis=1)

    def hidden_reps(self, words) -> np.ndarray:
        return self._run_words(words)[1]

    def weights(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "V": self.V}

    copy = Tracx2Net.copy


def make_model(model: str, seed=None, encoding: str = "ordinal", hp: Hyperparams | None = None):
    if model == "srn":
        return SrnNet(hp, seed=seed, encoding=encoding)
    if model in MODES:
        return Tracx2Net(hp, seed=seed, encoding=encoding, mode=model)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def train_model(model: str, corpus, seed, epochs: int | None = None, encoding: str = "ordinal",
                hp: Hyperparams | None = None, trace: list | None = None):
    """Fresh net trained on ``corpus``.  One seed drives both the initial
    weights and the song shuffling, through independent child streams."""
    init_rng, order_rng = _seed_rngs(seed, 2)
    net = make_model(model, seed=init_rng, encoding=encoding, hp=hp)
    return net.fit(corpus, epochs=epochs, seed=order_rng, trace=trace)


# --- functional aliases ---------------------------------------------------------

def train_corpus(net: Tracx2Net, corpus, epochs: int | None = None, mode: str | None = None,
                 seed=None, trace: list | None = None) -> Tracx2Net:
    if mode is not None:
        net.mode = mode
    return net.fit(corpus, epochs=epochs, seed=seed, trace=trace)


def word_error(net, word: Sequence[int], mode: str | None = None) -> float:
    if mode is not None and mode != net.mode:
        net = net.copy()
        net.mode = mode
    return float(net.word_errors([word])[0])


def hidden_rep(net, word: Sequence[int], mode: str | None = None) -> np.ndarray:
    if mode is not None and mode != net.mode:
        net = net.copy()
        net.mode = mode
    return net.hidden_reps([word])[0]


def srn_train(net: SrnNet, corpus, epochs: int | None = None, seed=None) -> SrnNet:
    return net.fit(corpus, epochs=epochs, seed=seed)


def srn_word_error(net: SrnNet, word: Sequence[int]) -> float:
    return float(net.word_errors([word])[0])


def srn_hidden_rep(net: SrnNet, word: Sequence[int]) -> np.ndarray:
    return net.hidden_reps([word])[0]


# --- snapshots -------------------------------------------------------------------
#
# Plain text, one field per line:
#   tracx2-snapshot 1
#   kind <tracx2|srn>, mode <tracx2|rae|srn>, encoding <ordinal|onehot>
#   hp.<name> <value>            (one line per hyperparameter)
#   matrix <name> <rows> <cols>
#   <rows lines of cols space-separated floats, %.17g, row-major>

SNAPSHOT_MAGIC = "tracx2-snapshot 1"


def save_snapshot(net, path: str | Path) -> None:
    lines = [SNAPSHOT_MAGIC, f"kind {net.kind}", f"mode {net.mode}", f"encoding {net.encoding}"]
    for k, v in asdict(net.hp).items():
        lines.append(f"hp.{k} {v!r}")
    for name, W in net.weights().items():
        lines.append(f"matrix {name} {W.shape[0]} {W.shape[1]}")
        lines.extend(" ".join("%.17g" % x for x in row) for row in W)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def load_snapshot(path: str | Path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    meta, hp_vals, mats = {}, {}, {}
    hp_types = {f.name: f.type for f in fields(Hyperparams)}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        if key == "matrix":
            name, r, c = rest.split()
            r, c = int(r), int(c)
            mats[name] = np.array([[float(x) for x in lines[i + 1 + j].split()] for j in range(r)]).reshape(r, c)
            i += 1 + r
            continue
        if key.startswith("hp."):
            name = key[3:]
            hp_vals[name] = int(rest) if hp_types[name] in (int, "int") else float(rest)
        else:
            meta[key] = rest
        i += 1
    hp = Hyperparams(**hp_vals)
    if meta["kind"] == "srn":
        net = SrnNet(hp, seed=0, encoding=meta["encoding"])
    else:
        net = Tracx2Net(hp, seed=0, encoding=meta["encoding"], mode=meta["mode"])
    for name, W in mats.items():
        setattr(net, name, W)
    return net
