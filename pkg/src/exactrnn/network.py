"""Exact simulator for saturated-linear recurrent networks.

A network has K cells, two (optionally three) input lines plus a
constant bias column, a reservoir matrix, and a 2-row readout.  State
update and output:

    h'  =  sigma(W_in (x : 1) + W_res h)        componentwise
    y   =  theta(W_out h')

with sigma the [0,1] clamp and theta the hard threshold.  All
arithmetic is exact rational; there is no floating point anywhere.

Word I/O protocol: bit i of the word arrives as x_0 = w_i with
validation x_1 = 1, input then goes silent (0,0).  The network answers
with a single spike y_1 = 1 whose companion bit y_0 carries
accept/reject; output must be (0,0) strictly before that.
"""

from dataclasses import dataclass
from typing import Optional

from .errors import ProtocolViolation, UndefinedThreshold
from .words import ZERO, as_rat, check_bitword, rat_str, sigma


def theta(v):
    """Hard threshold: 0 for v <= 0, 1 for v >= 1.

    The region strictly between is a hard error: well-formed readouts
    never produce it, so hitting it exposes a miscompiled network
    immediately instead of guessing an answer.
    """
    if v <= 0:
        return 0
    if v >= 1:
        return 1
    raise UndefinedThreshold(f"readout value {v} lies strictly inside (0,1)")


def _as_weight_dict(entries, what, k, ncols=None, nrows=None):
    """Normalize {(i,j): w} / [(i,j,w)] to a dict with validated indices."""
    out = {}
    if hasattr(entries, "items"):
        items = [(key, val) for key, val in entries.items()]
    else:
        items = [((i, j), w) for (i, j, w) in entries]
    for (i, j), w in items:
        rows = nrows if nrows is not None else k
        cols = ncols if ncols is not None else k
        if not (0 <= i < rows and 0 <= j < cols):
            raise ValueError(f"{what}[{i},{j}] out of range")
        w = as_rat(w)
        if w != 0:
            out[(i, j)] = w
    return out


class RnnConfig:
    """Immutable network description plus cached sparse access paths.

    Weights are given sparsely as {(row, col): weight} mappings (or
    (row, col, weight) triples); anything absent is zero.  W_in columns
    are the data line, the validation line, then the bias constant;
    a stochastic third line is enabled with n_in=3.
    """

    def __init__(self, k, w_in, w_res, w_out=None, h0=None, n_in=2, cell_names=None):
        if n_in not in (2, 3):
            raise ValueError("n_in must be 2 or 3")
        if h0 is None:
            h0 = [0] * k
        if w_out is None:
            w_out = {}
        self.k = k
        self.n_in = n_in
        self.w_in = _as_weight_dict(w_in, "w_in", k, ncols=n_in + 1)
        self.w_res = _as_weight_dict(w_res, "w_res", k)
        self.w_out = _as_weight_dict(w_out, "w_out", k, nrows=2)
        self.h0 = tuple(as_rat(v) for v in h0)
        if len(self.h0) != k:
            raise ValueError("h0 length does not match k")
        if any(not (0 <= v <= 1) for v in self.h0):
            raise ValueError("initial state must lie in [0,1]")
        if cell_names is not None:
            cell_names = tuple(cell_names)
            if len(cell_names) != k:
                raise ValueError("cell_names length does not match k")
        self.cell_names = cell_names

        # cached column views for the sparse update loop
        self._bias_map = {i: w for (i, c), w in self.w_in.items() if c == n_in}
        self._pos_bias = sorted(i for i, w in self._bias_map.items() if w > 0)
        self._in_cols = [
            [(i, w) for (i, cc), w in sorted(self.w_in.items()) if cc == c]
            for c in range(n_in)
        ]
        self._res_by_col = {}
        for (i, j), w in self.w_res.items():
            self._res_by_col.setdefault(j, []).append((i, w))
        for lst in self._res_by_col.values():
            lst.sort()
        self._out_rows = (
            sorted((j, w) for (r, j), w in self.w_out.items() if r == 0),
            sorted((j, w) for (r, j), w in self.w_out.items() if r == 1),
        )

    def readout(self, h):
        vals = []
        for row in self._out_rows:
            acc = ZERO
            for j, w in row:
                if h[j]:
                    acc += w * h[j]
            vals.append(theta(acc))
        return tuple(vals)

    # ------------------------------------------------------ serialization

    def to_json(self):
        def triples(d):
            return [[i, j, rat_str(w)] for (i, j), w in sorted(d.items())]

        return {
            "k": self.k,
            "n_in": self.n_in,
            "w_in": triples(self.w_in),
            "w_res": triples(self.w_res),
            "w_out": triples(self.w_out),
            "h0": [rat_str(v) for v in self.h0],
            "cell_names": list(self.cell_names) if self.cell_names else None,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            k=d["k"],
            n_in=d.get("n_in", 2),
            w_in=[(i, j, w) for i, j, w in d["w_in"]],
            w_res=[(i, j, w) for i, j, w in d["w_res"]],
            w_out=[(i, j, w) for i, j, w in d["w_out"]],
            h0=d["h0"],
            cell_names=d.get("cell_names"),
        )


@dataclass(frozen=True)
class NetworkState:
    t: int
    h: tuple


@dataclass
class Decision:
    """Outcome of a protocol run: accept/reject at spike time, or timeout."""

    kind: str                      # "accept" | "reject" | "timeout"
    tau: Optional[int] = None
    trace: Optional[list] = None   # [(t, h, y), ...] when requested

    @property
    def accepted(self):
        if self.kind == "timeout":
            return None
        return self.kind == "accept"

    def trace_lines(self):
        if self.trace is None:
            return
        for t, h, y in self.trace:
            hs = ", ".join(rat_str(v) for v in h)
            yield f"t={t} h=({hs}) y=({y[0]},{y[1]})"


def step(cfg, state, x):
    """One synchronous update; returns (next state, output pair).

    Only cells that receive a nonzero contribution (or carry a positive
    bias) are evaluated; everything else saturates to 0 for free, which
    is what makes large compiled networks cheap to run.
    """
    if len(x) != cfg.n_in:
        raise ValueError(f"expected {cfg.n_in} input lines, got {len(x)}")
    contrib = {}
    for c in range(cfg.n_in):
        xv = x[c]
        if xv:
            for i, w in cfg._in_cols[c]:
                contrib[i] = contrib.get(i, ZERO) + w * xv
    for j, hv in enumerate(state.h):
        if hv:
            col = cfg._res_by_col.get(j)
            if col:
                for i, w in col:
                    contrib[i] = contrib.get(i, ZERO) + w * hv
    h1 = [ZERO] * cfg.k
    live = set(contrib)
    live.update(cfg._pos_bias)
    for i in live:
        v = contrib.get(i, ZERO) + cfg._bias_map.get(i, ZERO)
        if v > 0:
            h1[i] = sigma(v)
    h1 = tuple(h1)
    nxt = NetworkState(state.t + 1, h1)
    return nxt, cfg.readout(h1)


def input_at(w, t, n_in, x2=None):
    """Input vector presented at step index t under the word protocol."""
    if t < len(w):
        base = (int(w[t]), 1)
    else:
        base = (0, 0)
    if n_in == 3:
        if x2 is None:
            bit = 0
        elif callable(x2):
            bit = x2(t)
        else:
            bit = x2[t]
        return base + (bit,)
    return base


def run_word(cfg, w, max_steps, want_trace=False, x2=None):
    """Drive the word protocol and classify the run.

    Feeds w under the validation protocol, then silence, for at most
    max_steps network steps.  Returns a Decision; stray output before
    the spike raises ProtocolViolation.  x2 (sequence or callable) is
    consulted for the stochastic line of three-input networks.
    """
    check_bitword(w)
    if max_steps < len(w):
        raise ValueError("max_steps smaller than the input word")
    state = NetworkState(0, cfg.h0)
    trace = [] if want_trace else None
    for t in range(max_steps):
        state, y = step(cfg, state, input_at(w, t, cfg.n_in, x2))
        if want_trace:
            trace.append((state.t, state.h, y))
        if y[1] == 1:
            kind = "accept" if y[0] == 1 else "reject"
            return Decision(kind, tau=state.t, trace=trace)
        if y[0] != 0:
            raise ProtocolViolation(
                f"output bit fired without validation at t={state.t}")
    return Decision("timeout", trace=trace)
