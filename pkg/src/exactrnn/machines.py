"""Reference interpreters: Turing machines, stack machines, and their
advice-taking and coin-flipping variants.

These run everything symbolically and serve as the ground truth that
network simulations are checked against.  Conventions shared by all of
them:

* tape alphabet is {0, 1, _} with "_" the blank,
* tapes are one-way infinite; moving left at cell 0 is a hard error
  (machines in this package are written so it cannot happen on valid
  inputs),
* the reserved state names "accept" and "reject" halt a run,
* step bounds are explicit everywhere and running out returns (or, for
  probabilistic branches, raises) a timeout.
"""

import math
import random
from dataclasses import dataclass
from typing import Callable

from .errors import (
    BppViolation,
    BudgetExceeded,
    ConsistencyViolation,
    MachineStuck,
    PreconditionViolated,
    Timeout,
)
from .network import Decision
from .words import as_rat, check_bitword

BLANK = "_"
SYMBOLS = ("0", "1", BLANK)
MOVES = ("L", "R", "S")
TERMINALS = ("accept", "reject")


def _check_tm_rule(key, rule, adv=False):
    if adv:
        state, sym, asym = key
        if sym not in SYMBOLS or (asym not in SYMBOLS and asym != "*"):
            raise ValueError(f"bad symbols in rule key {key}")
        write, move, amove, nxt = rule
        if amove not in MOVES:
            raise ValueError(f"bad advice move in rule {key} -> {rule}")
    else:
        state, sym = key
        if sym not in SYMBOLS:
            raise ValueError(f"bad symbol in rule key {key}")
        write, move, nxt = rule
    if write not in SYMBOLS or move not in MOVES:
        raise ValueError(f"bad rule {key} -> {rule}")


class TmSpec:
    """Single-tape machine: trans maps (state, symbol) to
    (written symbol, head move, next state)."""

    def __init__(self, trans, initial):
        for key, rule in trans.items():
            _check_tm_rule(key, rule)
        self.trans = dict(trans)
        self.initial = initial

    def to_json(self):
        return {
            "type": "tm",
            "initial": self.initial,
            "trans": sorted([q, a, b, mv, nq]
                            for (q, a), (b, mv, nq) in self.trans.items()),
        }

    @classmethod
    def from_json(cls, d):
        trans = {(q, a): (b, mv, nq) for q, a, b, mv, nq in d["trans"]}
        return cls(trans=trans, initial=d["initial"])


class TmaSpec:
    """Two-tape advice machine: trans maps (state, main symbol, advice
    symbol) to (written main symbol, main move, advice move, next).
    The advice tape is read-only; "*" in the advice position of a key
    matches any advice symbol (specific keys win)."""

    def __init__(self, trans, initial):
        for key, rule in trans.items():
            _check_tm_rule(key, rule, adv=True)
        self.trans = dict(trans)
        self.initial = initial

    def to_json(self):
        return {
            "type": "tma",
            "initial": self.initial,
            "trans": sorted([q, a, s, b, mv, av, nq]
                            for (q, a, s), (b, mv, av, nq) in self.trans.items()),
        }

    @classmethod
    def from_json(cls, d):
        trans = {(q, a, s): (b, mv, av, nq)
                 for q, a, s, b, mv, av, nq in d["trans"]}
        return cls(trans=trans, initial=d["initial"])


class PtmSpec:
    """Coin-flipping machine: two full transition maps, a fair coin
    picks one of them at every step."""

    def __init__(self, trans0, trans1, initial):
        for t in (trans0, trans1):
            for key, rule in t.items():
                _check_tm_rule(key, rule)
        self.trans0 = dict(trans0)
        self.trans1 = dict(trans1)
        self.initial = initial

    def to_json(self):
        def dump(t):
            return sorted([q, a, b, mv, nq] for (q, a), (b, mv, nq) in t.items())

        return {"type": "ptm", "initial": self.initial,
                "trans0": dump(self.trans0), "trans1": dump(self.trans1)}

    @classmethod
    def from_json(cls, d):
        def load(rows):
            return {(q, a): (b, mv, nq) for q, a, b, mv, nq in rows}

        return cls(trans0=load(d["trans0"]), trans1=load(d["trans1"]),
                   initial=d["initial"])


# --------------------------------------------------------------------------
# plain and advice tape interpreters


def _tape_of(w):
    return {i: c for i, c in enumerate(w)}


def _apply_write_move(tape, head, write, move):
    if write == BLANK:
        tape.pop(head, None)
    else:
        tape[head] = write
    if move == "L":
        if head == 0:
            raise PreconditionViolated("head moved left at the tape edge")
        return head - 1
    if move == "R":
        return head + 1
    return head


def tm_run(m, w, bound):
    """Run to a decision or a step bound; returns a Decision."""
    check_bitword(w)
    tape = _tape_of(w)
    head, state, steps = 0, m.initial, 0
    while steps < bound:
        if state in TERMINALS:
            break
        sym = tape.get(head, BLANK)
        rule = m.trans.get((state, sym))
        if rule is None:
            raise MachineStuck(f"no rule for ({state}, {sym})")
        write, move, state = rule
        steps += 1
        head = _apply_write_move(tape, head, write, move)
        if state in TERMINALS:
            return Decision(state, tau=steps)
    if state in TERMINALS:
        return Decision(state, tau=steps)
    return Decision("timeout")


@dataclass
class Advice:
    """Length-indexed advice: word(n) must have exactly size(n) bits.

    prefix_flag marks families where word(m) is a prefix of word(n)
    for m <= n; nothing enforces it globally (it is checked where the
    constructions rely on it)."""

    size: Callable[[int], int]
    word: Callable[[int], str]
    prefix_flag: bool = False

    def __call__(self, n):
        w = self.word(n)
        check_bitword(w)
        if len(w) != self.size(n):
            raise ValueError(
                f"advice for n={n} has {len(w)} bits, declared {self.size(n)}")
        return w


def advice_from_stream(r, f):
    """Prefix advice: the first f(n) bits of the stream r."""
    return Advice(size=f, word=lambda n: r.prefix(f(n)), prefix_flag=True)


def _tma_once(m, adv_word, w, bound):
    check_bitword(w)
    tape = _tape_of(w)
    head, ahead, state, steps = 0, 0, m.initial, 0
    while steps < bound:
        sym = tape.get(head, BLANK)
        asym = adv_word[ahead] if ahead < len(adv_word) else BLANK
        rule = m.trans.get((state, sym, asym)) or m.trans.get((state, sym, "*"))
        if rule is None:
            raise MachineStuck(f"no rule for ({state}, {sym}, {asym})")
        write, move, amove, state = rule
        steps += 1
        head = _apply_write_move(tape, head, write, move)
        if amove == "L":
            if ahead == 0:
                raise PreconditionViolated("advice head moved left at edge")
            ahead -= 1
        elif amove == "R":
            ahead += 1
        if state in TERMINALS:
            return Decision(state, tau=steps)
    return Decision("timeout")


def tma_run(m, a, w, bound, verify_lengths=None):
    """Advice-machine run on w with advice a(|w|).

    verify_lengths optionally lists lengths n' >= |w| to re-run with
    a(n'); a differing decision raises ConsistencyViolation (the
    soundness condition advice families must satisfy for length
    upgrades to be harmless).
    """
    base = _tma_once(m, a(len(w)), w, bound)
    for n2 in verify_lengths or ():
        if n2 < len(w):
            continue
        other = _tma_once(m, a(n2), w, bound)
        if other.kind != base.kind:
            raise ConsistencyViolation(
                f"decision on {w!r} flips between advice({len(w)}) "
                f"and advice({n2})")
    return base


# --------------------------------------------------------------------------
# stack machines


READS = (None, "0", "1", "end")
OBS_PATTERNS = ("*", "0", "1", "e")
BASE_OPS = ("noop", "push0", "push1", "pop")


class Row:
    """One guarded transition of a stack machine.

    read: None for an internal step, "0"/"1" to consume that input
    symbol, "end" to fire only once input is exhausted.  obs maps stack
    name -> "0"/"1" (top bit) or "e" (empty); unmentioned stacks are
    unconstrained.  ops maps stack name -> operation; unmentioned
    stacks keep their contents.
    """

    def __init__(self, state, read, obs, ops, next_state):
        if read not in READS:
            raise ValueError(f"bad read field {read!r}")
        for pat in obs.values():
            if pat not in OBS_PATTERNS:
                raise ValueError(f"bad observation {pat!r}")
        self.state = state
        self.read = read
        self.obs = dict(obs)
        self.ops = dict(ops)
        self.next_state = next_state

    def __repr__(self):
        return (f"Row({self.state!r}, {self.read!r}, {self.obs!r}, "
                f"{self.ops!r}, {self.next_state!r})")


def _reads_overlap(r1, r2):
    return r1 is None or r2 is None or r1 == r2


def _obs_overlap(o1, o2, stacks):
    for s in stacks:
        p1, p2 = o1.get(s, "*"), o2.get(s, "*")
        if p1 != "*" and p2 != "*" and p1 != p2:
            return False
    return True


class StackMachineSpec:
    """Deterministic machine over named binary stacks.

    Determinism is enforced structurally: within a state no two rows
    may match the same (input status, stack observations) combination.
    extra_ops widens the op vocabulary for internal constructions that
    compile rows directly into network circuitry.
    """

    def __init__(self, stacks, rows, initial, extra_ops=()):
        self.stacks = tuple(stacks)
        if len(set(self.stacks)) != len(self.stacks):
            raise ValueError("duplicate stack names")
        self.extra_ops = frozenset(extra_ops)
        self.initial = initial
        self.rows = list(rows)
        self.rows_by_state = {}
        for row in self.rows:
            for s in row.obs:
                if s not in self.stacks:
                    raise ValueError(f"unknown stack {s!r} in row {row!r}")
            for s, op in row.ops.items():
                if s not in self.stacks:
                    raise ValueError(f"unknown stack {s!r} in row {row!r}")
                name = op[0] if isinstance(op, tuple) else op
                if name not in BASE_OPS and name not in self.extra_ops:
                    raise ValueError(f"unknown op {op!r} in row {row!r}")
            self.rows_by_state.setdefault(row.state, []).append(row)
        for state, rows_here in self.rows_by_state.items():
            for i, r1 in enumerate(rows_here):
                for r2 in rows_here[i + 1:]:
                    if _reads_overlap(r1.read, r2.read) and _obs_overlap(
                            r1.obs, r2.obs, self.stacks):
                        raise ValueError(
                            f"ambiguous rows in state {state!r}: "
                            f"{r1!r} vs {r2!r}")

    def to_json(self):
        def dump_ops(ops):
            return {s: list(op) if isinstance(op, tuple) else op
                    for s, op in ops.items()}

        return {
            "type": "stack-machine",
            "stacks": list(self.stacks),
            "initial": self.initial,
            "extra_ops": sorted(self.extra_ops),
            "rows": [[r.state, "eps" if r.read is None else r.read,
                      r.obs, dump_ops(r.ops), r.next_state]
                     for r in self.rows],
        }

    @classmethod
    def from_json(cls, d):
        rows = []
        for state, read, obs, ops, nxt in d["rows"]:
            ops = {s: tuple(op) if isinstance(op, list) else op
                   for s, op in ops.items()}
            rows.append(Row(state, None if read == "eps" else read,
                            obs, ops, nxt))
        return cls(stacks=d["stacks"], rows=rows, initial=d["initial"],
                   extra_ops=d.get("extra_ops", ()))


def _row_matches(row, status, stacks_content):
    if row.read is not None and row.read != status:
        return False
    for s, pat in row.obs.items():
        if pat == "*":
            continue
        content = stacks_content[s]
        if pat == "e":
            if content:
                return False
        elif not content or content[0] != pat:
            return False
    return True


def stack_run(m, w, bound, init_stacks=None, want_trace=False):
    """Interpret the machine on w; stacks may be preloaded.

    Stack contents are plain words with the top at index 0.  Only the
    base op set is executable here; internal extended ops exist for
    network compilation and have no symbolic semantics.
    """
    check_bitword(w)
    stacks = {s: "" for s in m.stacks}
    for s, content in (init_stacks or {}).items():
        check_bitword(content)
        stacks[s] = content
    pos, state, steps = 0, m.initial, 0
    trace = [] if want_trace else None
    while steps < bound:
        if state in TERMINALS:
            return Decision(state, tau=steps, trace=trace)
        status = w[pos] if pos < len(w) else "end"
        hit = None
        for row in m.rows_by_state.get(state, ()):
            if _row_matches(row, status, stacks):
                hit = row
                break
        if hit is None:
            raise MachineStuck(f"state {state!r}, input {status!r}, "
                               f"stacks {stacks!r}")
        steps += 1
        if hit.read in ("0", "1"):
            pos += 1
        for s, op in hit.ops.items():
            if op == "push0":
                stacks[s] = "0" + stacks[s]
            elif op == "push1":
                stacks[s] = "1" + stacks[s]
            elif op == "pop":
                stacks[s] = stacks[s][1:]
            elif op == "noop":
                pass
            else:
                raise MachineStuck(f"op {op!r} has no symbolic semantics")
        state = hit.next_state
        if want_trace:
            trace.append((steps, state, dict(stacks)))
        if state in TERMINALS:
            return Decision(state, tau=steps, trace=trace)
    return Decision("timeout", trace=trace)


# --------------------------------------------------------------------------
# tape machine -> two-stack machine


def tm_to_stack(m):
    """Rebuild a single-tape machine over two stacks L and R.

    R holds the current cell on top plus everything to its right; L
    holds the cells left of the head, nearest first.  Blank regions are
    simply absent, which is why rules that write a blank over a written
    symbol, or walk right while reading blank, cannot be represented
    and are rejected up front.

    Costs: loading the input takes 2n+2 steps, then each tape step
    costs 1 (move right), 2 (stay) or 3 (move left) stack steps.
    """
    for (q, a), (b, mv, q2) in m.trans.items():
        if b == BLANK and not (a == BLANK and mv in ("L", "S")):
            raise PreconditionViolated(
                f"rule ({q},{a})->({b},{mv},{q2}) erases a written cell")
        if a == BLANK and mv == "R":
            raise PreconditionViolated(
                f"rule ({q},{a})->({b},{mv},{q2}) walks right through blank"
                if b == BLANK else
                f"rule ({q},{a})->({b},{mv},{q2}) extends the tape while "
                "leaving a blank behind")

    def tgt(q):
        return q if q in TERMINALS else f"m_{q}"

    rows = [
        Row("load1", "0", {}, {"L": "push0"}, "load1"),
        Row("load1", "1", {}, {"L": "push1"}, "load1"),
        Row("load1", "end", {}, {}, "load2"),
        Row("load2", None, {"L": "0"}, {"L": "pop", "R": "push0"}, "load2"),
        Row("load2", None, {"L": "1"}, {"L": "pop", "R": "push1"}, "load2"),
        Row("load2", None, {"L": "e"}, {}, tgt(m.initial)),
    ]
    obs_of = {"0": {"R": "0"}, "1": {"R": "1"}, BLANK: {"R": "e"}}
    for (q, a), (b, mv, q2) in sorted(m.trans.items()):
        obs = obs_of[a]
        if mv == "R":
            rows.append(Row(f"m_{q}", None, obs,
                            {"R": "pop", "L": f"push{b}"}, tgt(q2)))
        elif mv == "S":
            mid = f"w_{q}_{a}"
            rows.append(Row(f"m_{q}", None, obs, {"R": "pop"}, mid))
            ops = {"R": f"push{b}"} if b != BLANK else {}
            rows.append(Row(mid, None, {}, ops, tgt(q2)))
        else:
            mid1, mid2 = f"u_{q}_{a}", f"v_{q}_{a}"
            rows.append(Row(f"m_{q}", None, obs, {"R": "pop"}, mid1))
            ops = {"R": f"push{b}"} if b != BLANK else {}
            rows.append(Row(mid1, None, {}, ops, mid2))
            rows.append(Row(mid2, None, {"L": "0"},
                            {"L": "pop", "R": "push0"}, tgt(q2)))
            rows.append(Row(mid2, None, {"L": "1"},
                            {"L": "pop", "R": "push1"}, tgt(q2)))
    return StackMachineSpec(stacks=("L", "R"), rows=rows, initial="load1")


# --------------------------------------------------------------------------
# probabilistic runs


def _ptm_step(trans, state, tape, head):
    sym = tape.get(head, BLANK)
    rule = trans.get((state, sym))
    if rule is None:
        raise MachineStuck(f"no rule for ({state}, {sym})")
    write, move, nxt = rule
    tape2 = dict(tape)
    head2 = _apply_write_move(tape2, head, write, move)
    return nxt, tape2, head2


def _config_key(state, tape, head):
    return state, tuple(sorted(tape.items())), head


def ptm_run_exact(m, w, bound, budget=10 ** 6):
    """Exact acceptance probability by branch enumeration.

    Branches split only where the two transition maps actually lead to
    different configurations, so deterministic stretches cost nothing.
    budget caps the number of split events; bound caps per-branch
    steps (exceeding it raises Timeout since a single unresolved branch
    poisons the whole probability).
    """
    check_bitword(w)
    accept_prob = as_rat(0)
    pending = [(m.initial, _tape_of(w), 0, 0, as_rat(1))]
    splits = 0
    while pending:
        state, tape, head, steps, prob = pending.pop()
        if state == "accept":
            accept_prob += prob
            continue
        if state == "reject":
            continue
        if steps >= bound:
            raise Timeout(f"branch still live after {bound} steps")
        succ0 = _ptm_step(m.trans0, state, tape, head)
        succ1 = _ptm_step(m.trans1, state, tape, head)
        if _config_key(*succ0) == _config_key(*succ1):
            pending.append((*succ0, steps + 1, prob))
        else:
            splits += 1
            if splits > budget:
                raise BudgetExceeded(f"more than {budget} branch splits")
            half = prob / 2
            pending.append((*succ0, steps + 1, half))
            pending.append((*succ1, steps + 1, half))
    return accept_prob


def bpp_decide(p):
    """Two-thirds rule: accept at >= 2/3, reject at <= 1/3, else error."""
    p = as_rat(p)
    if p >= as_rat(2) / 3:
        return "accept"
    if p <= as_rat(1) / 3:
        return "reject"
    raise BppViolation(f"acceptance probability {p} in the forbidden band")


def ptm_run_with_choices(m, w, choices, bound):
    """Deterministic replay: choices supplies the coin for every step.

    choices is a sequence or a callable index -> bit.  Returns
    (Decision, number of coins consumed).
    """
    check_bitword(w)
    take = choices if callable(choices) else choices.__getitem__
    tape = _tape_of(w)
    state, head, steps = m.initial, 0, 0
    while steps < bound:
        if state in TERMINALS:
            return Decision(state, tau=steps), steps
        c = take(steps)
        trans = m.trans1 if c else m.trans0
        sym = tape.get(head, BLANK)
        rule = trans.get((state, sym))
        if rule is None:
            raise MachineStuck(f"no rule for ({state}, {sym})")
        write, move, state = rule
        steps += 1
        head = _apply_write_move(tape, head, write, move)
    if state in TERMINALS:
        return Decision(state, tau=steps), steps
    return Decision("timeout"), steps


@dataclass
class McResult:
    estimate: object          # exact accepts/trials as a rational
    accepts: int
    trials: int
    ci_low: float             # normal-approximation 95% interval,
    ci_high: float            # floats by nature of the approximation


def ptm_run_mc(m, w, bound, trials, seed):
    """Monte Carlo acceptance estimate with split per-trial seeding.

    Trial i draws its coins from a generator seeded by a pure function
    of (seed, i), so runs are reproducible and parallelizable.  A trial
    that fails to halt within bound raises Timeout.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    accepts = 0
    for i in range(trials):
        rng = random.Random(seed * 2 ** 64 + i)
        d, _ = ptm_run_with_choices(m, w, lambda _t: rng.getrandbits(1), bound)
        if d.kind == "timeout":
            raise Timeout(f"trial {i} exceeded {bound} steps")
        if d.kind == "accept":
            accepts += 1
    est = as_rat(accepts) / trials
    phat = accepts / trials
    hw = 1.96 * math.sqrt(max(phat * (1 - phat), 0.0) / trials)
    return McResult(estimate=est, accepts=accepts, trials=trials,
                    ci_low=max(0.0, phat - hw), ci_high=min(1.0, phat + hw))
