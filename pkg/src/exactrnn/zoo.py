"""Small machines, networks, and streams used by tests and the CLI.

Everything here is a fixed, well-understood object with behavior simple
enough to state in one line, so that end-to-end checks have unambiguous
ground truth to compare against.
"""

from math import isqrt

from .machines import PtmSpec, Row, StackMachineSpec, TmSpec, TmaSpec
from .network import RnnConfig
from .augmented import SnnSpec
from .nonuniform import BoundFunction
from .words import BitStream


def parity_tm():
    """Accepts words with an even number of ones."""
    return TmSpec({
        ("even", "0"): ("0", "R", "even"),
        ("even", "1"): ("1", "R", "odd"),
        ("odd", "0"): ("0", "R", "odd"),
        ("odd", "1"): ("1", "R", "even"),
        ("even", "_"): ("_", "S", "accept"),
        ("odd", "_"): ("_", "S", "reject"),
    }, "even")


def parity_oracle(w):
    return w.count("1") % 2 == 0


def dyck_sm():
    """Balanced-bracket words, 0 opening and 1 closing."""
    return StackMachineSpec(stacks=("S",), rows=[
        Row("scan", "0", {}, {"S": "push0"}, "scan"),
        Row("scan", "1", {"S": "0"}, {"S": "pop"}, "scan"),
        Row("scan", "1", {"S": "e"}, {}, "reject"),
        Row("scan", "end", {"S": "e"}, {}, "accept"),
        Row("scan", "end", {"S": "0"}, {}, "reject"),
    ], initial="scan")


def dyck_oracle(w):
    depth = 0
    for ch in w:
        depth += 1 if ch == "0" else -1
        if depth < 0:
            return False
    return depth == 0


def stream_compare_tma():
    """Advice machine accepting words that match the advice prefix
    bit for bit; needs n+1 advice bits on inputs of length n."""
    return TmaSpec({
        ("cmp", "0", "0"): ("0", "R", "R", "cmp"),
        ("cmp", "1", "1"): ("1", "R", "R", "cmp"),
        ("cmp", "0", "1"): ("0", "S", "S", "reject"),
        ("cmp", "1", "0"): ("1", "S", "S", "reject"),
        ("cmp", "_", "*"): ("_", "S", "S", "accept"),
    }, "cmp")


def advice_eater_tma():
    """Ignores its input and eats advice bits until the first zero.

    Against a stream 1^(f-1) 0 ... it consumes exactly f bits, which
    makes it the probe for how run length scales with advice use."""
    trans = {}
    for a in ("0", "1", "_"):
        trans[("eat", a, "1")] = (a, "S", "R", "eat")
        trans[("eat", a, "0")] = (a, "S", "S", "accept")
    return TmaSpec(trans, "eat")


def eater_stream(f):
    """Stream that stops the advice eater after exactly f bits."""
    return BitStream.from_word("1" * (f - 1) + "0")


def majority3_snn(p_stream):
    """Fixed-runtime net accepting when at least two of its first three
    coins land one; decides at step four on every coin pattern."""
    w_res = {
        (1, 0): 1, (2, 1): 1, (3, 2): 1,          # one-hot time markers
        (4, 4): 2, (4, 0): 1,                     # coin latches
        (5, 5): 2, (5, 1): 1,
        (6, 6): 2, (6, 2): 1,
        (7, 4): 1, (7, 5): 1, (7, 6): 1, (7, 3): 2,
        (8, 3): 1,
    }
    w_in = {
        (4, 2): 1, (5, 2): 1, (6, 2): 1,          # stochastic line
        (4, 3): -1, (5, 3): -1, (6, 3): -1,
        (7, 3): -3,
    }
    h0 = [1, 0, 0, 0, 0, 0, 0, 0, 0]
    cfg = RnnConfig(k=9, w_in=w_in, w_res=w_res,
                    w_out={(0, 7): 1, (1, 8): 1}, h0=h0, n_in=3,
                    cell_names=("t0", "t1", "t2", "t3", "coin0", "coin1",
                                "coin2", "verdict", "spike"))
    return SnnSpec(base=cfg, prob_stream=p_stream)


def first_coin_snn(p_stream):
    """Net whose verdict is its very first coin, decided at step two.

    With a fair coin its acceptance probability sits exactly on 1/2,
    inside the forbidden band of the two-thirds rule."""
    cfg = RnnConfig(
        k=5,
        w_in={(2, 2): 1, (2, 3): -1, (3, 3): -1},
        w_res={(1, 0): 1, (2, 0): 1, (3, 2): 1, (3, 1): 1, (4, 1): 1},
        w_out={(0, 3): 1, (1, 4): 1},
        h0=[1, 0, 0, 0, 0], n_in=3,
        cell_names=("t0", "t1", "coin", "verdict", "spike"))
    return SnnSpec(base=cfg, prob_stream=p_stream)


def coin_match_ptm(advice_word):
    """Coin machine that accepts when its first flip equals the first
    advice bit; the advice word parameterizes the machine."""
    want1 = advice_word[0] == "1"
    hit = {("go", "_"): ("_", "S", "accept"),
           ("go", "0"): ("0", "S", "accept"),
           ("go", "1"): ("1", "S", "accept")}
    miss = {("go", "_"): ("_", "S", "reject"),
            ("go", "0"): ("0", "S", "reject"),
            ("go", "1"): ("1", "S", "reject")}
    if want1:
        return PtmSpec(trans0=miss, trans1=hit, initial="go")
    return PtmSpec(trans0=hit, trans1=miss, initial="go")


def three_quarters_stream():
    return BitStream.from_word("11")


def two_thirds_stream():
    return BitStream.from_periodic("", "10")


def half_stream():
    return BitStream.from_word("1")


def log2_bound():
    """Ceiling of log2, with 0 at lengths 0 and 1."""
    return BoundFunction("ceil-log2", lambda n: (n - 1).bit_length() if n > 1 else 0)


def sqrt_bound():
    """Ceiling of the square root, capped at the identity."""
    return BoundFunction(
        "ceil-sqrt",
        lambda n: min(n, isqrt(n) + (isqrt(n) * isqrt(n) < n)))


def identity_bound():
    return BoundFunction("identity", lambda n: n)


def double_bound():
    """Twice the identity; strictly climbing and even, so block codes
    always have separator room."""
    return BoundFunction("double", lambda n: 2 * n)


def square_poly():
    return BoundFunction("square", lambda n: n * n)


def log2_square_witness():
    """Sits above ceil-log2 composed with square: 2 ceil-log2 + 2, which
    stays at or below the identity from length 16 on."""
    f = log2_bound()
    return BoundFunction("twice-log2-plus2", lambda n: 2 * f(n) + 2)
