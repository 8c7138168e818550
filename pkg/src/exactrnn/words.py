"""Binary words, exact encodings, and bit streams.

Everything downstream (network simulation, machine compilation, the
stochastic procedures) manipulates stack contents and probabilities as
exact rationals produced here.  Two encoders are exposed:

* ``delta2``: each bit b contributes (b+1)/2^(i+1).  Values can exceed 1
  for longer words; the function is an encoder only and is never
  inverted.
* ``delta4``: each bit b contributes (2b+1)/4^(i+1).  Injective over all
  finite words, and push/pop/top/emptiness become affine maps composed
  with the saturation ``sigma``, which is what lets a stack live inside
  a single network cell.

Rationals are gmpy2.mpq when available (much faster), with
fractions.Fraction as a pure-python fallback.
"""

import fractions
import itertools
import random
import threading

try:
    from gmpy2 import mpq as _ratclass
except ImportError:  # pragma: no cover - exercised only without gmpy2
    from fractions import Fraction as _ratclass

from .errors import NotInImage

Rat = _ratclass


def as_rat(x):
    """Coerce x to an exact rational.

    Accepts ints, rational strings like "253/256", Fractions, and
    rationals themselves.  Floats are rejected: silently converting
    0.1 to 3602879701896397/36028797018963968 is never what a caller
    wants in an exactness-first package.
    """
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a string or Fraction")
    if isinstance(x, _ratclass):
        return x
    if isinstance(x, (int, str)):
        return _ratclass(x)
    if isinstance(x, fractions.Fraction):
        return _ratclass(x.numerator) / x.denominator
    # last resort: objects exposing numerator/denominator
    try:
        return _ratclass(x.numerator) / _ratclass(x.denominator)
    except AttributeError:
        raise TypeError(f"cannot interpret {type(x).__name__} as a rational")


def rat_str(q):
    """Canonical text form: "a/b" in lowest terms, or just "a"."""
    q = as_rat(q)
    return str(q)


ZERO = as_rat(0)
ONE = as_rat(1)


def sigma(x):
    """Saturated-linear activation: clamp to [0, 1]."""
    if x <= 0:
        return ZERO
    if x >= 1:
        return ONE
    return x


def check_bitword(w):
    if not isinstance(w, str) or (w and set(w) - {"0", "1"}):
        raise ValueError(f"not a bit word: {w!r}")
    return w


def words_of_length(n):
    """All binary words of length n in lexicographic order."""
    for bits in itertools.product("01", repeat=n):
        yield "".join(bits)


# --------------------------------------------------------------------------
# encoders


def binary_value(w):
    """Ordinary binary fraction 0.w = sum w_i / 2^(i+1).

    This is the probability semantics: a length-L word corresponds to
    the dyadic V/2^L where V is the word read as an integer.
    """
    check_bitword(w)
    if not w:
        return ZERO
    return _ratclass(int(w, 2)) / 2 ** len(w)


def delta2(w):
    """Base-2 encoder with digit set {1, 2}: sum (w_i + 1)/2^(i+1).

    Not injective across lengths and not bounded by 1 (e.g. "11" maps
    to 3/2); exposed exactly as defined, encoder only.
    """
    check_bitword(w)
    total = ZERO
    p = ONE
    for c in w:
        p = p / 2
        total += (int(c) + 1) * p
    return total


def delta4(w):
    """Base-4 encoder with digit set {1, 3}: sum (2 w_i + 1)/4^(i+1).

    Injective on finite words; nonempty words land in [1/4, 1).
    """
    check_bitword(w)
    total = ZERO
    p = ONE
    for c in w:
        p = p / 4
        total += (2 * int(c) + 1) * p
    return total


def _decode_step(r):
    """One greedy digit extraction; returns (bit, remainder) or raises."""
    if as_rat(1) / 4 <= r < as_rat(1) / 2:
        return "0", 4 * r - 1
    if as_rat(3) / 4 <= r < 1:
        return "1", 4 * r - 3
    raise NotInImage(f"{r} starts no digit-{{1,3}} base-4 expansion")


def delta4_decode(q, n):
    """First n bits of the word (or stream prefix) that delta4 maps to q.

    The encoded object may be longer than n; only n digits are
    extracted and the remainder is not inspected further.  Raises
    NotInImage when q cannot be written as a depth-n expansion over
    digits {1, 3}, including the case where the word ends early.
    """
    r = as_rat(q)
    out = []
    for _ in range(n):
        if r == 0:
            raise NotInImage("word ends before requested depth")
        bit, r = _decode_step(r)
        out.append(bit)
    return "".join(out)


def delta4_decode_all(q, max_digits=64):
    """Decode until the remainder hits 0 exactly (finite words only).

    Raises NotInImage if no terminating digit-{1,3} expansion exists
    within max_digits; used to sanity-check that traced stack cells
    always hold encoded words.
    """
    r = as_rat(q)
    out = []
    for _ in range(max_digits):
        if r == 0:
            return "".join(out)
        bit, r = _decode_step(r)
        out.append(bit)
    if r == 0:
        return "".join(out)
    raise NotInImage(f"no terminating expansion within {max_digits} digits")


# --------------------------------------------------------------------------
# stack arithmetic on encoded contents
#
# These are the reference semantics that the compiled circuits must
# reproduce wire-for-wire; they are total on [0,1] but only meaningful
# on delta4 images.


def stack_top(q):
    """Top bit of the encoded stack: sigma(4q - 2)."""
    return sigma(4 * as_rat(q) - 2)


def stack_push0(q):
    """Push 0: sigma(q/4 + 1/4)."""
    return sigma(as_rat(q) / 4 + as_rat(1) / 4)


def stack_push1(q):
    """Push 1: sigma(q/4 + 3/4)."""
    return sigma(as_rat(q) / 4 + as_rat(3) / 4)


def stack_pop(q):
    """Pop: sigma(4q - 2 top(q) - 1); empty stacks stay empty."""
    q = as_rat(q)
    return sigma(4 * q - 2 * stack_top(q) - 1)


def stack_empty(q):
    """Nonemptiness flag, sigma(4q): 1 for nonempty contents, 0 for empty.

    The name follows the operation family ("emptiness of the stack");
    note the polarity: it answers "is there anything here".
    """
    return sigma(4 * as_rat(q))


# --------------------------------------------------------------------------
# truncation


def trunc_frac(q, bits):
    """Truncate toward zero at 2^-bits resolution.

    Matches chopping a binary expansion after `bits` fractional digits,
    for either sign.
    """
    q = as_rat(q)
    scaled = q * 2 ** bits
    n, d = scaled.numerator, scaled.denominator
    whole = abs(n) // d
    if n < 0:
        whole = -whole
    return _ratclass(whole) / 2 ** bits


# --------------------------------------------------------------------------
# bit streams


class BitStream:
    """Deterministic, memoized stream of bits indexed from 0.

    Construct through the factories; `bit(i)` is repeatable, `prefix(n)`
    is the first n bits as a word.  `value` is the exact binary-fraction
    value sum bit(i)/2^(i+1) when a closed form is known (finite-tail and
    eventually-periodic streams), else None.  `mathematical` is False
    for PRNG-backed streams, which exist for tests and sampling, not as
    mathematical objects.
    """

    def __init__(self, fn, value=None, spec=None, mathematical=True):
        self._fn = fn
        self._memo = []
        self._lock = threading.Lock()
        self.value = value
        self._spec = spec
        self.mathematical = mathematical

    def bit(self, i):
        if i < 0:
            raise IndexError(i)
        if i >= len(self._memo):
            with self._lock:
                while len(self._memo) <= i:
                    b = 1 if self._fn(len(self._memo)) else 0
                    self._memo.append(b)
        return self._memo[i]

    def prefix(self, n):
        if n > 0:
            self.bit(n - 1)
        return "".join(str(b) for b in self._memo[:n])

    # ---------------------------------------------------------- factories

    @classmethod
    def from_word(cls, w, tail_bit=0):
        """Finite word followed by a constant tail (default zeros)."""
        check_bitword(w)
        if tail_bit not in (0, 1):
            raise ValueError("tail_bit must be 0 or 1")
        val = binary_value(w)
        if tail_bit:
            val += _ratclass(1) / 2 ** len(w)
        fn = lambda i, _w=w, _t=tail_bit: int(_w[i]) if i < len(_w) else _t
        return cls(fn, value=val, spec={"kind": "word", "word": w, "tail": tail_bit})

    @classmethod
    def from_periodic(cls, head, cycle):
        """Eventually periodic stream head cycle cycle cycle ..."""
        check_bitword(head)
        check_bitword(cycle)
        if not cycle:
            raise ValueError("cycle must be nonempty; use from_word for finite tails")
        cval = _ratclass(int(cycle, 2)) / (2 ** len(cycle) - 1)
        val = binary_value(head) + cval / 2 ** len(head)

        def fn(i, _h=head, _c=cycle):
            return int(_h[i]) if i < len(_h) else int(_c[(i - len(_h)) % len(_c)])

        return cls(fn, value=val, spec={"kind": "periodic", "head": head, "cycle": cycle})

    @classmethod
    def from_rational(cls, q):
        """Binary expansion of q in [0, 1].

        Dyadic rationals get the terminating expansion (3/4 -> 1100...);
        q = 1 is the all-ones stream.
        """
        q = as_rat(q)
        if not 0 <= q <= 1:
            raise ValueError(f"{q} outside [0, 1]")
        state = {"r": q, "bits": []}

        def fn(i):
            bits = state["bits"]
            while len(bits) <= i:
                r2 = state["r"] * 2
                b = 1 if r2 >= 1 else 0
                state["r"] = r2 - b
                bits.append(b)
            return bits[i]

        return cls(fn, value=q, spec={"kind": "rational", "value": rat_str(q)})

    @classmethod
    def from_function(cls, fn, value=None):
        """Arbitrary algorithmic stream; not serializable."""
        return cls(lambda i: 1 if fn(i) else 0, value=value, spec=None)

    @classmethod
    def from_prng(cls, seed):
        """Seeded pseudo-random bits; repeatable but flagged non-mathematical."""
        rng = random.Random(seed)
        state = {"bits": []}

        def fn(i):
            bits = state["bits"]
            while len(bits) <= i:
                bits.append(rng.getrandbits(1))
            return bits[i]

        return cls(fn, value=None, spec={"kind": "prng", "seed": seed},
                   mathematical=False)

    # ------------------------------------------------------ serialization

    def to_json(self):
        if self._spec is None:
            raise ValueError("stream has no serializable description")
        return dict(self._spec)

    @classmethod
    def from_json(cls, d):
        kind = d.get("kind")
        if kind == "word":
            return cls.from_word(d["word"], tail_bit=d.get("tail", 0))
        if kind == "periodic":
            return cls.from_periodic(d["head"], d["cycle"])
        if kind == "rational":
            return cls.from_rational(as_rat(d["value"]))
        if kind == "prng":
            return cls.from_prng(d["seed"])
        raise ValueError(f"unknown stream kind {kind!r}")

    def __repr__(self):
        tag = self._spec["kind"] if self._spec else "function"
        return f"<BitStream {tag} {self.prefix(min(12, len(self._memo) or 8))}...>"
