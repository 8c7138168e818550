"""Advice codecs, compressibility checking, and finite diagonalization.

Four tool groups share this module because they all manipulate the same
raw material, bit strings indexed by input length:

* ``check_kfg`` pairs a target stream with a shorter seed stream and a
  decompressor, and verifies on a finite range that every long-enough
  seed prefix regenerates the target prefix within a time budget.
* ``interleave``/``recover_prefix`` pad a stream with separator zeros
  at schedule-determined positions, so that a short prefix of the raw
  stream always suffices to rebuild a long prefix of the padded one.
* ``halving_diagonal`` builds, by repeated minority voting over a
  candidate window, a set of same-length words that no member of a
  given finite family equals.
* ``pad_advice`` and the block codec (``prefix_codec_encode`` /
  ``prefix_codec_decode``) re-package per-length advice words: padding
  stretches advice to a larger size bound behind a self-delimiting
  ones-run, and the block codec concatenates candidate-window
  characteristic words behind two-bit symbols so that one growing
  string serves every input length at once.

Everything here is exact and deterministic; randomness appears only in
the test harnesses that drive these functions.
"""

from dataclasses import dataclass
from typing import Callable

from .errors import (
    BoundViolation,
    MalformedAdvice,
    MalformedInterleaving,
    Mismatch,
    NotASampleLength,
    PreconditionViolated,
    SearchExhausted,
)
from .machines import Advice, SYMBOLS, TmaSpec
from .words import check_bitword


@dataclass(frozen=True)
class BoundFunction:
    """A length-to-length resource bound.

    ``poly_computable`` is a tag supplied by the caller (we cannot
    decide it); ``monotone`` is a claim that validate_reasonable checks
    on its range. Instances are callable."""

    name: str
    fn: Callable[[int], int]
    poly_computable: bool = True
    monotone: bool = True

    def __call__(self, n):
        v = self.fn(n)
        if not isinstance(v, int) or v < 0:
            raise ValueError(f"{self.name}({n}) = {v!r}, want a length")
        return v


# ---------------------------------------------------------------------------
# Compressibility checking


@dataclass(frozen=True)
class Decompressor:
    """Deterministic seed-to-prefix rebuilder.

    ``run(seed, n)`` must return ``(word, steps)`` where word is the
    length-n reconstruction attempt and steps its self-reported cost in
    whatever unit the caller's time bound is denominated in."""

    name: str
    run: Callable[[str, int], tuple]


@dataclass(frozen=True)
class KfgFailure:
    n: int
    m: int
    kind: str  # "mismatch" or "time"
    detail: str


@dataclass(frozen=True)
class KfgReport:
    """Outcome of a finite compressibility check.

    ``exceptions`` lists every target length with at least one failing
    seed length; ``threshold`` is the least length from which the
    checked range is clean (n_max + 1 when even the last length fails).
    Whether finitely many exceptions is "few enough" is the caller's
    call, not ours."""

    n_min: int
    n_max: int
    checks: int
    failures: tuple
    exceptions: tuple
    threshold: int

    @property
    def ok(self):
        return not self.failures

    def lines(self):
        out = [f"kfg range n={self.n_min}..{self.n_max} pairs={self.checks}"]
        for fl in self.failures:
            out.append(f"fail n={fl.n} m={fl.m} {fl.kind}: {fl.detail}")
        if self.exceptions:
            out.append("exceptions " + ",".join(str(n) for n in self.exceptions))
        out.append(f"clean-from {self.threshold}")
        return out


def check_kfg(alpha, beta, d, f, g, n_max, n_min=1, strict=False):
    """Verify that beta's prefixes regenerate alpha's under d.

    For every n in [n_min, n_max] and every m with f(n) <= m <= n_max,
    runs d on beta's m-bit prefix and demands alpha's n-bit prefix back
    within g(n) steps. Records the first failing m per n; with strict
    set, raises Mismatch or BoundViolation at the first failure
    instead of reporting it.
    """
    failures = []
    exceptions = []
    checks = 0
    for n in range(n_min, n_max + 1):
        want = alpha.prefix(n)
        budget = g(n)
        for m in range(f(n), n_max + 1):
            checks += 1
            got, steps = d.run(beta.prefix(m), n)
            if got != want:
                detail = f"{d.name} gave {got!r}, want {want!r}"
                if strict:
                    raise Mismatch(detail)
                failures.append(KfgFailure(n, m, "mismatch", detail))
            elif steps > budget:
                detail = f"{d.name} took {steps} steps, budget {budget}"
                if strict:
                    raise BoundViolation(detail)
                failures.append(KfgFailure(n, m, "time", detail))
            else:
                continue
            exceptions.append(n)
            break
    threshold = max(exceptions) + 1 if exceptions else n_min
    return KfgReport(n_min=n_min, n_max=n_max, checks=checks,
                     failures=tuple(failures), exceptions=tuple(exceptions),
                     threshold=threshold)


# ---------------------------------------------------------------------------
# Reasonable-bound validation


@dataclass(frozen=True)
class ReasonableReport:
    ok: bool
    n_min: int
    n_max: int
    failures: tuple  # of (check, subject, n, detail)

    def lines(self):
        head = f"reasonable range n={self.n_min}..{self.n_max} "
        head += "ok" if self.ok else f"failures={len(self.failures)}"
        out = [head]
        for check, subject, n, detail in self.failures:
            out.append(f"fail {check} {subject} n={n}: {detail}")
        return out


def _scan(found, check, subject, rng, pred, detail):
    for n in rng:
        if not pred(n):
            found.append((check, subject, n, detail(n)))
            return


def validate_reasonable(members, n_max, p_samples=(), n_min=1,
                        dominators=None, closure_witnesses=None):
    """Range-check a finite presentation of an advice-bound class.

    Three obligations per member f: f is non-decreasing and stays at or
    below the identity on [n_min, n_max]; some polynomial-computable
    function (from ``dominators``, default f itself when tagged) sits
    above it; and for each sample polynomial p a witness from
    ``closure_witnesses[(f.name, p.name)]`` sits above n -> f(p(n)) and
    itself behaves like a member on the range. Witnesses are evidence,
    not proofs: everything is checked pointwise on the given range and
    the first offending n per obligation is reported.
    """
    dominators = dominators or {}
    closure_witnesses = closure_witnesses or {}
    failures = []
    rng = range(n_min, n_max + 1)

    def behaves_like_member(f, tag):
        _scan(failures, "monotone", tag, range(n_min + 1, n_max + 1),
              lambda n: f(n - 1) <= f(n),
              lambda n: f"{f(n - 1)} > {f(n)}")
        _scan(failures, "sub-linearity", tag, rng,
              lambda n: f(n) <= n,
              lambda n: f"{f(n)} > {n}")

    for f in members:
        behaves_like_member(f, f.name)
        dom = dominators.get(f.name, f if f.poly_computable else None)
        if dom is None:
            failures.append(("dominance", f.name, n_min,
                             "no polynomial-computable dominator supplied"))
        else:
            if not dom.poly_computable:
                failures.append(("dominance", f.name, n_min,
                                 f"{dom.name} not tagged polynomial-computable"))
            _scan(failures, "dominance", f.name, rng,
                  lambda n: f(n) <= dom(n),
                  lambda n: f"{f(n)} > {dom.name}({n}) = {dom(n)}")
        for p in p_samples:
            wit = closure_witnesses.get((f.name, p.name))
            if wit is None:
                failures.append(("closure", f"{f.name}({p.name})", n_min,
                                 "no witness supplied"))
                continue
            _scan(failures, "closure", f"{f.name}({p.name})", rng,
                  lambda n: f(p(n)) <= wit(n),
                  lambda n: f"{f(p(n))} > {wit.name}({n}) = {wit(n)}")
            behaves_like_member(wit, f"witness {wit.name}")
    return ReasonableReport(ok=not failures, n_min=n_min, n_max=n_max,
                            failures=tuple(failures))


# ---------------------------------------------------------------------------
# Separator interleaving


def interleave(r, g, n):
    """Pad r with separator zeros: block i of r (bits g(i-1) to g(i)-1)
    is followed by one 0, so separator number i lands at position
    g(i) + i. Returns the first g(n) + n bits of the padded stream,
    which end exactly with block n. Assumes g non-decreasing with
    g(n) <= n; blocks may be empty.
    """
    data = r.prefix(g(n))
    parts = []
    prev = 0
    for i in range(n):
        cut = g(i)
        parts.append(data[prev:cut])
        parts.append("0")
        prev = cut
    parts.append(data[prev:])
    return "".join(parts)


def recover_prefix(s_prefix, g, n):
    """Undo interleave: strip the n separators sitting at positions
    g(i) + i and return the g(n) data bits that remain. The input must
    cover at least g(n) + n positions (interleave's own output does).
    """
    check_bitword(s_prefix)
    need = g(n) + n
    if len(s_prefix) < need:
        raise PreconditionViolated(
            f"need {need} interleaved bits to recover {n} blocks, "
            f"got {len(s_prefix)}")
    seps = set()
    for i in range(n):
        p = g(i) + i
        if s_prefix[p] != "0":
            raise MalformedInterleaving(
                f"separator {i} missing at position {p}")
        seps.add(p)
    return "".join(s_prefix[p] for p in range(need) if p not in seps)


def interleave_decompressor(g):
    """The rebuild step for interleaved streams: given enough raw bits,
    regenerate any n-bit prefix of the padded stream by walking the
    separator schedule. Cost is reported as one step per emitted bit.
    """
    def run(seed, n):
        out = []
        i, j = 0, 0
        next_sep = g(0)
        for pos in range(n):
            if pos == next_sep:
                out.append("0")
                i += 1
                next_sep = g(i) + i
            elif j < len(seed):
                out.append(seed[j])
                j += 1
            else:
                out.append("0")
        return "".join(out), n

    return Decompressor(name=f"unzip[{getattr(g, 'name', 'g')}]", run=run)


def identity_decompressor():
    """Seeds that literally are the target: copy n bits through."""
    return Decompressor(name="copy", run=lambda seed, n: (seed[:n], n))


# ---------------------------------------------------------------------------
# Language slices and the halving diagonal


def binary_word(i, n):
    """The i-th length-n word in counting order, most significant bit
    first. Defined for 0 <= i < 2**n."""
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} has no {n}-bit representation")
    return format(i, f"0{n}b") if n else ""


@dataclass(frozen=True)
class LanguageSlice:
    """All members of some language at one fixed word length."""

    n: int
    members: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        for w in self.members:
            check_bitword(w)
            if len(w) != self.n:
                raise ValueError(f"member {w!r} is not {self.n} bits long")

    @property
    def words(self):
        return tuple(sorted(self.members))


def slice_to_line(s):
    """One slice per line: sorted members comma-joined, '-' when empty."""
    return ",".join(s.words) if s.members else "-"


def family_to_text(family):
    return "".join(slice_to_line(s) + "\n" for s in family)


def family_from_text(text, n):
    """Parse one slice per non-blank line; '#' starts a comment."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = () if line == "-" else tuple(p.strip() for p in line.split(","))
        out.append(LanguageSlice(n=n, members=frozenset(words)))
    return out


def halving_diagonal(family, n, f_n):
    """Construct a length-n slice outside the given family.

    Walks the candidate words b(0), ..., b(f_n) in order. At each one,
    the still-live family members vote on whether the candidate is in;
    the output slice sides with the strict minority (excluding the
    candidate on ties) and only the agreeing members stay live. Each
    vote at least halves the live set, so a family of at most 2**f_n
    members is extinct after f_n + 1 votes and the output equals none
    of them.
    """
    if f_n < 0 or f_n + 1 > (1 << n):
        raise PreconditionViolated(
            f"need f_n + 1 = {f_n + 1} distinct length-{n} candidates")
    pool = {frozenset(s.members) for s in family}
    for s in family:
        if s.n != n:
            raise PreconditionViolated(f"family member at length {s.n}, not {n}")
    if len(pool) > (1 << f_n):
        raise PreconditionViolated(
            f"family has {len(pool)} distinct members, cap is 2^{f_n}")
    survivors = list(pool)
    chosen = set()
    for i in range(f_n + 1):
        b = binary_word(i, n)
        inside = [L for L in survivors if b in L]
        outside = [L for L in survivors if b not in L]
        if len(inside) < len(outside):
            chosen.add(b)
            survivors = inside
        else:
            survivors = outside
    return LanguageSlice(n=n, members=frozenset(chosen))


# ---------------------------------------------------------------------------
# Advice padding


def pad_advice(a, g):
    """Stretch advice a (of size f) to size g: each word becomes
    1^(g(n)-f(n)-1) 0 a(n). Needs g(n) > f(n) wherever evaluated; the
    ones-run length varies with n, so the result is not a prefix family
    even when a is.
    """
    def word(n):
        gap = g(n) - a.size(n)
        if gap < 1:
            raise PreconditionViolated(
                f"padding needs g({n}) > f({n}), got gap {gap}")
        return "1" * (gap - 1) + "0" + a(n)

    return Advice(size=lambda n: g(n), word=word, prefix_flag=False)


def unpad_wrapper(m, state="unpad"):
    """Wrap an advice machine so it runs on padded advice: the new
    start state walks the advice head right over the ones-run and the
    closing zero, then hands over to m unchanged. Costs g(n) - f(n)
    extra steps and assumes m never moves its advice head left of its
    own first advice cell.
    """
    taken = {q for (q, _, _) in m.trans}
    taken.update(rule[3] for rule in m.trans.values())
    while state in taken:
        state += "_"
    trans = dict(m.trans)
    for sym in SYMBOLS:
        trans[(state, sym, "1")] = (sym, "S", "R", state)
        trans[(state, sym, "0")] = (sym, "S", "R", m.initial)
    return TmaSpec(trans=trans, initial=state)


# ---------------------------------------------------------------------------
# The block codec

SEPARATOR = "01"
FILLER = "10"


def double_bits(w):
    """The two-symbol alphabet backbone: 0 -> 00, 1 -> 11. Leaves the
    pairs 01 and 10 free for the separator and filler symbols."""
    check_bitword(w)
    return "".join(c + c for c in w)


def compute_ni_sequence(f, g, count, cap=1 << 16):
    """Sample lengths for the block codec.

    Block i encodes a candidate-window characteristic word of
    f(n_i) + 1 bits, two code bits each, plus a two-bit separator.
    Each n_i is the least length (above its predecessor) whose size
    budget g(n_i) holds everything already emitted plus its own block:

        emitted(i-1) + 2 (f(n) + 1) <= g(n)

    where emitted counts all earlier blocks and their separators.
    Minimality comes from the ascending scan; lengths above cap raise
    SearchExhausted.
    """
    seq = []
    emitted = 0
    n = 0
    for _ in range(count):
        while n <= cap and emitted + 2 * (f(n) + 1) > g(n):
            n += 1
        if n > cap:
            raise SearchExhausted(
                f"no sample length below {cap} fits block {len(seq)}")
        seq.append(n)
        emitted += 2 * (f(n) + 1) + 2
        n += 1
    return tuple(seq)


@dataclass(frozen=True)
class PrefixCodeAdvice:
    """Block-coded advice for a family of slices at sample lengths.

    ``core(n)`` is the undecorated code: every block up to length n,
    separator-joined, with a trailing separator exactly when n is not
    itself a sample length. Cores form a literal prefix family.
    ``padded(n)`` extends the core with filler symbols to exactly
    g(n) bits; padding is what breaks literal prefixness, which is why
    both forms are exposed. When g(n) is odd the last filler symbol is
    cut in half and the string ends with a lone 1.
    """

    sample_lengths: tuple
    codes: tuple
    bound: object  # g, callable
    valid_to: int

    def _check(self, n):
        if n < 0 or n > self.valid_to:
            raise ValueError(
                f"advice prepared for lengths 0..{self.valid_to}, asked {n}")

    def core(self, n):
        self._check(n)
        i = sum(1 for m in self.sample_lengths if m <= n)
        body = SEPARATOR.join(self.codes[:i])
        if i and n != self.sample_lengths[i - 1]:
            body += SEPARATOR
        return body

    def padded(self, n):
        body = self.core(n)
        size = self.bound(n)
        gap = size - len(body)
        if gap < 0:
            raise PreconditionViolated(
                f"g({n}) = {size} cannot hold the {len(body)}-bit code; "
                "the size bound must leave separator room past each sample")
        reps = (gap + 1) // 2
        return body + (FILLER * reps)[:gap]

    @property
    def advice(self):
        return Advice(size=self.bound, word=self.padded, prefix_flag=False)


def prefix_codec_encode(slices, f, g, cap=1 << 16):
    """Code a run of slices, one per sample length of (f, g).

    Slice number i must sit at length n_i and draw its members from the
    candidate window b(0), ..., b(f(n_i)); its block is the doubled
    characteristic word of that window. The result serves every length
    up to (not including) the next unprepared sample length, or up to
    cap when no further sample exists below it.
    """
    lengths = compute_ni_sequence(f, g, len(slices), cap=cap)
    codes = []
    for s, n in zip(slices, lengths):
        if s.n != n:
            raise PreconditionViolated(
                f"slice at length {s.n} where sample length {n} expected")
        width = f(n) + 1
        window = [binary_word(j, n) for j in range(width)]
        stray = s.members - set(window)
        if stray:
            raise PreconditionViolated(
                f"members outside the candidate window: {sorted(stray)}")
        codes.append(double_bits(
            "".join("1" if w in s.members else "0" for w in window)))
    try:
        nxt = compute_ni_sequence(f, g, len(slices) + 1, cap=cap)
        valid_to = nxt[-1] - 1
    except SearchExhausted:
        valid_to = cap
    return PrefixCodeAdvice(sample_lengths=lengths, codes=tuple(codes),
                            bound=g, valid_to=valid_to)


def prefix_codec_decode(word, n):
    """Read a slice back out of (possibly padded) block-coded advice.

    Parses two-bit symbols, strips trailing filler, and takes the data
    run after the last separator as the candidate-window flags for
    length n. A bare separator at the end means n sits strictly between
    sample lengths: NotASampleLength. Anything that breaks the symbol
    grammar raises MalformedAdvice.
    """
    check_bitword(word)
    if len(word) % 2:
        if word[-1] != "1":
            raise MalformedAdvice("odd length must end with a half filler, 1")
        word = word[:-1]
    syms = [word[i:i + 2] for i in range(0, len(word), 2)]
    while syms and syms[-1] == FILLER:
        syms.pop()
    if not syms or syms[-1] == SEPARATOR:
        raise NotASampleLength(f"advice ends between blocks at length {n}")
    k = len(syms)
    while k and syms[k - 1] in ("00", "11"):
        k -= 1
    if k and syms[k - 1] != SEPARATOR:
        raise MalformedAdvice("filler symbol inside the code region")
    flags = "".join("1" if s == "11" else "0" for s in syms[k:])
    if len(flags) > (1 << n):
        raise MalformedAdvice(
            f"{len(flags)} candidate flags but only {1 << n} words of length {n}")
    members = frozenset(binary_word(j, n)
                        for j, c in enumerate(flags) if c == "1")
    return LanguageSlice(n=n, members=members)
