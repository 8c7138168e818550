"""Analog/evolving/stochastic semantics and the cross-simulations.

Ground truth comes from three independent sources: partial sums of the
digit series for stream encodings, the two-tape advice interpreter for
the compiled analog and evolving networks, and hand-computed coin-tree
probabilities for the stochastic runners (majority of three at p,
binomial tails for amplification).
"""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exactrnn.augmented import (
    Algo4Result,
    AnnSpec,
    CalibrationResult,
    EnnSpec,
    SnnSpec,
    TruncationPolicy,
    algo1_tma_simulate_ann,
    algo2_tma_simulate_enn,
    algo3_ptma_simulate_snn,
    algo4_snn_simulate_ptma,
    amplify_majority,
    amplify_majority_exact,
    ann_from_tma,
    ann_run,
    bernoulli_from_stream,
    calibrate_c,
    ceil_log2,
    count_restarts,
    delta4_stream_value,
    enn_from_tma,
    enn_run,
    exact_run,
    snn_run,
    tma_to_stack,
    tma_to_stack_replay,
    truncate_config,
    truncate_run,
)
from exactrnn.errors import (
    BppViolation,
    BudgetExceeded,
    DegenerateProbability,
    NoConvergence,
    PrecisionExhausted,
    PreconditionViolated,
    ProtocolViolation,
    Timeout,
    UndefinedThreshold,
)
from exactrnn.machines import TmaSpec, advice_from_stream, stack_run, tma_run
from exactrnn.network import RnnConfig, run_word
from exactrnn.words import BitStream, as_rat, delta4
from exactrnn.zoo import (
    advice_eater_tma,
    coin_match_ptm,
    eater_stream,
    first_coin_snn,
    half_stream,
    majority3_snn,
    stream_compare_tma,
    three_quarters_stream,
    two_thirds_stream,
)

R = as_rat

CMP_CORPUS = ["", "1", "10", "1010", "11", "0", "100", "101011"]


def cmp_pair(stream=None):
    m = stream_compare_tma()
    r = stream if stream is not None else two_thirds_stream()
    return m, r


def cmp_advice(r):
    return advice_from_stream(r, lambda n: n + 1)


# ------------------------------------------------------- stream encodings


def test_stream_encoding_closed_forms():
    # oracle: the digit series, summed far enough that the tail bound
    # 4^-40 separates any two candidate closed forms used here
    def partial(stream, digits=40):
        acc = R(0)
        for i in range(digits):
            acc += R(2 * stream.bit(i) + 1) / 4 ** (i + 1)
        return acc

    cases = [
        (BitStream.from_word("11"), R(23) / 24),
        (BitStream.from_word("1"), R(5) / 6),
        (BitStream.from_word("", tail_bit=1), R(1)),
        (BitStream.from_periodic("", "10"), R(13) / 15),
        (BitStream.from_rational(R(2) / 3), R(13) / 15),
        (BitStream.from_rational(R(3) / 4), R(23) / 24),
    ]
    for stream, want in cases:
        got = delta4_stream_value(stream)
        assert got == want
        assert abs(partial(stream) - got) <= R(1) / 4 ** 40


def test_stream_encoding_unknown_for_prng():
    assert delta4_stream_value(BitStream.from_prng(9)) is None


def test_ceil_log2():
    assert [ceil_log2(x) for x in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]
    with pytest.raises(ValueError):
        ceil_log2(0)


# ------------------------------------------------------------- truncation


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(0)
    with pytest.raises(ValueError):
        TruncationPolicy(4, mode="round-nearest")


def test_truncate_config_cuts_toward_zero():
    cfg = RnnConfig(k=1, w_in={(0, 2): R(2) / 3}, w_res={(0, 0): R(-2) / 3},
                    w_out={})
    cut = truncate_config(cfg, 4)
    assert cut.w_in[(0, 2)] == R(5) / 8
    assert cut.w_res[(0, 0)] == R(-5) / 8


def test_truncated_run_matches_exact_at_high_precision():
    m, r = cmp_pair()
    a = ann_from_tma(m, r)
    d = truncate_run(a, TruncationPolicy(4000), "10", 200)
    e = exact_run(a, "10", 200)
    assert (d.kind, d.tau) == (e.kind, e.tau)


def test_calibration_never_converges_on_a_third_weight_spike():
    # exact run spikes through a 1/3-weight cell scaled by 3; any
    # truncation undershoots and parks the output strictly inside (0,1)
    cfg = RnnConfig(k=1, w_in={(0, 2): R(1) / 3}, w_res={},
                    w_out={(0, 0): 3, (1, 0): 3})
    assert run_word(cfg, "", 1).kind == "accept"
    with pytest.raises(NoConvergence):
        calibrate_c(cfg, [""], lambda n: 1, c_max=8)


# ------------------------------------------- analog networks from machines


def test_analog_network_agrees_with_advice_machine():
    m, r = cmp_pair()
    a = ann_from_tma(m, r)
    adv = cmp_advice(r)
    for w in CMP_CORPUS:
        want = tma_run(m, adv, w, 500)
        got = ann_run(a, w, 4000)
        assert got.kind == want.kind, w


def test_analog_run_decision_times_are_stable():
    m, r = cmp_pair()
    a = ann_from_tma(m, r)
    taus = {w: ann_run(a, w, 4000).tau for w in ("", "1", "1010")}
    assert taus == {"": 31, "1": 57, "1010": 135}


def test_analog_bias_cell_must_be_free():
    cfg = RnnConfig(k=1, w_in={(0, 2): R(1) / 2}, w_res={}, w_out={})
    with pytest.raises(ValueError):
        AnnSpec(base=cfg, bias_stream=half_stream())


def test_interval_runner_reports_unthresholdable_nets():
    # sigma(6r - 9/2) lands exactly on 1/2 for r = 5/6: no precision
    # can legalize the output threshold
    base = RnnConfig(k=2, w_in={(1, 2): R("-9/2")}, w_res={(1, 0): 6},
                     w_out={(1, 1): 1})
    a = AnnSpec(base=base, bias_stream=BitStream.from_word("1"))
    with pytest.raises(UndefinedThreshold):
        ann_run(a, "", 4)


def test_interval_runner_exhausts_on_boundary_chasing():
    # sigma(6r - 5) is exactly 0 at r = 5/6, but every finite prefix of
    # the stream leaves the upper interval end above it
    base = RnnConfig(k=2, w_in={(1, 2): -5}, w_res={(1, 0): 6},
                     w_out={(1, 1): 1})
    a = AnnSpec(base=base, bias_stream=BitStream.from_word("1"))
    with pytest.raises(PrecisionExhausted):
        ann_run(a, "", 4, start_bits=16, max_bits=256)


def test_machine_simulation_of_analog_net_is_exact():
    m, r = cmp_pair()
    a = ann_from_tma(m, r)
    f = lambda n: 40 * n + 60
    cal = calibrate_c(a, CMP_CORPUS, f, c_max=16)
    assert isinstance(cal, CalibrationResult)
    assert cal.c == 1 and cal.witness is None
    for w in CMP_CORPUS:
        got = algo1_tma_simulate_ann(a, f, cal.c, w)
        want = ann_run(a, w, f(len(w)))
        assert (got.kind, got.tau) == (want.kind, want.tau), w


def test_machine_simulation_warns_on_empty_budget():
    m, r = cmp_pair()
    a = ann_from_tma(m, r)
    with pytest.warns(UserWarning):
        d = algo1_tma_simulate_ann(a, lambda n: 0, 1, "")
    assert d.kind == "timeout"


# ----------------------------------------- evolving networks from machines


def test_evolving_network_agrees_with_advice_machine():
    m, r = cmp_pair()
    e = enn_from_tma(m, r)
    adv = cmp_advice(r)
    for w in CMP_CORPUS:
        want = tma_run(m, adv, w, 500)
        got = enn_run(e, w, 9000, want_trace=True)
        assert got.kind == want.kind, w
        assert count_restarts(e, got.trace) == 1, w


def test_machine_simulation_of_evolving_net_is_exact():
    m, r = cmp_pair()
    e = enn_from_tma(m, r)
    f = lambda n: 130 * n + 320
    cal = calibrate_c(e, CMP_CORPUS, f, c_max=16)
    assert cal.c == 1
    for w in CMP_CORPUS:
        got = algo2_tma_simulate_enn(e, f, cal.c, w)
        want = enn_run(e, w, f(len(w)))
        assert (got.kind, got.tau) == (want.kind, want.tau), w


def test_replay_time_grows_linearly_in_advice_consumed():
    # fixed n = 20 keeps every probe inside the first capture window,
    # so run time is load + one rebuild + a constant cost per bit eaten
    m = advice_eater_tma()
    w = "01" * 10
    pts = []
    for f in (8, 16, 32, 64):
        e = enn_from_tma(m, eater_stream(f))
        d = enn_run(e, w, 60000, want_trace=True)
        assert d.kind == "accept"
        assert count_restarts(e, d.trace) <= max(1, ceil_log2(f))
        pts.append((f, d.tau))
    xs, ys = zip(*pts)
    mx, my = sum(xs) / 4, sum(ys) / 4
    slope = sum((x - mx) * (y - my) for x, y in pts) / sum(
        (x - mx) ** 2 for x in xs)
    icept = my - slope * mx
    ss_res = sum((y - slope * x - icept) ** 2 for x, y in pts)
    ss_tot = sum((y - my) ** 2 for y in ys)
    assert 1 - ss_res / ss_tot >= 0.9
    assert slope > 0


def test_replay_restarts_more_than_once_when_starved():
    # n = 0 gives a small first capture; demanding 64 bits forces a
    # second rebuild and the answer must survive it
    e = enn_from_tma(advice_eater_tma(), eater_stream(64))
    d = enn_run(e, "", 60000, want_trace=True)
    assert d.kind == "accept"
    assert count_restarts(e, d.trace) == 2


def test_evolving_lift_rejects_three_input_bases():
    cfg = RnnConfig(k=1, w_in={(0, 2): 1}, w_res={}, w_out={}, n_in=3)
    e = EnnSpec(base=cfg, evolving_bias=half_stream())
    with pytest.raises(ValueError):
        enn_run(e, "", 4)


# ------------------------------------------------- transform entry checks


def test_transform_rejects_blank_erasure():
    m = TmaSpec({("q", "1", "*"): ("_", "S", "S", "accept")}, "q")
    with pytest.raises(PreconditionViolated):
        tma_to_stack(m)


def test_transform_rejects_explicit_walk_past_advice():
    m = TmaSpec({("q", "_", "_"): ("_", "S", "R", "accept")}, "q")
    with pytest.raises(PreconditionViolated):
        tma_to_stack(m)
    # the replay flavor never dispatches on the advice end at all
    tma_to_stack_replay(m)


def test_transform_tolerates_wildcard_spillover():
    m = TmaSpec({("q", "_", "*"): ("_", "S", "R", "q2"),
                 ("q2", "_", "*"): ("_", "S", "S", "accept")}, "q")
    sm = tma_to_stack(m)
    d = stack_run(sm, "", 300, init_stacks={"XA": "11"})
    assert d.kind == "accept"


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="01", max_size=6), st.text(alphabet="01", min_size=7,
                                                   max_size=12))
def test_symbolic_transform_tracks_two_tape_runs(w, advbits):
    m = stream_compare_tma()
    r = BitStream.from_word(advbits)
    want = tma_run(m, cmp_advice(r), w, 500)
    got = stack_run(tma_to_stack(m), w, 4000,
                    init_stacks={"XA": r.prefix(len(w) + 1)})
    assert got.kind == want.kind


# ------------------------------------------------------- stochastic runs


def test_majority_net_exact_probabilities():
    r = snn_run(majority3_snn(three_quarters_stream()), "", 4)
    # coin tree: 3 * (3/4)^2 * (1/4) + (3/4)^3
    assert r.probability == R(27) / 32
    assert r.decision.kind == "accept" and r.decision.tau == 4
    r = snn_run(majority3_snn(two_thirds_stream()), "", 4)
    assert r.probability == R(20) / 27
    assert r.decision.kind == "accept"


def test_majority_net_sampled_probability_is_close():
    r = snn_run(majority3_snn(three_quarters_stream()), "", 4,
                mode="mc", trials=2000, seed=7)
    assert abs(r.probability - R(27) / 32) <= R(5) / 100
    assert r.mode == "mc" and r.trials == 2000


def test_fair_coin_net_lands_in_the_forbidden_band():
    with pytest.raises(BppViolation):
        snn_run(first_coin_snn(half_stream()), "", 2)


def test_fixed_runtime_discipline_is_enforced():
    s = majority3_snn(three_quarters_stream())
    with pytest.raises(ProtocolViolation):
        snn_run(s, "", 5)
    with pytest.raises(Timeout):
        snn_run(s, "", 3)


def test_exact_enumeration_respects_its_budget():
    s = majority3_snn(three_quarters_stream())
    with pytest.raises(BudgetExceeded):
        snn_run(s, "", 13)
    with pytest.raises(ValueError):
        snn_run(SnnSpec(base=s.base, prob_stream=BitStream.from_prng(1)),
                "", 4)


def test_stream_coin_matches_its_probability():
    rng = random.Random(5)
    st2 = two_thirds_stream()
    hits = sum(bernoulli_from_stream(rng, st2) for _ in range(20000))
    assert abs(hits / 20000 - 2 / 3) < 0.01


def test_stream_coin_is_exact_on_forced_bits():
    class Feed:
        def __init__(self, bits):
            self.bits = list(bits)

        def getrandbits(self, _n):
            return self.bits.pop(0)

    st2 = two_thirds_stream()          # expansion 101010...
    assert bernoulli_from_stream(Feed([0]), st2) == 1
    assert bernoulli_from_stream(Feed([1, 1]), st2) == 0
    assert bernoulli_from_stream(Feed([1, 0, 0]), st2) == 1


# --------------------------------------------------- cross-simulation 3/4


def test_coin_replacement_is_reproducible_and_close():
    s = majority3_snn(two_thirds_stream())
    f = lambda n: 8
    d1, pc1 = algo3_ptma_simulate_snn(s, f, "", seed=11, paired=True)
    d2, pc2 = algo3_ptma_simulate_snn(s, f, "", seed=11, paired=True)
    assert pc1.choices == pc2.choices and d1.kind == d2.kind
    assert len(pc1.choices) == 8 and len(pc1.ideal) == 8
    diverged = sum(
        algo3_ptma_simulate_snn(s, f, "", seed=1000 + i, paired=True)[1].diverged
        for i in range(600)
    )
    assert diverged / 600 <= 0.25


def test_coin_replacement_unpaired_returns_plain_decision():
    s = majority3_snn(two_thirds_stream())
    d = algo3_ptma_simulate_snn(s, lambda n: 8, "", seed=3)
    assert d.kind in ("accept", "reject", "timeout")


def test_network_simulation_of_coin_machine_runs_all_phases():
    res = algo4_snn_simulate_ptma(coin_match_ptm, two_thirds_stream(),
                                  lambda n: 8, "", seed=42)
    assert isinstance(res, Algo4Result)
    assert res.k_samples == 143          # ceil(10 * 2/9 * 64)
    assert res.pair_budget == 9          # least K with (5/9)^K <= 1/128
    assert len(res.advice_estimate) == 3
    assert res.decision.kind in ("accept", "reject")
    again = algo4_snn_simulate_ptma(coin_match_ptm, two_thirds_stream(),
                                    lambda n: 8, "", seed=42)
    assert again.decision.kind == res.decision.kind
    assert again.advice_estimate == res.advice_estimate


def test_network_simulation_budget_events_stay_rare():
    fails = exhausts = 0
    for i in range(200):
        res = algo4_snn_simulate_ptma(coin_match_ptm, two_thirds_stream(),
                                      lambda n: 8, "", seed=5000 + i)
        fails += res.estimate_failed
        exhausts += res.exhaustions > 0
    assert fails / 200 <= 0.13
    assert exhausts / 200 <= 0.09


def test_network_simulation_rejects_degenerate_coins():
    with pytest.raises(DegenerateProbability):
        algo4_snn_simulate_ptma(coin_match_ptm,
                                BitStream.from_word("", tail_bit=1),
                                lambda n: 4, "", seed=0)
    with pytest.raises(ValueError):
        algo4_snn_simulate_ptma(coin_match_ptm, BitStream.from_prng(2),
                                lambda n: 4, "", seed=0)


# ----------------------------------------------------------- amplification


def test_majority_amplification_exact_tail():
    # binomial tail: sum_{j>=2} C(3,j) p^j (1-p)^(3-j) at p = 27/32
    assert amplify_majority_exact(R(27) / 32, 3) == R(15309) / 16384
    with pytest.raises(ValueError):
        amplify_majority_exact(R(1) / 2, 4)


def test_majority_amplification_votes():
    s = majority3_snn(two_thirds_stream())

    def runner(_i):
        return snn_run(s, "", 4).decision

    assert amplify_majority(runner, 3).kind == "accept"
    with pytest.raises(ValueError):
        amplify_majority(runner, 2)

    from exactrnn.network import Decision
    canned = [Decision("accept"), Decision("timeout"), Decision("reject"),
              Decision("accept"), Decision("accept")]
    assert amplify_majority(canned.__getitem__, 5).kind == "accept"
    assert amplify_majority(lambda i: canned[1], 3).kind == "reject"
