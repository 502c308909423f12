"""Executable property suites behind the CLI ``verify`` command.

Each suite returns a list of ``Check`` records (name, pass/fail, measured
deviation). The probes here are also the building blocks of the acceptance
tests: single-frame perturbation probes for look-ahead bounds, streaming
vs offline comparison, and beam-search vs brute-force comparison.

The regular-convolution leak check is a negative test: chunk masking with
symmetric convolution MUST leak future context across chunk boundaries, and
the check passes only when that leak is observed.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import ctc
from .conv import conv_dcconv, conv_regular, left_context_frames
from .encoder import (EncoderConfig, cast_weights, encoder_blocks_forward,
                      encoder_forward, init_weights)
from .errors import ConfigError
from .masking import ChunkSpec, DctPolicy, chunk_mask, mask_to_ascii, sample_dct, window_mask
from .rng import Xorshift64
from .streaming import stream_utterance

SUITES = ("masks", "conv", "equivalence", "ctc")

# chi-square critical value at p = 0.01 for 24 degrees of freedom
_CHI2_CRIT_24_P01 = 42.97982

FIG1A_GRID = "\n".join(
    ["####................"] * 4
    + ["########............"] * 4
    + ["############........"] * 4
    + ["....############...."] * 4
    + ["........############"] * 4)

FIG1B_GRID = "\n".join(
    "".join("#" if max(0, r - 8) <= c < min(20, r + 4) else "." for c in range(20))
    for r in range(20))


@dataclass
class Check:
    name: str
    passed: bool
    deviation: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{status}  {self.name}"]
        if self.deviation is not None:
            parts.append(f"max_dev={self.deviation:.3g}")
        if self.tolerance is not None:
            parts.append(f"tol={self.tolerance:.3g}")
        return "  ".join(parts)


def _interval_oracle(t: int, c: int, left: Optional[int]) -> np.ndarray:
    """Vectorized reconstruction of the chunk mask from its interval rule."""
    rows = np.arange(t)[:, None]
    cols = np.arange(t)[None, :]
    idx = rows // c
    end = np.minimum(t, (idx + 1) * c)
    start = np.zeros_like(idx) if left is None else np.maximum(0, idx * c - left)
    return (cols >= start) & (cols < end)


def verify_chunk_mask_intervals(max_t: int = 64, max_c: int = 16) -> int:
    """Exhaustively compare chunk masks against the interval rule.

    Returns the number of masks checked; raises AssertionError on mismatch.
    """
    checked = 0
    for t in range(1, max_t + 1):
        for c in range(1, max_c + 1):
            for left in (0, c, 2 * c, None):
                got = chunk_mask(t, c, left)
                want = _interval_oracle(t, c, left)
                if not np.array_equal(got, want):
                    raise AssertionError(f"chunk_mask mismatch at T={t} C={c} L={left}")
                checked += 1
    return checked


def suite_masks(trials: int = 200, seed: int = 0) -> List[Check]:
    checks = []
    grid_a = mask_to_ascii(chunk_mask(20, 4, 8))
    checks.append(Check("masks.chunk_grid_20_4_8", grid_a == FIG1A_GRID,
                        detail=grid_a))
    grid_b = mask_to_ascii(window_mask(20, 3, 8))
    checks.append(Check("masks.window_grid_20_3_8", grid_b == FIG1B_GRID,
                        detail=grid_b))
    try:
        count = verify_chunk_mask_intervals()
        checks.append(Check("masks.interval_rule_exhaustive", True,
                            detail=f"{count} masks"))
    except AssertionError as exc:
        checks.append(Check("masks.interval_rule_exhaustive", False, detail=str(exc)))

    rng = Xorshift64(seed)
    ok = True
    worst = 0
    for _ in range(trials):
        t = rng.randint(1, 48)
        c = rng.randint(1, 12)
        mask = chunk_mask(t, c, rng.randint(0, 3) * c if rng.uniform() < 0.8 else None)
        for row in range(t):
            ahead = int(np.where(mask[row])[0].max()) - row
            worst = max(worst, ahead - (c - 1))
            ok = ok and ahead <= c - 1
    checks.append(Check("masks.lookahead_bounded_by_chunk", ok, deviation=float(worst),
                        tolerance=0.0))

    policy = DctPolicy(full_context_prob=0.0, seed=seed)
    draws = Xorshift64(policy.seed)
    counts = np.zeros(policy.c_max - policy.c_min + 1)
    for _ in range(1000):
        c, _left = sample_dct(policy, 512, draws)
        counts[c - policy.c_min] += 1
    expected = 1000.0 / counts.size
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    checks.append(Check("masks.dct_chunk_size_uniform_chi2", chi2 < _CHI2_CRIT_24_P01,
                        deviation=chi2, tolerance=_CHI2_CRIT_24_P01))

    full = all(sample_dct(DctPolicy(full_context_prob=1.0, seed=s), 100,
                          Xorshift64(s)) == (100, None) for s in range(20))
    checks.append(Check("masks.dct_full_context_degenerate", full))
    return checks


def conv_receptive_probe(kernel_size: int, mode: str, chunk: Optional[int],
                         t_len: int, seed: int) -> Tuple[int, int]:
    """Single-frame perturbation bounds for one depthwise convolution.

    Returns (worst left reach, worst right reach): how far before/after the
    perturbed frame the output changed, maximized over perturbed frames.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((t_len, 3))
    kern = rng.standard_normal((kernel_size, 3))
    if mode == "regular":
        base = conv_regular(x, kern)
    else:
        base, _ = conv_dcconv(x, kern, chunk if chunk else t_len)
    worst_left = worst_right = 0
    for t in range(t_len):
        xp = x.copy()
        xp[t] += 1.0
        if mode == "regular":
            out = conv_regular(xp, kern)
        else:
            out, _ = conv_dcconv(xp, kern, chunk if chunk else t_len)
        changed = np.where(np.abs(out - base).max(axis=1) > 1e-12)[0]
        if changed.size:
            worst_left = max(worst_left, t - int(changed.min()))
            worst_right = max(worst_right, int(changed.max()) - t)
    return worst_left, worst_right


def suite_conv(trials: int = 30, seed: int = 0) -> List[Check]:
    checks = []
    checks.append(Check("conv.left_context_constants",
                        left_context_frames(5) == 2 and left_context_frames(31) == 15))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        t = int(rng.integers(1, 40))
        d = int(rng.integers(1, 6))
        k = int(rng.choice([1, 3, 5, 7, 15]))
        x = rng.standard_normal((t, d)).astype(np.float32)
        kern = rng.standard_normal((k, d)).astype(np.float32)
        full, _ = conv_dcconv(x, kern, t + int(rng.integers(0, 8)))
        worst = max(worst, float(np.abs(full - conv_regular(x, kern)).max()))
    checks.append(Check("conv.dcconv_single_chunk_is_regular", worst <= 1e-6,
                        deviation=worst, tolerance=1e-6))

    reach_ok = True
    for s in range(trials):
        k = 5
        lim = (k - 1) // 2
        left, right = conv_receptive_probe(k, "regular", None, 16, seed + s)
        reach_ok = reach_ok and left <= lim and right <= lim
        left, right = conv_receptive_probe(k, "dcconv", 4, 16, seed + s)
        # chunk conv may reach L behind but never across the right boundary;
        # the probe's right reach is bounded by the chunk size minus one
        reach_ok = reach_ok and left <= lim and right <= 3
    checks.append(Check("conv.receptive_field_probes", reach_ok))

    worst = 0.0
    for s in range(trials):
        r = np.random.default_rng(seed + 100 + s)
        t, d, k, c = 32, 4, 5, 8
        x = r.standard_normal((t, d))
        kern = r.standard_normal((k, d))
        one_shot, _ = conv_dcconv(x, kern, c)
        cache = None
        pieces = []
        for lo in range(0, t, c):
            y, cache = conv_dcconv(x[lo:lo + c], kern, c, cache)
            pieces.append(y)
        worst = max(worst, float(np.abs(np.concatenate(pieces) - one_shot).max()))
    checks.append(Check("conv.streamed_equals_one_shot", worst <= 1e-12,
                        deviation=worst, tolerance=1e-12))
    return checks


def lookahead_probes(config: EncoderConfig, weights: Dict[str, np.ndarray],
                     probes: int, seed: int, chunks: Tuple[int, ...] = (4, 8, 16),
                     t_len: int = 32, threshold: float = 1e-12):
    """Randomized cross-boundary influence probes on the block stack.

    Perturbs one encoder frame at a time and measures the largest change on
    output frames strictly before the perturbed frame's chunk. Returns
    (violations, qualifying leak count, observed leaks, worst deviation):
    for dcconv any change above ``threshold`` is a violation; for regular
    convolution the same change is the leak being demonstrated, counted only
    for frames within (k-1)/2 of their chunk's left boundary.
    """
    weights = cast_weights(weights, config.dtype)
    rng = np.random.default_rng(seed)
    lim = left_context_frames(config.kernel_size)
    violations = 0
    qualifying = 0
    leaks = 0
    worst = 0.0
    per_chunk = -(-probes // len(chunks))
    for c in chunks:
        x = rng.standard_normal((t_len, config.d_model)).astype(config.dtype)
        base = encoder_blocks_forward(x, config, weights, c, 2 * c)
        for _ in range(per_chunk):
            t = int(rng.integers(c, t_len))
            xp = x.copy()
            xp[t] += rng.standard_normal(config.d_model).astype(config.dtype)
            out = encoder_blocks_forward(xp, config, weights, c, 2 * c)
            boundary = (t // c) * c
            dev = float(np.abs(out[:boundary] - base[:boundary]).max())
            worst = max(worst, dev)
            if dev > threshold:
                if config.conv_mode == "regular":
                    if t % c < lim:
                        leaks += 1
                else:
                    violations += 1
            if config.conv_mode == "regular" and t % c < lim:
                qualifying += 1
    return violations, qualifying, leaks, worst


def equivalence_cases(config: EncoderConfig, weights: Dict[str, np.ndarray],
                      cases: int, seed: int, max_t0: int = 256) -> float:
    """Worst streaming-vs-offline deviation over random no-overlap cases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        t0 = int(rng.integers(config.subsample_factor, max_t0 + 1))
        c = int(rng.choice([8, 16, 32]))
        left = [0, 2 * c, None][int(rng.integers(0, 3))]
        feats = rng.standard_normal((t0, config.input_dim))
        offline = encoder_forward(feats, config, weights, c, left)
        spec = ChunkSpec(c, 0.0, left)
        push = int(rng.integers(1, t0 + 1))
        streamed = stream_utterance(config, weights, spec, feats, push_size=push)
        if streamed.shape != offline.shape:
            return float("inf")
        if offline.size:
            worst = max(worst, float(np.abs(streamed - offline).max()))
    return worst


def conservation_cases(config: EncoderConfig, weights: Dict[str, np.ndarray],
                       cases: int, seed: int) -> int:
    """Fuzz committed-frame conservation; returns the number of failures."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        t0 = int(rng.integers(1, 200))
        c = int(rng.choice([4, 8, 16, 32]))
        ratio = float(rng.choice([0.0, 0.5, 0.75]))
        spec = ChunkSpec(c, ratio, int(rng.integers(0, 3)) * c)
        feats = rng.standard_normal((t0, config.input_dim))
        push = int(rng.integers(1, 64))
        out = stream_utterance(config, weights, spec, feats, push_size=push)
        if out.shape[0] != t0 // config.subsample_factor:
            bad += 1
    return bad


def suite_equivalence(config: EncoderConfig, weights: Dict[str, np.ndarray],
                      trials: int = 10, seed: int = 0) -> List[Check]:
    checks = []
    tol = 1e-10 if config.precision == "double" else 1e-4
    weights = cast_weights(weights, config.dtype)

    worst = equivalence_cases(config, weights, trials, seed, max_t0=160)
    checks.append(Check("equivalence.streaming_matches_offline", worst <= tol,
                        deviation=worst, tolerance=tol))

    bad = conservation_cases(config, weights, max(trials, 10), seed + 1)
    checks.append(Check("equivalence.committed_frame_conservation", bad == 0,
                        deviation=float(bad), tolerance=0.0))

    dc_cfg = EncoderConfig(**{**config.__dict__, "conv_mode": "dcconv",
                              "precision": "double"})
    probes = max(30, trials * 5)
    violations, _, _, worst = lookahead_probes(dc_cfg, weights, probes, seed + 2)
    checks.append(Check("equivalence.dcconv_lookahead_enforced", violations == 0,
                        deviation=worst, tolerance=1e-12))

    reg_cfg = EncoderConfig(**{**config.__dict__, "conv_mode": "regular",
                               "precision": "double"})
    _, qualifying, leaks, _ = lookahead_probes(reg_cfg, weights, probes, seed + 3)
    rate = leaks / qualifying if qualifying else 0.0
    checks.append(Check("equivalence.regular_conv_leak_detected", rate >= 0.95,
                        deviation=rate, tolerance=0.95,
                        detail=f"{leaks}/{qualifying} qualifying probes leaked"))

    full_cfg = EncoderConfig(**{**config.__dict__, "precision": "double"})
    feats = np.random.default_rng(seed + 4).standard_normal((96, config.input_dim))
    t = 96 // config.subsample_factor
    a = encoder_forward(feats, full_cfg, weights)
    b = encoder_forward(feats, full_cfg, weights, chunk=t, left_context=None)
    dev = float(np.abs(a - b).max())
    checks.append(Check("equivalence.full_context_equals_whole_chunk", dev == 0.0,
                        deviation=dev, tolerance=0.0))
    return checks


def suite_ctc(trials: int = 40, seed: int = 0) -> List[Check]:
    checks = []
    rng = np.random.default_rng(seed)
    worst = 0.0
    prob_dev = 0.0
    top_ok = True
    for _ in range(trials):
        t = int(rng.integers(1, 5))
        v = int(rng.integers(2, 5))
        frames = ctc.log_softmax(rng.standard_normal((t, v)) * 2.0)
        oracle = ctc.brute_force_scores(frames)
        hyps = ctc.prefix_beam_search(frames, beam_size=v ** t + 1)
        for h in hyps:
            worst = max(worst, abs(h.total - oracle[h.prefix]))
        # ties between equal-probability prefixes are fine either way
        top_ok = top_ok and abs(oracle[hyps[0].prefix] - max(oracle.values())) <= 1e-12
        prob_dev = max(prob_dev, abs(sum(math.exp(s) for s in oracle.values()) - 1.0))
    checks.append(Check("ctc.beam_matches_brute_force", worst <= 1e-9,
                        deviation=worst, tolerance=1e-9))
    checks.append(Check("ctc.labeling_probabilities_sum_to_one", prob_dev <= 1e-9,
                        deviation=prob_dev, tolerance=1e-9))
    checks.append(Check("ctc.top1_matches_oracle", top_ok))

    invariant = True
    for s in range(trials):
        r = np.random.default_rng(seed + 500 + s)
        t, v = int(r.integers(1, 10)), int(r.integers(2, 6))
        frames = ctc.log_softmax(r.standard_normal((t, v)))
        ref = ctc.prefix_beam_search(frames, beam_size=8)
        dec = ctc.IncrementalDecoder(beam_size=8)
        lo = 0
        while lo < t:
            hi = lo + int(r.integers(1, t - lo + 1))
            dec.decode(frames[lo:hi])
            lo = hi
        got = dec.finalize()
        invariant = invariant and len(got) == len(ref) and all(
            a.prefix == b.prefix and abs(a.total - b.total) <= 1e-12
            for a, b in zip(got, ref))
    checks.append(Check("ctc.incremental_chunking_invariant", invariant))

    wer_ok = (ctc.wer("abc", "abc") == 0.0
              and abs(ctc.wer(["a", "b", "c"], ["a", "x", "c"]) - 1 / 3) < 1e-12
              and ctc.wer(["a"], ["a", "b", "c"]) == 2.0)
    checks.append(Check("ctc.wer_anchors", wer_ok))
    return checks


def run_suites(config: EncoderConfig, weights: Optional[Dict[str, np.ndarray]],
               suites: List[str], trials: int = 10, seed: int = 0) -> List[Check]:
    if any(s not in SUITES for s in suites):
        raise ConfigError(f"unknown suite in {suites}; have {SUITES} or 'all'")
    if weights is None and ("equivalence" in suites or "conv" in suites):
        weights = init_weights(config)
    checks: List[Check] = []
    if "masks" in suites:
        checks.extend(suite_masks(max(trials * 10, 50), seed))
    if "conv" in suites:
        checks.extend(suite_conv(max(trials, 10), seed))
    if "equivalence" in suites:
        checks.extend(suite_equivalence(config, weights, trials, seed))
    if "ctc" in suites:
        checks.extend(suite_ctc(max(trials * 2, 20), seed))
    return checks
