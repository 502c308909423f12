"""CTC decoding: greedy, prefix beam search, a brute-force oracle, WER.

Frames are (T, V) arrays of per-token log-probabilities with blank fixed at
index 0; each frame must be normalized (logsumexp 0). All score arithmetic
is log-domain with -inf as the impossible sentinel. Beam pruning breaks
score ties by lexicographically smaller prefix so results are totally
ordered and reproducible.
"""

import math
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, SizeError, StateError

BLANK = 0
NEG_INF = float("-inf")
DEFAULT_BEAM_SIZE = 50


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = (a, b) if a > b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


@dataclass(frozen=True)
class BeamHypothesis:
    """One CTC prefix with its blank / non-blank path log-probabilities."""

    prefix: Tuple[int, ...]
    log_p_blank: float
    log_p_nonblank: float

    @property
    def total(self) -> float:
        return _logaddexp(self.log_p_blank, self.log_p_nonblank)

    def serialize(self) -> str:
        return f"{self.total}\t{' '.join(str(t) for t in self.prefix)}"


def check_logprob_frames(frames: np.ndarray, tol: float = 1e-5) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] < 2:
        raise ContractViolation(f"frames must be (T, V >= 2), got {frames.shape}")
    if frames.shape[0]:
        lse = np.logaddexp.reduce(frames, axis=1)
        worst = np.abs(lse).max()
        if worst > tol:
            raise ContractViolation(f"frames not normalized: |logsumexp| up to {worst:.3g}")
    return frames


def greedy_decode(frames: np.ndarray) -> List[int]:
    """Best path decode: per-frame argmax, collapse repeats, drop blanks."""
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[1] < 2:
        raise ContractViolation(f"frames must be (T, V >= 2), got {frames.shape}")
    out: List[int] = []
    prev = BLANK
    for token in frames.argmax(axis=1):
        if token != BLANK and token != prev:
            out.append(int(token))
        prev = token
    return out


def _step(beams: Dict[Tuple[int, ...], Tuple[float, float]],
          logp: np.ndarray, beam_size: int) -> Dict[Tuple[int, ...], Tuple[float, float]]:
    """Advance all prefixes one frame and prune to the beam size."""
    nxt: Dict[Tuple[int, ...], List[float]] = {}

    def add(prefix, blank_part, nonblank_part):
        entry = nxt.get(prefix)
        if entry is None:
            nxt[prefix] = [blank_part, nonblank_part]
        else:
            entry[0] = _logaddexp(entry[0], blank_part)
            entry[1] = _logaddexp(entry[1], nonblank_part)

    v = logp.shape[0]
    for prefix, (p_b, p_nb) in beams.items():
        total = _logaddexp(p_b, p_nb)
        add(prefix, total + logp[BLANK], NEG_INF)
        last = prefix[-1] if prefix else None
        if last is not None:
            add(prefix, NEG_INF, p_nb + logp[last])
        for token in range(1, v):
            score = logp[token]
            if token == last:
                add(prefix + (token,), NEG_INF, p_b + score)
            else:
                add(prefix + (token,), NEG_INF, total + score)

    if len(nxt) > beam_size:
        ranked = sorted(nxt.items(), key=lambda kv: (-_logaddexp(kv[1][0], kv[1][1]), kv[0]))
        nxt = dict(ranked[:beam_size])
    return {p: (b, nb) for p, (b, nb) in nxt.items()}


def _ranked(beams: Dict[Tuple[int, ...], Tuple[float, float]]) -> List[BeamHypothesis]:
    hyps = [BeamHypothesis(p, b, nb) for p, (b, nb) in beams.items()
            if _logaddexp(b, nb) > NEG_INF]
    hyps.sort(key=lambda h: (-h.total, h.prefix))
    return hyps


def prefix_beam_search(frames: np.ndarray,
                       beam_size: int = DEFAULT_BEAM_SIZE) -> List[BeamHypothesis]:
    """CTC prefix beam search, ranked by total log-probability.

    Per frame each surviving prefix extends by blank, by a repeat of its
    last token, and by every new token; duplicate prefixes merge by
    log-sum-exp of their blank/non-blank parts before pruning.
    """
    if beam_size < 1:
        raise ContractViolation(f"beam_size must be >= 1, got {beam_size}")
    frames = check_logprob_frames(frames)
    beams = {(): (0.0, NEG_INF)}
    for t in range(frames.shape[0]):
        beams = _step(beams, frames[t], beam_size)
    return _ranked(beams)


def brute_force_scores(frames: np.ndarray,
                       max_paths: int = 10 ** 6) -> Dict[Tuple[int, ...], float]:
    """Exact labeling log-probabilities by enumerating all V**T paths.

    Test oracle only: applies the CTC collapse (merge repeats, drop blanks)
    to every alignment path and log-sum-exps path scores per labeling.
    """
    frames = check_logprob_frames(frames)
    t, v = frames.shape
    if v ** t > max_paths:
        raise SizeError(f"V**T = {v}**{t} exceeds the {max_paths} path bound")
    scores: Dict[Tuple[int, ...], float] = {}
    for path in product(range(v), repeat=t):
        logp = 0.0
        for step, token in enumerate(path):
            logp += frames[step, token]
        labeling = []
        prev = None
        for token in path:
            if token != BLANK and token != prev:
                labeling.append(token)
            prev = token
        key = tuple(labeling)
        scores[key] = _logaddexp(scores.get(key, NEG_INF), logp)
    return scores


class IncrementalDecoder(object):
    """Prefix beam search fed frame chunks; chunking never changes the result."""

    def __init__(self, beam_size: int = DEFAULT_BEAM_SIZE):
        if beam_size < 1:
            raise ContractViolation(f"beam_size must be >= 1, got {beam_size}")
        self.beam_size = beam_size
        self._beams = {(): (0.0, NEG_INF)}
        self._finalized = False

    def decode(self, frames: np.ndarray) -> BeamHypothesis:
        """Consume frames and return the current best hypothesis."""
        if self._finalized:
            raise StateError("decoder already finalized")
        frames = check_logprob_frames(frames)
        for t in range(frames.shape[0]):
            self._beams = _step(self._beams, frames[t], self.beam_size)
        return _ranked(self._beams)[0]

    def finalize(self) -> List[BeamHypothesis]:
        if self._finalized:
            raise StateError("decoder already finalized")
        self._finalized = True
        return _ranked(self._beams)


def wer(reference: Sequence, hypothesis: Sequence) -> float:
    """Word error rate: Levenshtein edits over the reference length."""
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref:
        raise ContractViolation("wer needs a non-empty reference")
    return edit_distance(ref, hyp) / len(ref)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit substitution/insertion/deletion costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def log_softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax, stabilized by the row max."""
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def serialize_hypotheses(hyps: Iterable[BeamHypothesis]) -> str:
    return "\n".join(h.serialize() for h in hyps)
