"""Successive-cancellation decoding of polar codes, vectorized over trials.

Decoder LLRs use ``lam = log W(y|0) / W(y|1)``, so ``lam > 0`` favours bit 0.
Bit ``i`` of the decoder is the synthetic channel whose tree path is the
binary expansion of ``i`` (first transform most significant, minus = 0).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelError, ChannelSpec, parse_channel_spec
from .construction import CodeSpec
from .transforms import EXACT, KernelId

SAT = 40.0
BATCH = 512


class UnsupportedChannelError(ChannelError):
    pass


def _check_pow2(N: int) -> int:
    if N < 1 or N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")
    return N.bit_length() - 1


def encode(u) -> np.ndarray:
    """x = u F^{(x)n}: the 2-kernel (u1, u2) -> (u1 ^ u2, u2) applied recursively.

    Works on the last axis, so a (trials, N) array encodes row by row.
    """
    u = np.asarray(u, dtype=np.uint8)
    _check_pow2(u.shape[-1])
    x = u.copy()
    N = x.shape[-1]
    h = N // 2
    while h >= 1:
        # butterflies of span h: first element of each pair absorbs the second
        v = x.reshape(*x.shape[:-1], N // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


# ---------------------------------------------------------------------------
# channel sampling
# ---------------------------------------------------------------------------

def sample_output(channel: ChannelSpec | dict | str, x, rng) -> np.ndarray:
    """Decoder LLRs for codeword bits ``x`` sent over ``channel``, saturated at +-SAT.

    ``rng`` is a Generator or anything ``default_rng`` accepts.
    """
    if not isinstance(channel, ChannelSpec):
        channel = parse_channel_spec(channel)
    rng = np.random.default_rng(rng)
    x = np.asarray(x, dtype=np.uint8)
    sign = 1.0 - 2.0 * x
    p = channel.params
    if channel.type == "bec":
        erased = rng.random(x.shape) < float(p["eps"])
        return np.where(erased, 0.0, SAT * sign)
    if channel.type == "bsc":
        q = float(p["p"])
        flip = rng.random(x.shape) < q
        mag = SAT if q == 0.0 else min(SAT, float(np.log((1 - q) / q)))
        return np.where(flip, -sign, sign) * mag
    if channel.type == "awgn":
        sigma = float(p["sigma"])
        y = sign + sigma * rng.standard_normal(x.shape)
        return np.clip(2.0 * y / sigma**2, -SAT, SAT)
    if channel.type == "custom":
        rows = np.asarray(p["rows"], dtype=float)
        with np.errstate(divide="ignore"):
            lam = np.clip(np.log(rows[:, 0]) - np.log(rows[:, 1]), -SAT, SAT)
        u = rng.random(x.shape)
        # inverse-CDF draw of the output symbol given each input bit
        cdf0, cdf1 = np.cumsum(rows[:, 0]), np.cumsum(rows[:, 1])
        y = np.where(x == 0, np.searchsorted(cdf0 / cdf0[-1], u, side="right"),
                     np.searchsorted(cdf1 / cdf1[-1], u, side="right"))
        return lam[np.minimum(y, len(rows) - 1)]
    raise UnsupportedChannelError(f"no sampling rule for channel type {channel.type!r}")


# ---------------------------------------------------------------------------
# check-node kernels in the decoder convention
# ---------------------------------------------------------------------------

def boxplus_minsum(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def boxplus_exact(a, b):
    """2 atanh(tanh(a/2) tanh(b/2)); saturated inputs act as infinite."""
    ms = boxplus_minsum(a, b)
    with np.errstate(over="ignore"):
        corr = np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    out = ms + corr
    out = np.where(np.abs(a) >= SAT, np.sign(a) * b, out)
    out = np.where(np.abs(b) >= SAT, np.sign(b) * a, out)
    return np.clip(out, -SAT, SAT)


def check_node(kernel: KernelId):
    if kernel.tag == "exact":
        return boxplus_exact
    if kernel.tag == "minsum":
        return boxplus_minsum
    gamma = kernel.gamma

    def perturbed(a, b):
        ms = boxplus_minsum(a, b)
        return ms + gamma * (boxplus_exact(a, b) - ms)
    return perturbed


# ---------------------------------------------------------------------------
# counter-based tie breaking
# ---------------------------------------------------------------------------

_M64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_M64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def tie_coins(seed: int, trials: np.ndarray, bit: int) -> np.ndarray:
    """Fair coin per (seed, trial, bit); independent of batching and threads."""
    s = _splitmix64(np.array([seed & _M64], dtype=np.uint64))
    z = _splitmix64(s ^ np.asarray(trials, dtype=np.uint64))
    z = _splitmix64(z ^ np.uint64(bit))
    return (z >> np.uint64(63)).astype(np.uint8)


# ---------------------------------------------------------------------------
# decoder
# ---------------------------------------------------------------------------

@dataclass
class SCResult:
    u: np.ndarray                 # (trials, N) decided bits, frozen positions 0
    llr: np.ndarray | None        # (trials, N) decision LLR per bit, if requested

    def info_bits(self, code: CodeSpec) -> np.ndarray:
        return self.u[:, list(code.info_set)]


def sc_decode(llr, code: CodeSpec, kernel: KernelId = EXACT, seed: int = 0,
              trial_ids=None, genie: bool = False, keep_log: bool = False) -> SCResult:
    """Depth-first SC decoding of each row of ``llr``.

    With ``genie`` the partial sums use the true (all-zeros) bits instead of the
    decisions, which isolates each synthetic channel.
    """
    lam = np.asarray(llr, dtype=np.float64)
    squeeze = lam.ndim == 1
    lam = np.atleast_2d(lam)
    T, N = lam.shape
    if N != code.block_length:
        raise ValueError(f"llr length {N} does not match block length {code.block_length}")
    trial_ids = np.arange(T) if trial_ids is None else np.asarray(trial_ids)
    f = check_node(kernel)
    info = code.info_mask()
    u = np.zeros((T, N), dtype=np.uint8)
    log = np.zeros((T, N)) if keep_log else None

    def decide(lv: np.ndarray, i: int) -> np.ndarray:
        if log is not None:
            log[:, i] = lv
        if not info[i]:
            return np.zeros(T, dtype=np.uint8)
        bits = (lv < 0).astype(np.uint8)
        tie = lv == 0
        if tie.any():
            bits[tie] = tie_coins(seed, trial_ids[tie], i)
        u[:, i] = bits
        return bits

    def rec(lv: np.ndarray, start: int) -> np.ndarray:
        """Decode the block at ``start``; return its re-encoded partial sums."""
        n = lv.shape[1]
        if n == 1:
            b = decide(lv[:, 0], start)
            return np.zeros((T, 1), np.uint8) if genie else b[:, None]
        h = n // 2
        a, b = lv[:, :h], lv[:, h:]
        v = rec(f(a, b), start)
        w = rec(np.clip(np.where(v == 1, -a, a) + b, -SAT, SAT), start + h)
        return np.concatenate([v ^ w, w], axis=1)

    rec(lam, 0)
    if squeeze:
        return SCResult(u[0], None if log is None else log[0])
    return SCResult(u, log)


# ---------------------------------------------------------------------------
# Monte-Carlo driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlerStats:
    trials: int
    block_errors: int
    bit_errors: int
    bler: float
    seed: int

    def to_json(self) -> dict:
        return {"trials": self.trials, "block_errors": self.block_errors,
                "bit_errors": self.bit_errors, "bler": self.bler, "seed": self.seed}


def channel_block(channel: ChannelSpec, N: int, trial_ids, seed: int) -> np.ndarray:
    """All-zeros transmissions for the given trials, one derived stream per trial."""
    zeros = np.zeros(N, dtype=np.uint8)
    return np.stack([
        sample_output(channel, zeros, np.random.default_rng(np.random.SeedSequence([seed, int(t)])))
        for t in trial_ids
    ])


def _batch_errors(code, channel, kernel, seed, ids):
    lam = channel_block(channel, code.block_length, ids, seed)
    res = sc_decode(lam, code, kernel, seed=seed, trial_ids=ids)
    wrong = res.info_bits(code).astype(bool)
    return int(wrong.any(axis=1).sum()), int(wrong.sum())


def run_bler(code: CodeSpec, channel: ChannelSpec | dict | str, trials: int,
             kernel: KernelId = EXACT, seed: int = 0, threads: int = 1,
             batch: int = BATCH) -> BlerStats:
    """Block error rate for all-zeros transmission; a pure function of its arguments."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not isinstance(channel, ChannelSpec):
        channel = parse_channel_spec(channel)
    batches = [np.arange(s, min(trials, s + batch)) for s in range(0, trials, batch)]

    def job(ids):
        return _batch_errors(code, channel, kernel, seed, ids)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(job, batches))
    else:
        counts = [job(ids) for ids in batches]
    blocks = sum(c[0] for c in counts)
    bits = sum(c[1] for c in counts)
    return BlerStats(trials, blocks, bits, blocks / trials, seed)


def genie_error_rates(code_n: int, channel: ChannelSpec | dict | str, trials: int,
                      kernel: KernelId = EXACT, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-index (tie rate, error rate) of genie-aided SC over all 2**n positions."""
    if not isinstance(channel, ChannelSpec):
        channel = parse_channel_spec(channel)
    N = 1 << code_n
    code = CodeSpec(code_n, tuple(range(N)))
    ties = np.zeros(N)
    errs = np.zeros(N)
    for s in range(0, trials, BATCH):
        ids = np.arange(s, min(trials, s + BATCH))
        lam = channel_block(channel, N, ids, seed)
        res = sc_decode(lam, code, kernel, seed=seed, trial_ids=ids, genie=True, keep_log=True)
        ties += (res.llr == 0).sum(axis=0)
        errs += res.u.sum(axis=0)
    return ties / trials, errs / trials
