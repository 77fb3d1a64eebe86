"""End-to-end simulation of classical post-processing on a BSC source.

Stages, each with its own random stream: source sampling, parameter
estimation on a random subset, advantage distillation, information
reconciliation and privacy amplification.  No adversary is simulated; the
admissible key length is computed from the smooth min-entropy of Alice's
simulated key minus the reconciliation leakage.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..distributions import ClassicalAtoms, JointDistribution
from ..entropy import smooth_min_entropy_classical
from ..finitekey import typicality_tolerance
from .bits import BitString, generator
from .distill import L1Region, advantage_distill, parameter_estimate
from .hashing import toeplitz_hash
from .reconciliation import (
    ReconciliationAbort,
    ball_radius,
    hash_length,
    ir_code_decode,
    ir_code_encode,
    ir_hash_decode,
    ir_hash_encode,
    make_code,
)

IR_SCHEMES = ("hash", "repetition", "hamming")


class PipelineWarning(UserWarning):
    """Configuration asks for more key than the entropy budget admits."""


@dataclass(frozen=True)
class PipelineConfig:
    n_raw: int
    e: float
    b: int = 1
    ir: str = "hash"
    ell: int = 0
    seed: int = 0
    eps: float = 1e-6
    pe_samples: int | None = None
    segment: int = 32
    rep_length: int = 5

    def __post_init__(self):
        if self.n_raw < 2:
            raise ValueError("n_raw must be at least 2")
        if not 0 <= self.e <= 0.5:
            raise ValueError("e must lie in [0, 1/2]")
        if self.b < 1:
            raise ValueError("b must be positive")
        if self.ir not in IR_SCHEMES:
            raise ValueError(f"ir must be one of {IR_SCHEMES}")
        if self.ell < 0:
            raise ValueError("ell must be nonnegative")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @property
    def m(self) -> int:
        return self.pe_samples if self.pe_samples is not None else max(1, self.n_raw // 10)


def distilled_error_rate(e: float, b: int) -> float:
    """Error rate among accepted blocks, ``e^b / ((1-e)^b + e^b)``."""
    return e ** b / ((1 - e) ** b + e ** b)


def _abort(report: dict, stage: str, reason: str) -> dict:
    report["status"] = "abort"
    report["abort_stage"] = stage
    report["abort_reason"] = reason
    report["agreement"] = False
    return report


def _reconcile_hash(x, y, cfg, e_ad, rng):
    segs = max(1, math.ceil(len(x) / cfg.segment))
    eps_seg = cfg.eps / segs
    out, leak = [], 0
    for s in range(segs):
        xs = BitString(x[s * cfg.segment:(s + 1) * cfg.segment])
        ys = BitString(y[s * cfg.segment:(s + 1) * cfg.segment])
        t = ball_radius(len(xs), e_ad, eps_seg / 2)
        k = hash_length(len(xs), t, eps_seg)
        tr = ir_hash_encode(xs, k, 0, rng=rng)
        leak += tr.leakage_bits
        out.append(ir_hash_decode(ys, tr, t, rng=rng).bits)
    return np.concatenate(out), leak, x


def _reconcile_code(x, y, cfg, rng):
    code = make_code(cfg.ir, cfg.rep_length)
    tr = ir_code_encode(BitString(x), code, 0, rng=rng)
    x_hat = ir_code_decode(BitString(y), tr, code)
    return x_hat.bits, tr.leakage_bits, x[: tr.n]


def admissible_length(n_key: int, leak: int, eps: float) -> int:
    """``H_min^eps(X) - leak - 2 log(1/eps)`` for ``n_key`` uniform bits, floored."""
    atoms = ClassicalAtoms.from_distribution(JointDistribution.from_array([0.5, 0.5])).power(n_key)
    hmin = smooth_min_entropy_classical(atoms, eps=eps)
    return max(0, math.floor(hmin - leak - 2 * math.log2(1 / eps)))


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and return a JSON-ready report (deterministic in the seed)."""
    report: dict = {"config": asdict(cfg), "status": "ok", "warnings": []}

    src = generator(cfg.seed, "source")
    x = src.integers(0, 2, size=cfg.n_raw, dtype=np.uint8)
    y = x ^ (src.random(cfg.n_raw) < cfg.e).astype(np.uint8)

    # Parameter estimation on a random subset, which is then discarded.
    pe_rng = generator(cfg.seed, "pe")
    m = min(cfg.m, cfg.n_raw - 1)
    idx = np.sort(pe_rng.choice(cfg.n_raw, size=m, replace=False))
    tol = typicality_tolerance(m, 2, cfg.eps)
    region = L1Region((0, 1), (1 - cfg.e, cfg.e), tol)
    pe = parameter_estimate((x[idx] ^ y[idx]).tolist(), region)
    report["pe"] = {"samples": m, "tolerance": tol, "distance": pe.distance, "accept": pe.accept,
                    "observed_error": pe.frequencies.get(1, 0.0)}
    if not pe.accept:
        return _abort(report, "pe", "observed statistics outside the accepted region")
    keep = np.ones(cfg.n_raw, dtype=bool)
    keep[idx] = False
    x, y = x[keep], y[keep]

    x, y, ad = advantage_distill(x, y, cfg.b, generator(cfg.seed, "ad"))
    report["ad"] = {"blocks": ad.blocks, "accepted": ad.accepted, "errors": ad.errors,
                    "accept_rate": ad.accept_rate, "error_rate": ad.error_rate}
    if ad.accepted == 0:
        return _abort(report, "ad", "no block accepted")

    ir_rng = generator(cfg.seed, "ir")
    e_ad = distilled_error_rate(cfg.e, cfg.b)
    try:
        if cfg.ir == "hash":
            x_hat, leak, x = _reconcile_hash(x, y, cfg, e_ad, ir_rng)
        else:
            x_hat, leak, x = _reconcile_code(x, y, cfg, ir_rng)
    except (ReconciliationAbort, ValueError) as exc:
        report["ir"] = {"scheme": cfg.ir, "success": False}
        return _abort(report, "ir", str(exc))
    report["ir"] = {"scheme": cfg.ir, "key_bits": int(len(x)), "leakage_bits": int(leak),
                    "success": bool(np.array_equal(x, x_hat))}
    report["leakage_bits"] = int(leak)

    ell_max = admissible_length(len(x), leak, cfg.eps)
    report["ell_admissible"] = ell_max
    if cfg.ell > ell_max:
        msg = f"ell = {cfg.ell} exceeds the admissible length {ell_max}"
        warnings.warn(msg, PipelineWarning, stacklevel=2)
        report["warnings"].append(msg)
    if cfg.ell == 0:
        return _abort(report, "pa", "requested key length is 0")
    if cfg.ell > len(x):
        return _abort(report, "pa", f"ell = {cfg.ell} exceeds the reconciled length {len(x)}")

    f = toeplitz_hash(len(x), cfg.ell, generator(cfg.seed, "pa"))
    s_a = BitString(f.apply_bits(x))
    s_b = BitString(f.apply_bits(x_hat))
    report["pa"] = {"input_bits": int(len(x)), "output_bits": cfg.ell}
    report["key_a"] = s_a.hex()
    report["key_b"] = s_b.hex()
    report["agreement"] = s_a == s_b
    report["_keys"] = (s_a, s_b)
    return report


def report_json(report: dict) -> str:
    clean = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(clean, sort_keys=True, indent=2)
