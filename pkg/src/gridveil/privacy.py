"""Differential-privacy primitives for line-parameter obfuscation.

Noise calibration follows the indistinguishability adjacency: two
conductance vectors are adjacent when they differ in a single entry by
at most ``alpha``. The identity query then has sensitivity ``alpha`` and
the per-level average query sensitivity ``alpha / n_v``, so splitting
the budget three ways (one identity query on the conductances, one
average query per parameter vector) yields ``epsilon`` in total by
sequential composition. Ratio-derived susceptances and all downstream
optimization consume no extra budget (post-processing).

Raw conductance/susceptance vectors never leave this module except
through the three noisy queries recorded in the budget ledger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .network import Network, series_admittances, voltage_levels

# Ledger query labels. Anything else touching raw data is an audit violation.
QUERY_IDENTITY_G = "identity:g"
QUERY_MEANS_G = "means:g"
QUERY_MEANS_B = "means:b"
_EXPECTED_QUERIES = (QUERY_IDENTITY_G, QUERY_MEANS_G, QUERY_MEANS_B)


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget, indistinguishability, cost faithfulness, and the
    factor bounding post-processed values around the noisy level means."""

    epsilon: float = 1.0
    alpha: float = 0.01
    beta: float = 0.01
    lambda_bound: float = 2.0

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.lambda_bound <= 1:
            raise ValueError("lambda_bound must exceed 1")

    @property
    def identity_scale(self) -> float:
        """Laplace scale for the per-line identity query."""
        return 3.0 * self.alpha / self.epsilon

    def mean_scale(self, n_v: int) -> float:
        """Laplace scale for a level mean over ``n_v`` lines."""
        return 3.0 * self.alpha / (n_v * self.epsilon)


@dataclass(frozen=True)
class BudgetEntry:
    query: str
    share: Fraction  # fraction of epsilon, exact arithmetic


@dataclass
class NoisyLineData:
    """Noisy admittance data released by the private queries.

    ``b_tilde`` is ratio-consistent with ``g_tilde``: for lines with
    nonzero conductance, ``g_tilde / b_tilde`` equals the public ratio
    ``g / b``. Lines with structurally zero conductance keep
    ``g_tilde = 0`` and carry direct susceptance noise instead.
    """

    g_tilde: np.ndarray
    b_tilde: np.ndarray
    ratios: np.ndarray
    mu_g: dict[tuple[float, float], float]
    mu_b: dict[tuple[float, float], float]
    budget_ledger: list[BudgetEntry] = field(default_factory=list)

    def ledger_json(self, epsilon: float) -> str:
        return json.dumps(
            [
                {"query": e.query, "share": str(e.share), "epsilon": epsilon * float(e.share)}
                for e in self.budget_ledger
            ],
            indent=1,
        )


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    """One draw from the zero-mean Laplace distribution via inverse CDF."""
    return float(laplace_vector(scale, 1, rng)[0])


def laplace_vector(scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Laplace draws, deterministic for a seeded generator.

    Uses the inverse CDF: for uniform ``u`` on (-1/2, 1/2), the draw is
    ``-scale * sign(u) * ln(1 - 2|u|)``.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    u = rng.random(size) - 0.5
    # rng.random() can return exactly 0.0; keep the log argument positive.
    t = np.maximum(1.0 - 2.0 * np.abs(u), 1e-300)
    return -scale * np.sign(u) * np.log(t)


def noisy_conductances(
    g: np.ndarray, b: np.ndarray, p: PrivacyParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Identity query over the line parameters, one draw per line.

    Returns ``(g_tilde, noise, zero_mask)``. Lines with ``g == 0`` are
    left at zero conductance; their draw is reserved for direct
    susceptance noise (disjoint line sets, so the identity-query share
    covers both by parallel composition).
    """
    g = np.asarray(g, dtype=float)
    noise = laplace_vector(p.identity_scale, g.size, rng)
    zero = g == 0.0
    g_tilde = np.where(zero, 0.0, g + noise)
    return g_tilde, noise, zero


def noisy_susceptances(
    g_tilde: np.ndarray,
    b: np.ndarray,
    ratios: np.ndarray,
    noise: np.ndarray,
    zero_mask: np.ndarray,
) -> np.ndarray:
    """Susceptances consistent with the public conductance ratios.

    ``b_tilde = g_tilde / r`` with ``r = g / b``, so the released pair
    keeps the original ratio; no additional budget is consumed. Lines
    with zero ratio fall back to direct noise on ``b``.
    """
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(zero_mask, 0.0, g_tilde / np.where(zero_mask, 1.0, ratios))
    return np.where(zero_mask, b + noise, scaled)


def noisy_level_means(
    values: np.ndarray,
    levels: dict[tuple[float, float], tuple[int, ...]],
    line_pos: dict[int, int],
    p: PrivacyParams,
    rng: np.random.Generator,
) -> dict[tuple[float, float], float]:
    """Average query per voltage level with scale ``3*alpha/(n_v*eps)``.

    Levels are processed in sorted key order so draws are reproducible.
    Parallel composition across the disjoint levels keeps the whole
    vector of means at one third of the budget.
    """
    values = np.asarray(values, dtype=float)
    out = {}
    for key in sorted(levels):
        ids = levels[key]
        n_v = len(ids)
        mean = float(np.mean([values[line_pos[i]] for i in ids]))
        out[key] = mean + laplace_sample(p.mean_scale(n_v), rng)
    return out


def obfuscate_line_data(net: Network, p: PrivacyParams, rng: np.random.Generator) -> NoisyLineData:
    """Run the three private queries of the obfuscation mechanism.

    Draw order is fixed (identity vector, then conductance means, then
    susceptance means over sorted levels), so a seeded generator yields
    identical output across runs and platforms.
    """
    g, b = (np.array(v) for v in series_admittances(net))
    with np.errstate(divide="ignore"):
        ratios = np.where(g == 0.0, 0.0, g / b)
    g_tilde, noise, zero = noisy_conductances(g, b, p, rng)
    b_tilde = noisy_susceptances(g_tilde, b, ratios, noise, zero)

    levels = voltage_levels(net)
    line_pos = {ln.id: i for i, ln in enumerate(net.lines)}
    mu_g = noisy_level_means(g, levels, line_pos, p, rng)
    mu_b = noisy_level_means(b, levels, line_pos, p, rng)

    ledger = [
        BudgetEntry(QUERY_IDENTITY_G, Fraction(1, 3)),
        BudgetEntry(QUERY_MEANS_G, Fraction(1, 3)),
        BudgetEntry(QUERY_MEANS_B, Fraction(1, 3)),
    ]
    return NoisyLineData(g_tilde, b_tilde, ratios, mu_g, mu_b, ledger)


def budget_audit(ledger: list[BudgetEntry]) -> tuple[bool, str]:
    """Check the ledger is exactly the three expected queries.

    Returns ``(True, "ok")`` when the shares are one third each and sum
    to the whole budget; otherwise ``(False, reason)`` naming the
    offending query.
    """
    seen: dict[str, Fraction] = {}
    for entry in ledger:
        if entry.query not in _EXPECTED_QUERIES:
            return False, f"unexpected raw-data query: {entry.query}"
        if entry.query in seen:
            return False, f"duplicate query: {entry.query}"
        seen[entry.query] = entry.share
    for query in _EXPECTED_QUERIES:
        if query not in seen:
            return False, f"missing query: {query}"
        if seen[query] != Fraction(1, 3):
            return False, f"wrong share for {query}: {seen[query]}"
    if sum(seen.values()) != 1:
        return False, "shares do not sum to the full budget"
    return True, "ok"


def run_seed(master_seed: int, *parts: object) -> int:
    """Stable per-run seed derived from a master seed and context parts.

    Uses BLAKE2 over the repr of the parts, so cells of an experiment
    grid can be reproduced independently of execution order.
    """
    import hashlib

    h = hashlib.blake2b(digest_size=8)
    h.update(repr((master_seed,) + parts).encode())
    return int.from_bytes(h.digest(), "big") % (2**63)
