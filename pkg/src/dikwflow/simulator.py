"""Synthetic randomized experiments with analytically known planted effects.

The generator draws from a logistic engagement model; the oracle computes
the same model's exact expected rates in closed form (a finite mixture
over demographic cells, no sampling). Together they make every layer of
the pipeline testable at desk scale: the pipeline analyzes the generated
table, the oracle says what it must find.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .dataset import REQUIRED_COLUMNS, EncounterTable, MessageCatalog

DEFAULT_FUNNEL = {"auth_given_click": 0.6, "redeem_given_auth": 0.5}
DEFAULT_OPTOUT_RATE = 0.02

# Logit delta that raises a 0.5 base rate to exactly 0.56, the +12%
# relative engagement planted for the oldest band: ln(0.56/0.44).
OLDER_AGE_LOGIT = math.log(56.0 / 44.0)


def logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@dataclass(frozen=True)
class BandSpec:
    label: str
    low: int
    high: int  # inclusive sampling cap; open-ended bands pick a finite cap
    weight: float


@dataclass(frozen=True)
class DemographicsMix:
    age_bands: tuple[BandSpec, ...]
    age_null_fraction: float = 0.0
    gender_mix: tuple[tuple[str | None, float], ...] = (("F", 0.5), ("M", 0.47), (None, 0.03))
    state_mix: tuple[tuple[str | None, float], ...] = (
        ("OH", 0.3), ("TX", 0.3), ("CA", 0.3), (None, 0.1),
    )
    drug_mix: tuple[tuple[str | None, float], ...] = (
        ("cardiac", 0.4), ("derm", 0.3), ("respiratory", 0.25), (None, 0.05),
    )
    start_date: str = "2024-03-01"
    date_span_days: int = 28

    def band_weights(self) -> list[float]:
        total = sum(b.weight for b in self.age_bands)
        live = 1.0 - self.age_null_fraction
        return [b.weight / total * live for b in self.age_bands]


def default_demographics() -> DemographicsMix:
    return DemographicsMix(
        age_bands=(
            BandSpec("18-44", 18, 44, 0.40),
            BandSpec("45-64", 45, 64, 0.35),
            BandSpec("65+", 65, 90, 0.25),
        ),
        age_null_fraction=0.04,
    )


@dataclass(frozen=True)
class GroundTruthModel:
    base_logit: Mapping[str, float]  # per variant
    strategy_effects: Mapping[str, float]  # tag value -> logit delta
    age_effect: Mapping[str, float]  # band label -> logit delta
    variant_tags: Mapping[str, tuple[str, ...]]  # variant -> its tag values
    funnel_conditionals: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_FUNNEL)
    )
    optout_rate: float = DEFAULT_OPTOUT_RATE
    seed: int = 0

    def click_logit(self, variant: str, band: str | None) -> float:
        eta = self.base_logit[variant]
        for tag in self.variant_tags.get(variant, ()):
            eta += self.strategy_effects.get(tag, 0.0)
        if band is not None:
            eta += self.age_effect.get(band, 0.0)
        return eta

    def to_dict(self) -> dict[str, Any]:
        return {
            "base_logit": dict(self.base_logit),
            "strategy_effects": dict(self.strategy_effects),
            "age_effect": dict(self.age_effect),
            "variant_tags": {v: list(t) for v, t in self.variant_tags.items()},
            "funnel_conditionals": dict(self.funnel_conditionals),
            "optout_rate": self.optout_rate,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "GroundTruthModel":
        return cls(
            base_logit=dict(d["base_logit"]),
            strategy_effects=dict(d.get("strategy_effects", {})),
            age_effect=dict(d.get("age_effect", {})),
            variant_tags={v: tuple(t) for v, t in d.get("variant_tags", {}).items()},
            funnel_conditionals=dict(d.get("funnel_conditionals", DEFAULT_FUNNEL)),
            optout_rate=float(d.get("optout_rate", DEFAULT_OPTOUT_RATE)),
            seed=int(d.get("seed", 0)),
        )


def model_from_catalog(
    catalog: MessageCatalog,
    strategy_effects: Mapping[str, float] | None = None,
    age_effect: Mapping[str, float] | None = None,
    base_logit: float | Mapping[str, float] = 0.0,
    seed: int = 0,
    include_rejected: bool = False,
) -> GroundTruthModel:
    """Build a model whose variants and tags come from a message catalog."""
    entries = [e for e in catalog.entries if include_rejected or not e.rejected_by_review]
    if isinstance(base_logit, Mapping):
        bases = {e.name: float(base_logit.get(e.name, 0.0)) for e in entries}
    else:
        bases = {e.name: float(base_logit) for e in entries}
    return GroundTruthModel(
        base_logit=bases,
        strategy_effects=dict(strategy_effects or {}),
        age_effect=dict(age_effect or {}),
        variant_tags={e.name: tuple(sorted(t.value for t in e.strategy_tags)) for e in entries},
        seed=seed,
    )


def load_model(path: str | Path) -> GroundTruthModel:
    return GroundTruthModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _weighted_choice(rng: np.random.Generator, options: tuple, n: int) -> list:
    values = [value for value, _ in options]
    weights = np.array([w for _, w in options], dtype=float)
    idx = rng.choice(len(values), size=n, p=weights / weights.sum())
    return [values[i] for i in idx]


def generate(
    model: GroundTruthModel,
    n: int,
    demographics: DemographicsMix | None = None,
) -> EncounterTable:
    """Draw n patient rows. Deterministic under the model's seed.

    All randomness flows from one numpy Generator in a fixed draw order,
    so a fixed seed pins every cell. Funnel monotonicity holds by
    construction: authentication is only drawn for clickers, redemption
    only for authenticators.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    demographics = demographics or default_demographics()
    rng = np.random.default_rng(model.seed)
    variants = sorted(model.base_logit)

    variant_idx = rng.integers(0, len(variants), size=n)
    null_age = rng.random(n) < demographics.age_null_fraction
    bands = demographics.age_bands
    raw_weights = np.array([b.weight for b in bands], dtype=float)
    band_idx = rng.choice(len(bands), size=n, p=raw_weights / raw_weights.sum())
    spans = np.array([b.high - b.low + 1 for b in bands])
    lows = np.array([b.low for b in bands])
    ages = lows[band_idx] + np.floor(rng.random(n) * spans[band_idx]).astype(int)

    genders = _weighted_choice(rng, demographics.gender_mix, n)
    states = _weighted_choice(rng, demographics.state_mix, n)
    drugs = _weighted_choice(rng, demographics.drug_mix, n)
    day_offsets = rng.integers(0, demographics.date_span_days, size=n)

    logit_by_variant_band = np.array(
        [[model.click_logit(v, b.label) for b in bands] for v in variants]
    )
    logit_by_variant_null = np.array([model.click_logit(v, None) for v in variants])
    eta = np.where(
        null_age,
        logit_by_variant_null[variant_idx],
        logit_by_variant_band[variant_idx, band_idx],
    )
    click_p = 1.0 / (1.0 + np.exp(-eta))
    clicked = rng.random(n) < click_p
    authenticated = clicked & (rng.random(n) < model.funnel_conditionals["auth_given_click"])
    redeemed = authenticated & (rng.random(n) < model.funnel_conditionals["redeem_given_auth"])
    opted_out = rng.random(n) < model.optout_rate

    start = date.fromisoformat(demographics.start_date)
    columns: dict[str, list] = {
        "patient_id": [f"p{i:07d}" for i in range(n)],
        "variant": [variants[i] for i in variant_idx],
        "clicked": clicked.tolist(),
        "authenticated": authenticated.tolist(),
        "opted_out": opted_out.tolist(),
        "redeemed": redeemed.tolist(),
        "age": [None if null_age[i] else int(ages[i]) for i in range(n)],
        "gender": genders,
        "state": states,
        "drug_category": drugs,
        "sent_at": [(start + timedelta(days=int(d))).isoformat() for d in day_offsets],
    }
    return EncounterTable(columns, REQUIRED_COLUMNS)


# ---------------------------------------------------------------------------
# Closed-form oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleReport:
    expected_click_rate: Mapping[str, float]  # per variant
    pairwise_directions: Mapping[tuple[str, str], str]  # (a,b) -> gt|lt|eq
    expected_funnel: Mapping[str, tuple[float, float, float]]  # per variant

    def direction(self, a: str, b: str) -> str:
        return self.pairwise_directions[(a, b)]

    def pooled_rate(self, variants: list[str]) -> float:
        # uniform assignment: every variant carries equal weight
        return sum(self.expected_click_rate[v] for v in variants) / len(variants)


def oracle(
    model: GroundTruthModel, demographics: DemographicsMix | None = None
) -> OracleReport:
    """Exact expectations by summation over the demographic mixture."""
    demographics = demographics or default_demographics()
    weights = demographics.band_weights()
    cells: list[tuple[str | None, float]] = [
        (band.label, w) for band, w in zip(demographics.age_bands, weights)
    ]
    if demographics.age_null_fraction > 0.0:
        cells.append((None, demographics.age_null_fraction))

    rates: dict[str, float] = {}
    for variant in sorted(model.base_logit):
        rates[variant] = sum(
            w * logistic(model.click_logit(variant, band)) for band, w in cells
        )

    directions: dict[tuple[str, str], str] = {}
    names = sorted(rates)
    for a in names:
        for b in names:
            if a == b:
                continue
            diff = rates[a] - rates[b]
            if abs(diff) < 1e-12:
                directions[(a, b)] = "eq"
            else:
                directions[(a, b)] = "gt" if diff > 0 else "lt"

    p_auth = model.funnel_conditionals["auth_given_click"]
    p_redeem = model.funnel_conditionals["redeem_given_auth"]
    funnel = {
        v: (r, r * p_auth, r * p_auth * p_redeem) for v, r in rates.items()
    }
    return OracleReport(
        expected_click_rate=rates,
        pairwise_directions=directions,
        expected_funnel=funnel,
    )


def binomial_se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n)
