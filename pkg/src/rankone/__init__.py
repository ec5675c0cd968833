"""Rank-one cutting-and-stacking constructions, counting certificates for
products of powers, and the Kakutani-Parry Markov shift family."""

from rankone.errors import (
    BudgetExceeded,
    NotADescendant,
    SpecViolation,
    StagesExhausted,
)
from rankone.heights import (
    HeightSet,
    RankOneSpec,
    build_family,
    comb_construct,
    schedule_M,
    verify_comb_properties,
)

__all__ = [
    "BudgetExceeded",
    "HeightSet",
    "NotADescendant",
    "RankOneSpec",
    "SpecViolation",
    "StagesExhausted",
    "build_family",
    "comb_construct",
    "schedule_M",
    "verify_comb_properties",
]

__version__ = "0.1.0"
