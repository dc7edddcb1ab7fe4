"""Access to the files shipped in ``invplan/data``."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from .pddl import DomainAst, parse_action, parse_domain

VARIANTS = ("generic", "color_same", "color_different", "spatial")


def data_path(*parts: str) -> Path:
    return Path(__file__).parent.joinpath("data", *parts)


def read_text(*parts: str) -> str:
    return data_path(*parts).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def base_domain() -> DomainAst:
    return parse_domain(read_text("domain.pddl"))


def operator_text(variant: str) -> str:
    """Reference unlock operator for a dynamics variant (spatial uses the generic one)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown dynamics variant '{variant}'")
    return read_text("operators", f"{'generic' if variant == 'spatial' else variant}.pddl")


@lru_cache(maxsize=None)
def domain_for_variant(variant: str) -> DomainAst:
    base = base_domain()
    return base.with_action(parse_action(operator_text(variant), base))


def domain_with_operator(operator: str | None, variant: str = "generic") -> DomainAst:
    """Base domain with the unlock schema replaced by ``operator`` (PDDL text), if given."""
    if operator is None:
        return domain_for_variant(variant)
    base = base_domain()
    return base.with_action(parse_action(operator, base))
