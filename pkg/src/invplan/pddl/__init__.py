"""Parsing, grounding and evaluation for the gameshow PDDL subset."""

from .ast import (
    TRUE,
    ActionSchema,
    And,
    Arith,
    Assign,
    Atom,
    Constant,
    DomainAst,
    Exists,
    FluentRef,
    Formula,
    Not,
    NumericComparison,
    Or,
    Signature,
    free_variables,
    substitute,
)
from .grounding import ActionInstance, GridSpec, ProblemInstance, ground_actions, ground_schema
from .parser import PddlSyntaxError, SemanticError, check_domain, parse_action, parse_domain, parse_formula
from .printer import format_action, format_domain, format_expr, format_formula
from .semantics import (
    IllegalEffect,
    State,
    UnboundVariable,
    UnknownFluent,
    apply_effect,
    eval_expr,
    eval_formula,
)
