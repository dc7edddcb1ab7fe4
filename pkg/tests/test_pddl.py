from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from invplan.pddl import (
    TRUE,
    And,
    Atom,
    Exists,
    IllegalEffect,
    Not,
    Or,
    PddlSyntaxError,
    ProblemInstance,
    SemanticError,
    UnboundVariable,
    UnknownFluent,
    apply_effect,
    eval_expr,
    eval_formula,
    format_action,
    format_domain,
    ground_actions,
    ground_schema,
    parse_action,
    parse_domain,
    parse_formula,
)
from invplan.resources import base_domain, domain_for_variant, operator_text
from invplan.translate import FixtureStore

TYPES_ONLY = "(define (domain bare) (:types agent key door trophy color - object))"


def _problem(domain, objects, facts=(), fluents=None):
    return ProblemInstance(domain, dict(objects), frozenset(facts), dict(fluents or {}), {})


def _state(domain, objects, facts=(), fluents=None):
    return _problem(domain, objects, facts, fluents).initial_state()


# -- parsing ---------------------------------------------------------------------


def test_appendix_unlock_operator_shape():
    schema = parse_action(operator_text("color_same"), base_domain())
    assert schema.name == "unlock"
    assert [t for _, t in schema.parameters] == ["agent", "key", "door"]
    parts = schema.precondition.parts
    exists = [p for p in parts if isinstance(p, Exists)]
    ors = [p for p in parts if isinstance(p, Or)]
    assert len(exists) == 1 and exists[0].type == "color"
    assert len(ors) == 1 and len(ors[0].parts) == 4


def test_domain_without_actions():
    domain = parse_domain(TYPES_ONLY)
    assert domain.actions == ()
    assert set(domain.types) >= {"agent", "key", "door", "trophy", "color"}


def test_undeclared_predicate_is_named():
    text = operator_text("generic").replace("(has ?a ?k)", "(haz ?a ?k)")
    with pytest.raises(SemanticError) as info:
        parse_action(text, base_domain())
    assert info.value.name == "haz"
    assert "haz" in str(info.value)


def test_undeclared_type_and_variable():
    with pytest.raises(SemanticError):
        parse_action("(:action a :parameters (?x - gizmo) :precondition (and) :effect (and))", base_domain())
    with pytest.raises(SemanticError):
        parse_action("(:action a :parameters (?k - key) :precondition (onmap ?j) :effect (and))", base_domain())


def test_syntax_error_reports_position():
    with pytest.raises(PddlSyntaxError) as info:
        parse_domain("(define (domain x)\n  (:types agent)")
    assert info.value.line >= 1 and info.value.column >= 1
    with pytest.raises(PddlSyntaxError) as info:
        parse_domain("(define (domain x))\n)")
    assert info.value.line == 2


def test_effect_rejects_disjunction():
    text = "(:action a :parameters (?k - key) :precondition (and) :effect (or (onmap ?k) (onmap ?k)))"
    with pytest.raises((PddlSyntaxError, SemanticError, IllegalEffect)):
        parse_action(text, base_domain())


def _fixture_domains():
    out = {v: domain_for_variant(v) for v in ("generic", "color_same", "color_different")}
    for fx in FixtureStore.load().fixtures.values():
        if fx.operator:
            out[fx.stimulus_id] = base_domain().with_action(parse_action(fx.operator, base_domain()))
    return out


@pytest.mark.parametrize("name,domain", sorted(_fixture_domains().items()))
def test_round_trip_through_printer(name, domain):
    assert parse_domain(format_domain(domain)) == domain


def test_action_printer_round_trip():
    schema = parse_action(operator_text("color_different"), base_domain())
    assert parse_action(format_action(schema), base_domain()) == schema


# -- grounding -------------------------------------------------------------------


def test_grounding_counts():
    domain = base_domain()
    pickup = domain.action("pickup")
    two_keys = _problem(domain, {"alice": "agent", "k1": "key", "k2": "key"})
    assert len(ground_schema(parse_action(
        "(:action p :parameters (?k - key) :precondition (onmap ?k) :effect (and (not (onmap ?k))))", domain),
        two_keys)) == 2
    problem = _problem(domain, {"alice": "agent", "k1": "key", "k2": "key", "k3": "key", "d1": "door", "d2": "door"})
    unlock = domain.action("unlock")
    assert len(ground_schema(unlock, problem)) == 6
    assert len(ground_schema(pickup, problem)) == 3


def test_grounding_is_lexicographic_and_deterministic():
    domain = base_domain()
    problem = _problem(domain, {"alice": "agent", "kb": "key", "ka": "key", "d1": "door"})
    first = ground_actions(domain, problem)
    assert first == ground_actions(domain, problem)
    pickups = [g.args for g in first if g.name == "pickup"]
    assert pickups == [("alice", "ka"), ("alice", "kb")]


def test_empty_grounding_allowed():
    domain = base_domain()
    assert ground_schema(domain.action("unlock"), _problem(domain, {"alice": "agent"})) == []


def test_color_same_grounding_filters_by_precondition():
    """Oracle: enumerate (key, door) pairs and keep those whose colours match."""
    domain = domain_for_variant("color_same")
    colors = {"k1": "red", "k2": "yellow", "d1": "red", "d2": "green"}
    objects = {"alice": "agent", "k1": "key", "k2": "key", "d1": "door", "d2": "door",
               "red": "color", "yellow": "color", "green": "color"}
    facts = [("has", "alice", "k1"), ("has", "alice", "k2"), ("locked", "d1"), ("locked", "d2")]
    facts += [("iscolor", o, c) for o, c in colors.items()]
    fluents = {("xloc", "alice"): 1, ("yloc", "alice"): 1, ("xloc", "d1"): 1, ("yloc", "d1"): 0,
               ("xloc", "d2"): 0, ("yloc", "d2"): 1}
    state = _state(domain, objects, facts, fluents)
    grounded = ground_schema(domain.action("unlock"), _problem(domain, objects))
    enabled = {g.args[1:] for g in grounded if eval_formula(state, g.precondition)}
    expected = {(k, d) for k, d in itertools.product(("k1", "k2"), ("d1", "d2")) if colors[k] == colors[d]}
    assert enabled == expected == {("k1", "d1")}


# -- evaluation ------------------------------------------------------------------

OBJECTS = {"alice": "agent", "k1": "key", "k2": "key", "d1": "door", "red": "color", "yellow": "color"}


def test_eval_formula_examples():
    domain = base_domain()
    state = _state(domain, OBJECTS, [("has", "alice", "k1"), ("iscolor", "k1", "red")],
                   {("xloc", "alice"): 2, ("yloc", "alice"): 3, ("picked", "alice"): 1})
    holds_red = parse_formula("(exists (?k - key) (and (has alice ?k) (iscolor ?k red)))", domain)
    holds_yellow = parse_formula("(exists (?k - key) (and (has alice ?k) (iscolor ?k yellow)))", domain)
    assert eval_formula(state, holds_red)
    assert not eval_formula(state, holds_yellow)
    assert eval_formula(state, parse_formula("(= (picked alice) 1)", domain))
    assert eval_formula(state, parse_formula("(= (+ (xloc alice) 1) (yloc alice))", domain))
    assert eval_formula(state, TRUE)
    assert eval_formula(state, Not(Atom("locked", ("d1",))))


def test_eval_binding_and_unbound():
    domain = base_domain()
    state = _state(domain, OBJECTS, [("has", "alice", "k2")])
    formula = Atom("has", ("?a", "?k"))
    assert eval_formula(state, formula, {"?a": "alice", "?k": "k2"})
    with pytest.raises(UnboundVariable):
        eval_formula(state, formula, {"?a": "alice"})


def test_undefined_fluent_makes_comparison_false_and_unknown_raises():
    domain = base_domain()
    state = _state(domain, OBJECTS, fluents={("xloc", "alice"): 0})
    assert not eval_formula(state, parse_formula("(= (xloc alice) (xloc k1))", domain))
    assert eval_expr(state, parse_formula("(= (xloc k1) 0)", domain).lhs) is None
    with pytest.raises(UnknownFluent):
        state.value(("zloc", "alice"))


def test_apply_unlock_effect():
    domain = base_domain()
    state = _state(domain, OBJECTS, [("has", "alice", "k1"), ("locked", "d1")], {("picked", "alice"): 1})
    effect = domain.action("unlock").effect
    after = apply_effect(state, effect, {"?a": "alice", "?k": "k1", "?d": "d1"})
    assert not after.holds(("has", "alice", "k1"))
    assert not after.holds(("locked", "d1"))
    assert after.value(("picked", "alice")) == 1
    assert state.holds(("locked", "d1"))  # input untouched


def test_apply_pickup_increments_counter_from_old_state():
    domain = base_domain()
    state = _state(domain, OBJECTS, [("onmap", "k2")], {("picked", "alice"): 2})
    after = apply_effect(state, domain.action("pickup").effect, {"?a": "alice", "?k": "k2"})
    assert after.value(("picked", "alice")) == 3
    assert after.holds(("has", "alice", "k2")) and not after.holds(("onmap", "k2"))


def test_illegal_effect():
    domain = base_domain()
    state = _state(domain, OBJECTS)
    with pytest.raises(IllegalEffect):
        apply_effect(state, Or((Atom("locked", ("d1",)),)))
    with pytest.raises(IllegalEffect):
        apply_effect(state, And((Exists("?c", "color", Atom("iscolor", ("d1", "?c"))),)))


ATOM_POOL = [("has", "alice", "k1"), ("has", "alice", "k2"), ("locked", "d1"), ("onmap", "k1"), ("onmap", "k2"),
             ("iscolor", "k1", "red"), ("iscolor", "d1", "yellow")]


@given(facts=st.sets(st.sampled_from(ATOM_POOL)), adds=st.sets(st.sampled_from(ATOM_POOL)),
       deletes=st.sets(st.sampled_from(ATOM_POOL)), picked=st.integers(0, 5))
def test_frame_property(facts, adds, deletes, picked):
    """Atoms and fluents the effect does not mention keep their values."""
    domain = base_domain()
    deletes = deletes - adds
    state = _state(domain, OBJECTS, facts, {("picked", "alice"): picked, ("xloc", "alice"): 4})
    effect = And(tuple(Atom(a[0], a[1:]) for a in sorted(adds))
                 + tuple(Not(Atom(d[0], d[1:])) for d in sorted(deletes)))
    after = apply_effect(state, effect)
    for atom in ATOM_POOL:
        if atom in adds:
            assert after.holds(atom)
        elif atom in deletes:
            assert not after.holds(atom)
        else:
            assert after.holds(atom) == state.holds(atom)
    assert after.fluent_map == state.fluent_map
