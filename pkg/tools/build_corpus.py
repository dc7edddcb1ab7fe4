"""Regenerate the shipped corpus, scenario and operator fixtures, and few-shot pools.

Run from the repository root: ``python tools/build_corpus.py``.
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "invplan" / "data"
TROPHIES = ["gold", "silver", "bronze"]
INTRO = "There are three trophies placed throughout this obstacle course: gold, silver, or bronze."
GENERIC_RULES = ("Keys to unlock the doors are placed around the obstacle course. On this course, each door "
                 "has exactly 1 lock on it. All of the keys on this course work on all of the locks. "
                 "However, each key can only be used one time.")
SAME_RULES = ("Keys to unlock the doors are placed around the obstacle course. On this course, each door "
              "is unlocked by a key of the corresponding color.")
DIFF_RULES = ("Keys to unlock the doors are placed around the obstacle course. On this course, each door "
              "can be unlocked by any key that is a different color than the door. For example, yellow keys "
              "cannot unlock yellow doors, but can unlock green and red doors.")
PENALTY = ("In this game, players lose points if they pick up more keys than needed. "
           "You may assume that players will use all the keys they pick up.")
UNCLEAR = "It's unclear what Alice would do next."


def has_color(color: str) -> str:
    return f"(exists (?k - key) (and (has Alice ?k) (iscolor ?k {color})))"


def keyed(obstacles, locations, keys, observation, variant, penalize, max_obstacle=None):
    return {
        "agent": ["Alice"],
        "goals": TROPHIES,
        "locations": locations,
        "obstacles": obstacles,
        "keys": keys,
        "max_obstacle": max_obstacle or max(len(v) for v in obstacles.values()),
        "keys_per_door": 1,
        "len_key": len(keys),
        "goal_count": 3,
        "observation_type": "has_objects",
        "observation": observation,
        "dynamics_variant": variant,
        "penalize_extra_keys": penalize,
    }


def spatial(constraints, walks):
    return {
        "agent": ["Alice"],
        "goals": TROPHIES,
        "obstacles": {},
        "keys": [],
        "max_obstacle": 0,
        "keys_per_door": 1,
        "len_key": 0,
        "goal_count": 3,
        "observation_type": "action_sequence",
        "observation": [{"direction": d, "steps": n} for d, n in walks],
        "spatial_constraints": [{"target": t, "anchor": a, "direction": d, "steps": n}
                                for t, a, d, n in constraints],
        "dynamics_variant": "spatial",
    }


def generic(gold, silver, bronze, picked, sentence):
    locks = {"gold": gold, "silver": silver, "bronze": bronze}
    rooms = {"gold": "Room A", "silver": "Room B", "bronze": "Room C"}
    obstacles = {rooms[t]: ["*"] * n for t, n in locks.items() if n}
    locations = {t: rooms[t] for t, n in locks.items() if n}
    observation = f"(= (picked Alice) {picked})" if picked else "(and)"
    parts = []
    for t, n in locks.items():
        if n == 0:
            parts.append(f"The {t} trophy isn't behind a door.")
        elif n == 1:
            parts.append(f"To get to the {t} trophy, you need to unlock 1 door.")
        else:
            parts.append(f"To get to the {t} trophy, you need to unlock {n} different doors.")
    text = "\n\n".join([INTRO, " ".join(parts), GENERIC_RULES, PENALTY,
                        f"Alice is a participant on this course. {sentence}"])
    return text, keyed(obstacles, locations, ["*"] * sum(locks.values()), observation, "generic", True)


STIMULI = []


def add(sid, variant, text, record):
    STIMULI.append((sid, variant, text, record))


# generic ------------------------------------------------------------------------
for sid, locks, picked, sentence in [
    ("generic_01", (2, 1, 0), 2, "You see Alice go over and pick up two keys."),
    ("generic_02", (2, 1, 0), 1, "You see Alice go over and pick up one key."),
    ("generic_03", (1, 1, 2), 2, "You see Alice go over and pick up two keys."),
    ("generic_04", (0, 1, 1), 1, "You see Alice go over and pick up one key."),
    ("generic_05", (1, 2, 0), 0, UNCLEAR),
]:
    text, record = generic(*locks, picked, sentence)
    add(sid, "generic", text, record)

# colour variants ----------------------------------------------------------------
add("color_same_01", "color_same", "\n\n".join([
    INTRO,
    "The gold and silver trophies are both located behind a yellow door. To get to the yellow door, "
    "you first need to go through a green door. To go to the bronze trophy, you need to go through a red door.",
    SAME_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a yellow key."]),
    keyed({"Room A": ["Y", "G"], "Room B": ["R"]},
          {"gold": "Room A", "silver": "Room A", "bronze": "Room B"}, ["y", "g", "r"],
          has_color("yellow"), "color_same", True))
add("color_same_02", "color_same", "\n\n".join([
    INTRO,
    "The gold trophy is behind a green door. The silver trophy is behind a door with a yellow and a red lock. "
    "The bronze trophy is behind a red door.",
    SAME_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a red key."]),
    keyed({"Room A": ["G"], "Room B": ["Y", "R"], "Room C": ["R"]},
          {"gold": "Room A", "silver": "Room B", "bronze": "Room C"}, ["g", "y", "r"],
          has_color("red"), "color_same", True))
add("color_same_03", "color_same", "\n\n".join([
    INTRO,
    "The gold trophy is behind a yellow door. The silver trophy is behind a red door. "
    "The bronze trophy isn't behind a door.",
    SAME_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a yellow key."]),
    keyed({"Room A": ["Y"], "Room B": ["R"]},
          {"gold": "Room A", "silver": "Room B"}, ["y", "r"],
          has_color("yellow"), "color_same", True))
add("color_same_04", "color_same", "\n\n".join([
    INTRO,
    "The gold trophy is behind a red door. The silver trophy is behind a green door. "
    "The bronze trophy is behind a yellow door.",
    SAME_RULES, "Alice is a participant on this course. You see Alice pick up a green key.", UNCLEAR]),
    keyed({"Room A": ["R"], "Room B": ["G"], "Room C": ["Y"]},
          {"gold": "Room A", "silver": "Room B", "bronze": "Room C"}, ["r", "g", "y"],
          has_color("green"), "color_same", False))

add("color_different_01", "color_different", "\n\n".join([
    INTRO,
    "The gold and silver trophies are both located behind a yellow door. "
    "To go to the bronze trophy, you need to go through a red door.",
    DIFF_RULES.replace("green and red doors.", "doors in green or red."), PENALTY,
    "Alice is a participant on this course. You see Alice pick up a yellow key.", UNCLEAR]),
    keyed({"Room A": ["Y"], "Room B": ["R"]},
          {"gold": "Room A", "silver": "Room A", "bronze": "Room B"}, ["y", "r"],
          has_color("yellow"), "color_different", True))
add("color_different_02", "color_different", "\n\n".join([
    "There are three trophies placed throughout this obstacle course: gold, silver, or bronze, which are "
    "placed in rooms labeled A, B, and C, respectively.",
    "Room A is behind a door with a yellow and green lock on it. Room B is behind a door with a red lock on it. "
    "Room C is behind a door with its own yellow lock on it.",
    DIFF_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a yellow key.", UNCLEAR]),
    keyed({"Room A": ["Y", "G"], "Room B": ["R"], "Room C": ["Y"]},
          {"gold": "Room A", "silver": "Room B", "bronze": "Room C"}, ["y", "g", "r"],
          has_color("yellow"), "color_different", True))
add("color_different_03", "color_different", "\n\n".join([
    INTRO,
    "The gold trophy is behind a green door. The silver trophy is behind a yellow and red door. "
    "The bronze trophy is behind a red door.",
    "Keys to unlock the doors are placed around the obstacle course. On this course, each door can be "
    "unlocked by any key as long as it is of a different color than the door.",
    "You see Alice picking up a red key. What would be the likely trophy Alice wants to get?"]),
    keyed({"Room A": ["G"], "Room B": ["Y", "R"], "Room C": ["R"]},
          {"gold": "Room A", "silver": "Room B", "bronze": "Room C"}, ["g", "y", "r"],
          has_color("red"), "color_different", False))
add("color_different_04", "color_different", "\n\n".join([
    INTRO,
    "The gold trophy is behind a red door. The silver trophy is behind a green door. "
    "The bronze trophy isn't behind a door.",
    DIFF_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a green key."]),
    keyed({"Room A": ["R"], "Room B": ["G"]},
          {"gold": "Room A", "silver": "Room B"}, ["r", "g"],
          has_color("green"), "color_different", True))

# spatial ------------------------------------------------------------------------
NAMES = {"E": "East", "W": "West", "N": "North", "S": "South"}


def spatial_text(constraints, walks):
    lines = []
    for t, a, d, n in constraints:
        anchor = "Alice" if a == "alice" else f"the {a} trophy"
        unit = "step" if n == 1 else "steps"
        lines.append(f"The {t} trophy is {n} {unit} {NAMES[d]} of {anchor}.")
    walk = " and then ".join(f"{n} {'step' if n == 1 else 'steps'} {NAMES[d]}" for d, n in walks)
    return "\n\n".join([INTRO + " Alice is a participant on this course.", " ".join(lines),
                        f"You see Alice walking {walk}."])


for sid, constraints, walks in [
    ("spatial_01", [("gold", "alice", "E", 1), ("silver", "alice", "S", 3), ("bronze", "silver", "E", 3)], [("E", 3)]),
    ("spatial_02", [("gold", "alice", "N", 2), ("silver", "alice", "S", 2), ("bronze", "alice", "W", 4)], [("S", 1)]),
    ("spatial_03", [("gold", "alice", "E", 3), ("silver", "alice", "W", 3), ("bronze", "alice", "N", 4)], [("W", 2)]),
    ("spatial_04", [("gold", "alice", "E", 2), ("silver", "alice", "S", 3), ("bronze", "alice", "S", 5)], [("S", 4)]),
    ("spatial_05", [("gold", "alice", "E", 2), ("silver", "gold", "S", 2), ("bronze", "alice", "S", 4)],
     [("S", 2), ("E", 1)]),
]:
    add(sid, "spatial", spatial_text(constraints, walks), spatial(constraints, walks))

def main() -> None:
    fixtures = DATA / "fixtures"
    if fixtures.exists():
        shutil.rmtree(fixtures)
    corpus = []
    for sid, variant, text, record in STIMULI:
        d = fixtures / sid
        d.mkdir(parents=True)
        (d / "scenario.json").write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
        if variant in ("color_same", "color_different"):
            shutil.copy(DATA / "operators" / f"{variant}.pddl", d / "operator.pddl")
        corpus.append({"id": sid, "variant": variant, "text": text, "goals": TROPHIES, "fixture": sid})
    (DATA / "corpus.json").write_text(json.dumps(corpus, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(corpus)} stimuli")




# held-out few-shot pairs (never part of the corpus) --------------------------------
def fewshot_scenarios():
    out = []
    for locks, picked, sentence in [((1, 0, 2), 1, "You see Alice go over and pick up one key."),
                                    ((0, 2, 1), 2, "You see Alice go over and pick up two keys."),
                                    ((2, 0, 1), 0, UNCLEAR)]:
        text, record = generic(*locks, picked, sentence)
        out.append(("generic", text, record))
    out.append(("color_same", "\n\n".join([
        INTRO, "The gold trophy is behind a red door. The silver and bronze trophies are both behind a green door.",
        SAME_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a green key."]),
        keyed({"Room A": ["R"], "Room B": ["G"]}, {"gold": "Room A", "silver": "Room B", "bronze": "Room B"},
              ["r", "g"], has_color("green"), "color_same", True)))
    out.append(("color_same", "\n\n".join([
        INTRO, "The gold trophy is behind a door with a red and a green lock. The silver trophy is behind a yellow "
        "door. The bronze trophy isn't behind a door.",
        SAME_RULES, "Alice is a participant on this course. You see Alice pick up a red key."]),
        keyed({"Room A": ["R", "G"], "Room B": ["Y"]}, {"gold": "Room A", "silver": "Room B"},
              ["r", "g", "y"], has_color("red"), "color_same", False)))
    out.append(("color_same", "\n\n".join([
        INTRO, "The gold trophy is behind a yellow door. The silver trophy is behind a green door. "
        "The bronze trophy is behind a red door.",
        SAME_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a yellow key."]),
        keyed({"Room A": ["Y"], "Room B": ["G"], "Room C": ["R"]},
              {"gold": "Room A", "silver": "Room B", "bronze": "Room C"},
              ["y", "g", "r"], has_color("yellow"), "color_same", True)))
    out.append(("color_different", "\n\n".join([
        INTRO, "The gold trophy is behind a green door. The silver trophy is behind a red door. "
        "The bronze trophy is behind a yellow door.",
        DIFF_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a red key."]),
        keyed({"Room A": ["G"], "Room B": ["R"], "Room C": ["Y"]},
              {"gold": "Room A", "silver": "Room B", "bronze": "Room C"},
              ["g", "r", "y"], has_color("red"), "color_different", True)))
    out.append(("color_different", "\n\n".join([
        INTRO, "The gold and bronze trophies are both behind a red door. The silver trophy isn't behind a door.",
        DIFF_RULES, "Alice is a participant on this course. You see Alice pick up a green key."]),
        keyed({"Room A": ["R"]}, {"gold": "Room A", "bronze": "Room A"},
              ["r", "g"], has_color("green"), "color_different", False)))
    out.append(("color_different", "\n\n".join([
        INTRO, "The gold trophy is behind a door with a yellow and a red lock. The silver trophy is behind a "
        "green door. The bronze trophy is behind a red door.",
        DIFF_RULES, PENALTY, "Alice is a participant on this course. You see Alice pick up a green key."]),
        keyed({"Room A": ["Y", "R"], "Room B": ["G"], "Room C": ["R"]},
              {"gold": "Room A", "silver": "Room B", "bronze": "Room C"},
              ["y", "r", "g"], has_color("green"), "color_different", True)))
    for constraints, walks in [
        ([("gold", "alice", "W", 2), ("silver", "alice", "E", 2), ("bronze", "silver", "S", 2)], [("E", 1)]),
        ([("gold", "alice", "N", 3), ("silver", "gold", "E", 2), ("bronze", "alice", "S", 3)], [("N", 2)]),
        ([("gold", "alice", "S", 4), ("silver", "alice", "E", 4), ("bronze", "alice", "W", 1)], [("S", 1), ("E", 1)]),
    ]:
        out.append(("spatial", spatial_text(constraints, walks), spatial(constraints, walks)))
    return [{"variant": v, "text": t, "code": json.dumps(r)} for v, t, r in out]


def fewshot_operators():
    generic_op = (DATA / "operators" / "generic.pddl").read_text(encoding="utf-8").strip()
    same_op = (DATA / "operators" / "color_same.pddl").read_text(encoding="utf-8").strip()
    return [
        {"variant": "color_same", "text": "\n\n".join([
            "Alice is playing a treasure game to pick up exactly one trophy.",
            "There are 3 trophies: gold, silver and bronze, located in room A, room C and room B. There is "
            "1 yellow and 1 green lock for Room A, a red lock for room B and a yellow lock for room C.",
            "Alice needs to unlock the locks to enter the rooms. Each lock can be unlocked with a key with the "
            "same color. Each key can only be used once.",
            "You see Alice go over to pick up a red key.", UNCLEAR]), "code": same_op},
        {"variant": "color_same", "text": "\n\n".join([
            INTRO, "The gold trophy is behind a red door. The silver and bronze trophies are both behind a green door.",
            SAME_RULES, "You see Alice pick up a green key."]), "code": same_op},
        {"variant": "generic", "text": "\n\n".join([
            INTRO, "To get to the gold trophy, you need to unlock 1 door. The silver trophy isn't behind a door.",
            GENERIC_RULES, "You see Alice go over and pick up one key."]), "code": generic_op},
        {"variant": "generic", "text": "\n\n".join([
            INTRO, "To get to the silver trophy, you need to unlock 2 different doors.",
            GENERIC_RULES, UNCLEAR]), "code": generic_op},
    ]


def write_fewshot() -> None:
    d = DATA / "fewshot"
    d.mkdir(exist_ok=True)
    (d / "scenario_ir.json").write_text(json.dumps(fewshot_scenarios(), indent=2) + "\n", encoding="utf-8")
    (d / "operator.json").write_text(json.dumps(fewshot_operators(), indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
    write_fewshot()
