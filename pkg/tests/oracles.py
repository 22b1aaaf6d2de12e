"""Independent reference computations used to check the production code.

Nothing here imports the reasoning or conformal implementations; the
oracles work from first principles (exhaustive enumeration, exact
rational counts) so a shared bug cannot hide on both sides.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product


def brute_force_reason(scene_labels, triple, facts):
    """Enumerate every fully specified (tool, action, object) completion.

    ``scene_labels`` is the scene as an ordered list of (label, kind) with
    kind in {"tool", "anatomy"}; ``triple`` is (tool|None, action, target|None);
    ``facts`` is a collection of (tool, action, object) triples.

    Returns ``(flags, resolved, candidates)`` where flags are
    (tool_missing, action_invalid, target_unclear).
    """
    tool_slot, action, target_slot = triple
    fact_set = set(map(tuple, facts))
    present_tools = [lab for lab, kind in scene_labels if kind == "tool"]
    present_objs = [lab for lab, kind in scene_labels if kind == "anatomy"]

    every_tool = {f[0] for f in fact_set} | set(present_tools)
    every_obj = {f[2] for f in fact_set} | set(present_objs)

    def fits(t, o):
        return (tool_slot is None or t == tool_slot) and (target_slot is None or o == target_slot)

    # type level: any completion at all, present or not
    type_level = {
        (t, o) for t, o in product(every_tool, every_obj) if fits(t, o) and (t, action, o) in fact_set
    }
    # scene level: both ends visible
    grounded = {
        (t, o)
        for t, o in product(set(present_tools), set(present_objs))
        if fits(t, o) and (t, action, o) in fact_set
    }
    capable_present = {t for t in present_tools if any(tt == t for tt, _ in type_level)}

    action_invalid = int(not type_level)
    tool_missing = int(bool(type_level) and not capable_present)
    if target_slot is not None:
        target_unclear = int(target_slot not in present_objs)
        targets = set() if target_unclear else {target_slot}
    else:
        if capable_present:
            targets = {o for _, o in grounded}
        else:
            targets = {o for _, o in type_level if o in present_objs}
        target_unclear = int(len(targets) != 1)

    flags = (tool_missing, action_invalid, target_unclear)
    resolved = None
    if flags == (0, 0, 0):
        (target,) = targets
        tool = next(t for t in present_tools if (t, target) in grounded)
        resolved = (tool, action, target)
    return flags, resolved, grounded


def evidence_exact(flags, weights) -> Fraction:
    ws = [Fraction(w) for w in weights]
    return sum(w * s for w, s in zip(ws, flags)) / sum(ws)


def p_value_by_formula(calib_flags, test_flags, weights, hypothesis: str) -> Fraction:
    """(|{i : alpha_i >= alpha_test}| + 1) / (|C| + 1), all in exact rationals."""

    cache: dict = {}

    def score(flags):
        key = tuple(flags)
        if key not in cache:
            e = evidence_exact(flags, weights)
            cache[key] = e if hypothesis == "non_ambiguous" else 1 - e
        return cache[key]

    alpha_test = score(test_flags)
    alphas = [score(f) for f in calib_flags]
    numerator = len([a for a in alphas if a >= alpha_test]) + 1
    return Fraction(numerator, len(alphas) + 1)
