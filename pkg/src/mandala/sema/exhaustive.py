"""Pattern coverage over constructors and tuples."""

from __future__ import annotations


def _is_wild(p) -> bool:
    # works for both typed-tree and IR patterns: anything without structure binds everything
    return p is None or not (hasattr(p, "elems") or hasattr(p, "subs"))


def exhaustive(rows: list, types: list, ctors_of) -> bool:
    """True iff the pattern matrix ``rows`` covers every value of ``types``.

    ``ctors_of(t)`` returns one tuple of field types per constructor of the ADT ``t``.
    """
    if not types:
        return bool(rows)
    t, rest = types[0], list(types[1:])
    if t.head == "Tuple":
        n = len(t.args)
        expanded = []
        for row in rows:
            head = row[0]
            subs = [None] * n if _is_wild(head) else list(head.elems)
            expanded.append(subs + list(row[1:]))
        return exhaustive(expanded, list(t.args) + rest, ctors_of)
    if t.head == "Adt":
        for k, fields in enumerate(ctors_of(t)):
            spec = []
            for row in rows:
                head = row[0]
                if _is_wild(head):
                    spec.append([None] * len(fields) + list(row[1:]))
                elif head.ctor == k:
                    spec.append(list(head.subs) + list(row[1:]))
            if not exhaustive(spec, list(fields) + rest, ctors_of):
                return False
        return True
    return exhaustive([list(r[1:]) for r in rows if _is_wild(r[0])], rest, ctors_of)
