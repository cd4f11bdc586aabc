"""Collects one result line per acceptance criterion for the terminal summary."""

LINES = []


def record(number, ok, title, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}: {detail}"
    LINES.append((number, line))
    print(line)
    return ok
