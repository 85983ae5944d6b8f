"""Collects one summary line per acceptance criterion for the end-of-run report."""

LINES = {}


def report(number: int, title: str, ok: bool, detail: str) -> None:
    LINES[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
