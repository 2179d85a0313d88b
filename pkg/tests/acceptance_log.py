"""Collects one verdict line per acceptance criterion for the session summary."""

LINES: list[str] = []


def record(number: int, name: str, passed: bool, detail: str) -> bool:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    LINES.append(line)
    print(line)
    return passed
