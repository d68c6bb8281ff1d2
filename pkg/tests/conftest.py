"""Shared corpus builders and the acceptance-criteria summary."""

import re

from fairpoison import Corpus, Example


def make_corpus(rows, name="test") -> Corpus:
    """Build a corpus from (text, label, group) triples with stable ids."""
    examples = tuple(
        Example(id=f"{i:06d}", text=text, label=label, group=group)
        for i, (text, label, group) in enumerate(rows)
    )
    return Corpus(examples=examples, name=name)


def balanced_corpus(per_cell: int, name="balanced") -> Corpus:
    """per_cell examples in each (label, group) cell, distinct texts."""
    rows = []
    for label in (0, 1):
        for group in (0, 1):
            for i in range(per_cell):
                rows.append((f"w{label}{group}{i} tok{i} filler", label, group))
    return make_corpus(rows, name=name)


# --- acceptance summary -------------------------------------------------
#
# tests/test_acceptance.py names its tests test_criterion_<n>_<slug>; the
# hooks below collect their outcomes and print one line per criterion at
# the end of the run.

CRITERION_NAMES = {
    1: "poisoning conformance",
    2: "metric oracle equivalence",
    3: "gradient correctness",
    4: "directional fairness degradation",
    5: "ratio monotonicity",
    6: "condition ablation ordering",
    7: "natural trigger derivation",
    8: "CLI determinism",
    9: "dataset statistics",
}

_OUTCOMES: dict[int, str] = {}
_DETAILS: dict[int, str] = {}


def acceptance_detail(criterion: int, text: str) -> None:
    """Attach a short result string to a criterion's summary line."""
    _DETAILS[criterion] = text


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if match is None:
        return
    num = int(match.group(1))
    if report.skipped:
        _OUTCOMES[num] = "SKIP"
    elif report.failed:
        _OUTCOMES[num] = "FAIL"
    elif report.passed and report.when == "call":
        _OUTCOMES.setdefault(num, "PASS")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_OUTCOMES):
        line = f"criterion {num} ({CRITERION_NAMES.get(num, '?')}): {_OUTCOMES[num]}"
        if num in _DETAILS:
            line += f"  [{_DETAILS[num]}]"
        terminalreporter.write_line(line)
