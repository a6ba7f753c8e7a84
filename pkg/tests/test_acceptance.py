"""Acceptance gate: criteria 1 to 10 at their stated tolerances.

Each test prints one ``criterion N [PASS/FAIL] ...`` line (visible with
``pytest -s`` or in the captured output of a failure).  Criterion 10 runs the
``check`` subcommand in a fresh interpreter so that caches filled by the other
tests cannot shorten its measured runtime.
"""
from __future__ import annotations

import subprocess
import sys
import time

import pytest

from neckglue import acceptance
from neckglue.cli import CHECK_BUDGET

CRITERIA = {fn.__name__: fn for fn in acceptance.CRITERIA}


@pytest.mark.parametrize("name", sorted(CRITERIA, key=lambda s: int(s.rsplit("_", 1)[1])))
def test_criterion(name):
    res = CRITERIA[name]()
    print(res.line())
    assert res.passed, res.line()


def test_criterion_10_check_subcommand():
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "neckglue", "check"],
        capture_output=True,
        text=True,
        timeout=2 * CHECK_BUDGET,
    )
    elapsed = time.perf_counter() - start
    lines = [line for line in proc.stdout.splitlines() if line.startswith("criterion ")]
    for line in lines:
        print(line)
    passed = proc.returncode == 0 and elapsed < CHECK_BUDGET
    print(f"criterion 10 [{'PASS' if passed else 'FAIL'}] check subcommand: exit {proc.returncode}, "
          f"{elapsed:.1f} s wall (budget {CHECK_BUDGET:g} s)")
    assert len(lines) == 10
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert elapsed < CHECK_BUDGET
