"""Acceptance suite: criteria 1 to 10 once, then a second run for determinism (11).

Each criterion prints a PASS/FAIL line, with output capture disabled so the
lines show up in a plain ``pytest -v`` log.
"""

import pytest

from signorini_lab.validation import files_identical, run_validation

SEED = 0


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("validate_a")
    results = run_validation(out, seed=SEED)
    return out, {r.number: r for r in results}


@pytest.fixture(scope="module")
def second_run(tmp_path_factory, first_run):
    out = tmp_path_factory.mktemp("validate_b")
    run_validation(out, seed=SEED, echo=lambda s: None)
    return out


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(first_run, number, capsys):
    r = first_run[1][number]
    with capsys.disabled():
        print(f"\n{r.line()}")
    assert r.passed, r.details


def test_criterion_11_determinism(first_run, second_run, capsys):
    same, diffs = files_identical(first_run[0], second_run)
    with capsys.disabled():
        print(f"\n[{'PASS' if same else 'FAIL'}] 11. validate twice with one seed: byte-identical outputs")
    assert same, diffs
