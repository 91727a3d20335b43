"""One line per acceptance criterion, at the stated tolerances."""
import pytest

from hull_lab.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA])
def test_criterion(number):
    r = run_criterion(number)
    status = "PASS" if r.passed else "FAIL"
    print(f"\ncriterion {r.number} [{status}] {r.title}: expected {r.expected}; "
          f"observed {r.observed} ({r.seconds:.1f}s, budget {r.budget:g}s)")
    assert r.passed, r.observed
