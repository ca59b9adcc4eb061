import math

import numpy as np
from hypothesis import given, strategies as st

from psiproj.report import CheckRow, VerificationReport
from psiproj.sampling import Residual, array_residual

rows = st.builds(
    CheckRow,
    check=st.sampled_from(["axiom.idempotent", "spectral.hermitian", "modulus.square"]),
    index=st.sampled_from(["", "j=1", "j=-1,l=1"]),
    order=st.one_of(st.none(), st.integers(0, 5)),
    residual=st.one_of(st.none(), st.floats(0, 1e3), st.just(math.inf)),
    tolerance=st.sampled_from([1e-8, 1e-10]),
    passed=st.one_of(st.none(), st.booleans()),
    samples=st.integers(0, 100),
    skipped=st.integers(0, 5),
)


@given(st.lists(rows, max_size=20), st.sampled_from([None, "model: bad"]))
def test_json_round_trip(rs, error):
    rep = VerificationReport(rows=rs, config={"model": "x", "seed": 1}, error=error)
    back = VerificationReport.from_json(rep.to_json())
    assert back.sorted_rows() == rep.sorted_rows()
    assert back.config == rep.config and back.error == rep.error
    assert back.to_json() == rep.to_json()


def test_summary_and_status():
    rep = VerificationReport()
    rep.extend([CheckRow.measured("a", "", 0, Residual(1e-12, 10, 0), 1e-8),
                CheckRow.measured("b", "", 0, Residual(1e-6, 10, 0), 1e-8),
                CheckRow.not_applicable("c")])
    assert rep.summary == {"total": 3, "passed": 1, "failed": 1, "not_applicable": 1}
    assert not rep.ok and [r.check for r in rep.failures()] == ["b"]
    md = rep.markdown()
    assert "| b |" in md and "fail" in md and "n/a" in md


def test_no_valid_samples_fails():
    row = CheckRow.measured("a", "", 0, Residual(0.0, 0, 10), 1e-8)
    assert row.passed is False


def test_array_residual_skips_bad_points():
    diff = np.array([[1e-3], [np.nan], [2e-3]])
    res = array_residual(diff, np.array([False, False, True]))
    assert res.value == 1e-3 and res.samples == 1 and res.skipped == 2
