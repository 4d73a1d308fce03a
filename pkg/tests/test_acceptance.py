"""The thirteen acceptance criteria at full sample sizes.

Each test runs the verification suite(s) behind one criterion with their
default configurations, prints one PASS/FAIL line and asserts that every row,
negative controls included, passed.  Thresholds live in
``interlace_lab.verify.DEFAULTS``.
"""

import pytest

from interlace_lab import verify

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

CRITERIA = [
    (1, "eigenfunction identity, residual < 1e-9", ["eigenfunction"]),
    (2, "Hua-Pickrell invariance, KS < 0.015", ["invariance"]),
    (3, "semigroup intertwining, within 3 combined SE", ["intertwining-mc"]),
    (4, "intermediate intertwining at N=1, gap < 5e-3 and monotone in h", ["eq26"]),
    (5, "Siegmund duality, MC within 3 SE and PDE gap < 1e-3", ["duality"]),
    (6, "measure coherency, KS < 0.01", ["coherency"]),
    (7, "boundary-kernel coherency, KS < 0.01", ["boundary-coherency"]),
    (8, "DBM and OU boundary flows, gaps < 5/sqrt(N)", ["boundary-dbm", "boundary-ou"]),
    (9, "Gibbs propagation, KS < 0.02 with failing control", ["gibbs"]),
    (10, "matrix vs vector and stationarity, KS < 0.02; N=1 arbitration", ["matrix-vs-vector"]),
    (11, "CUE invariance KS < 0.015; direct vs pushforward KS < 0.02", ["cue"]),
    (12, "block-kernel identities < 1e-2, improving under refinement", ["block-kernel"]),
    (13, "push-block scaling within 3 SE, error decreasing in M", ["pushblock"]),
]

SUPPLEMENTARY = [
    ("h-transform", "dual h-transform of the level-N semigroup"),
    ("approximation", "embedded Hua-Pickrell draws settle as N grows"),
]


def _describe(r):
    return f"{r.name}={r.status}({r.statistic:.4g}<={r.threshold:.4g}, n={r.n_samples})"


def _run(suites):
    reports = []
    for name in suites:
        reports += verify.suite(name, {"workers": verify.default_workers()})
    return reports


@pytest.mark.parametrize("number,title,suites", CRITERIA, ids=[f"criterion{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, title, suites, acceptance_log):
    reports = _run(suites)
    ok = bool(reports) and verify.all_passed(reports)
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} :: " + "; ".join(map(_describe, reports))
    print(line)
    acceptance_log.append(line)
    assert ok, line


@pytest.mark.parametrize("name,title", SUPPLEMENTARY, ids=[s[0] for s in SUPPLEMENTARY])
def test_supplementary(name, title, acceptance_log):
    reports = _run([name])
    ok = verify.all_passed(reports)
    line = f"[{'PASS' if ok else 'FAIL'}] supplementary {name}: {title} :: " + "; ".join(map(_describe, reports))
    print(line)
    acceptance_log.append(line)
    assert ok, line
