"""Study-level properties of the estimators, on the shared 1000-replicate runs."""

import pytest

from conftest import MC_CONFIGS, MC_LENGTHS

PARAMS = ("alpha", "theta")


@pytest.mark.slow
@pytest.mark.parametrize(
    "family, alpha, theta", [c for c in MC_CONFIGS if c[0] in ("bernoulli", "geometric")]
)
def test_cmle_has_smallest_rmse(mc_study, family, alpha, theta):
    rep = mc_study(family, alpha, theta)
    bad = []
    for T in MC_LENGTHS.get((family, alpha, theta), (100, 300)):
        for p in PARAMS:
            ml = rep.cell(T, "cmle", p).rmse
            for m in ("cls", "yw"):
                other = rep.cell(T, m, p).rmse
                if not ml < other:
                    bad.append(f"T={T} {p}: cmle {ml:.4f} vs {m} {other:.4f}")
    assert not bad, bad


@pytest.mark.slow
@pytest.mark.parametrize("family, alpha, theta", MC_CONFIGS)
def test_bias_shrinks_with_length(mc_study, family, alpha, theta):
    rep = mc_study(family, alpha, theta)
    bad = []
    for m in ("cls", "yw", "cmle"):
        for p in PARAMS:
            b100, b300 = abs(rep.cell(100, m, p).abias), abs(rep.cell(300, m, p).abias)
            if not b300 < b100:
                bad.append(f"{m}/{p} |bias| {b100:.4f}->{b300:.4f}")
    assert not bad, bad


@pytest.mark.slow
@pytest.mark.parametrize("family, alpha, theta", MC_CONFIGS)
def test_cell_accounting(mc_study, family, alpha, theta):
    rep = mc_study(family, alpha, theta)
    for c in rep.cells:
        assert c.n_ok + c.n_failed == rep.config.replicates
        if c.n_ok:
            assert c.rmse**2 >= c.abias**2 - 1e-12
