import math
import os

import numpy as np
import pytest

import mixsim

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "..", "tools", "configs")

PINNED = """
[experiment]
name = smoke
seeds = 0..1
T = 50

[objective]
kind = quadratic
d = 4
seed = 5

[noise]
sigma = 0.5

[schedule]
kind = constant
alpha = 0.05

[protocol.ar]
kind = allreduce
n = 4
"""


def test_allreduce_mixing_time_is_n():
    for n in (2, 4, 8):
        p = mixsim.Protocol("allreduce", n)
        assert mixsim.estimate_tmix(p) == n
        assert mixsim.theoretical_tmix(p) == n


def test_ring_mixing_time_matches_theory():
    p = mixsim.Protocol("syncgossip", 8, topology="ring")
    assert mixsim.estimate_tmix(p) == 40


def test_sparsified_wraps_inner_protocol():
    p = mixsim.Protocol("sparsified", 4, d=8, eta=0.25, inner="allreduce")
    assert p.kind == "sparsified"
    assert mixsim.estimate_tmix(p) == 16


def test_characterize_reports_no_violations():
    report = mixsim.characterize(mixsim.Protocol("asyncgossip", 4), probes=16, windows=8)
    assert report["passing"]
    assert report["violations"] == 0
    assert report["xi_hat"] <= report["xi_declared"] * (1 + 1e-6)


def test_nocomm_raises():
    with pytest.raises(mixsim.MixingNotObserved):
        mixsim.estimate_tmix(mixsim.Protocol("nocomm", 3), max_window=256)
    assert issubclass(mixsim.MixingNotObserved, mixsim.Error)


def test_invalid_protocol_raises():
    with pytest.raises(mixsim.Error):
        mixsim.Protocol("slack", 4, gamma=0.0)


def test_run_returns_columns_and_summary():
    cfg = mixsim.Config.parse(PINNED)
    assert cfg.keys() == ["ar-n4-T50"]
    trace = mixsim.run(cfg, "ar-n4-T50", seed=1)
    assert trace["f"].shape == trace["grad_sq"].shape
    assert trace["f"].dtype == np.float64
    assert trace["summary"]["T"] == 50
    assert np.all(trace["stat_dist"] >= 0)
    again = mixsim.run(cfg, "ar-n4-T50", seed=1)
    np.testing.assert_array_equal(trace["f"], again["f"])
    with pytest.raises(KeyError):
        mixsim.run(cfg, "missing")


def test_shipped_config_loads():
    cfg = mixsim.Config.load(os.path.join(CONFIGS, "rate.ini"))
    assert len(cfg.keys()) == 12
    assert len(cfg.seeds) == 32


def test_bad_config_reports_line():
    with pytest.raises(mixsim.Error, match="2"):
        mixsim.Config.parse("[experiment]\nbogus = 1\n")


def test_sam_lipschitz_known_values():
    assert mixsim.sam_lipschitz(0.0, 0.0, 0.999, 1.0, L=2.0) == pytest.approx(8.0)
    assert mixsim.sam_lipschitz(0.5, 0.0, 0.999, 0.5, L=1.0, ginf=2.0) == pytest.approx(80.0)


def test_sequence_inequality_holds():
    rng = np.random.default_rng(0)
    a = np.sort(rng.uniform(0, 1, 20))[::-1]
    b = rng.uniform(0, 1, 20)
    r = mixsim.check_lemma5(a.tolist(), b.tolist(), 0.5, 3)
    assert r["holds_linear"] and r["holds_squared"]
    assert r["lhs_linear"] <= r["rhs_linear"]


def test_spearman():
    assert mixsim.spearman([1, 2, 3], [3, 5, 9]) == pytest.approx(1.0)
    assert math.isclose(mixsim.spearman([1, 2, 3], [3, 2, 1]), -1.0)
