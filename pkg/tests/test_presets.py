from __future__ import annotations

import json

import numpy as np
import pytest

from kerrwell.errors import UsageError
from kerrwell.hilbert import ModelParams
from kerrwell.presets import FIGURES, _preset_table, optimal_asymmetry, reproduce_figure


def test_optimal_asymmetry_dominates_symmetric_point(bath):
    curve = optimal_asymmetry([4.0, 5.0], (0.0, 1.5), bath, dim=30, step=0.25)
    assert not curve.errors
    assert np.all(curve.T_star >= curve.T_symmetric * (1 - 1e-12))
    assert np.all((curve.eps1_star >= 0.0) & (curve.eps1_star <= 1.5))


def test_optimal_asymmetry_chemical_axes(bath):
    curve = optimal_asymmetry([6.0], (0.0, 0.5), bath, base=ModelParams.chemical(), dim=30, step=0.25)
    assert curve.depth_axis == "k2"
    assert curve.T_star[0] >= curve.T_symmetric[0]


def test_optimal_asymmetry_rejects_empty_range(bath):
    with pytest.raises(UsageError):
        optimal_asymmetry([4.0], (1.0, 1.0), bath)


def test_every_grid_preset_uses_default_bath():
    for name, (desc, spec, _) in _preset_table(1.0).items():
        assert desc
        assert spec.dissipation.kappa == 0.025 and spec.dissipation.n_th == 0.05
    fig6c = _preset_table(1.0)["fig6C"][1]
    assert fig6c.model.k2 == 12.6 and fig6c.model.family.value == "chemical"


def test_fine_multiplier_scales_grids():
    coarse, fine = _preset_table(1.0)["fig3B"][1], _preset_table(2.0)["fig3B"][1]
    assert fine.axes[0].count == 2 * (coarse.axes[0].count - 1) + 1


def test_reproduce_writes_checked_manifest(tmp_path):
    res = reproduce_figure("fig2B", tmp_path, fine=0.2)
    man = json.loads((tmp_path / "fig2B.manifest.json").read_text())
    assert man["figure"] == "fig2B" and man["resolution_multiplier"] == 0.2
    assert man["checks"] and all({"check", "tolerance", "value", "passed"} <= set(c) for c in man["checks"])
    assert len(res.rows) == 31


def test_unknown_figure():
    assert "fig6C" in FIGURES
    with pytest.raises(UsageError):
        reproduce_figure("fig9Z", write=False)
