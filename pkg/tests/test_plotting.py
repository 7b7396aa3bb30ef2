import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pevgame.montecarlo import HeterogeneityModel, SweepRecord, uniform_gamma_model, poa_sweep, valley_fill_experiment
from pevgame.plotting import render_svg

NS = "{http://www.w3.org/2000/svg}"


def _rec(m=5, trial=0, rel=0.01, norm=1.0):
    return SweepRecord(m, trial, 0, 1.0, 1.0 + rel, rel, 1.0 + rel, norm, 3, 4, "converged")


def _parse(svg):
    root = ET.fromstring(svg.split("\n", 1)[1])
    assert root.tag == NS + "svg"
    assert root.get("viewBox") == "0 0 800 600"
    return root


def _marks(root):
    return [e for e in root.iter() if e.get("class") == "mark"]


def test_single_record_has_one_mark():
    for kind in ("poa-sweep", "hetero-sweep"):
        root = _parse(render_svg([_rec()], kind))
        assert len(_marks(root)) == 1


def test_boxplot_has_a_mean_per_m():
    recs = [_rec(m, k, rel=0.01 * (k + 1) / m) for m in (5, 10, 20) for k in range(6)]
    root = _parse(render_svg(recs, "poa-sweep"))
    assert len(_marks(root)) == 3
    texts = [t.text for t in root.iter(NS + "text")]
    assert {"5", "10", "20"} <= set(texts)
    assert "number of agents m" in texts and "relative error" in texts


def test_histogram_panel_per_m():
    recs = [_rec(m, k, norm=1 + 0.01 * k) for m in (25, 100) for k in range(10)]
    root = _parse(render_svg(recs, "hetero-sweep"))
    texts = [t.text for t in root.iter(NS + "text")]
    assert "m = 25" in texts and "m = 100" in texts


def test_valley_fill_has_three_lines_and_legend():
    model = HeterogeneityModel.continuous(0, 2, np.zeros(5), np.ones(5), seed=1)
    profs = valley_fill_experiment(model, [3, 8], [2, 1, 0.5, 1, 2])
    root = _parse(render_svg(profs, "valley-fill"))
    lines = list(root.iter(NS + "polyline"))
    assert len(lines) == 6
    assert sorted({p.get("data-series") for p in lines}) == ["nash", "non-PEV", "social"]
    legend = [t.text for g in root.iter(NS + "g") if g.get("class") == "legend" for t in g.iter(NS + "text")]
    assert legend == ["social", "nash", "non-PEV"]


def test_output_is_deterministic():
    recs = poa_sweep(uniform_gamma_model(seed=3), [3, 6], trials=3)
    assert render_svg(recs, "poa-sweep") == render_svg(list(recs), "poa-sweep")
    assert render_svg(recs, "hetero-sweep") == render_svg(recs, "hetero-sweep")


def test_labels_use_twelve_point_sans():
    root = _parse(render_svg([_rec()], "poa-sweep"))
    for t in root.iter(NS + "text"):
        assert t.get("font-family") == "sans-serif"


def test_text_is_escaped():
    svg = render_svg([_rec()], "poa-sweep", title="a < b & c")
    assert "a &lt; b &amp; c" in svg
    _parse(svg)


def test_errors():
    with pytest.raises(ValueError):
        render_svg([], "poa-sweep")
    with pytest.raises(ValueError):
        render_svg([_rec()], "scatter")
    with pytest.raises(ValueError):
        render_svg([_rec(rel=float("nan"))], "poa-sweep")
