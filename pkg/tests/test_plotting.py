"""SVG chart emitter: structure, determinism, geometry."""

from __future__ import annotations

import re

import numpy as np
import pytest

from semibandit.harness import AggregateBand
from semibandit.plotting import policy_colors, render_figures, render_setting_svg


def band(policy, setting="N2-d4-I", scale=1.0):
    steps = np.array([1, 10, 20, 30, 40])
    median = scale * np.array([1.0, 4.0, 6.0, 7.0, 9.0])
    return AggregateBand(
        policy=policy,
        setting=setting,
        gamma_mult=0.5,
        steps=steps,
        median=median,
        q1=median * 0.8,
        q3=median * 1.2,
    )


class TestRenderSetting:
    def test_two_policies_have_exactly_six_paths(self):
        svg = render_setting_svg("N2-d4-I", [band("A"), band("B")])
        assert svg.count("<path ") == 6
        assert "<line " in svg  # axes and ticks are lines, not paths
        assert ">A</text>" in svg and ">B</text>" in svg  # legend labels

    def test_byte_identical_for_identical_input(self):
        a = render_setting_svg("S", [band("A"), band("B")])
        b = render_setting_svg("S", [band("A"), band("B")])
        assert a == b

    def test_median_path_y_monotone_for_monotone_input(self):
        svg = render_setting_svg("S", [band("A")])
        solid = [
            m for m in re.finditer(r'<path d="M([^"]+)"[^>]*stroke-width="2"', svg)
        ]
        assert len(solid) == 1
        coords = solid[0].group(1).replace("L", " ").split()
        ys = [float(pair.split(",")[1]) for pair in coords]
        # Screen y decreases as regret increases (inverted axis).
        assert all(a >= b for a, b in zip(ys, ys[1:]))

    def test_dashed_quartiles(self):
        svg = render_setting_svg("S", [band("A")])
        assert svg.count('stroke-dasharray="6 4"') == 2

    def test_no_external_references(self):
        svg = render_setting_svg("S", [band("A")])
        assert "href" not in svg
        assert "url(" not in svg

    def test_empty_bands_rejected(self):
        with pytest.raises(ValueError):
            render_setting_svg("S", [])


class TestRenderFigures:
    def test_one_file_per_setting(self, tmp_path):
        bands = [band("A", "set-one"), band("B", "set-one"), band("A", "set-two")]
        written = render_figures(bands, tmp_path)
        assert set(written) == {"set-one", "set-two"}
        assert (tmp_path / "regret_set-one.svg").exists()
        assert (tmp_path / "regret_set-two.svg").exists()

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            render_figures([], tmp_path)

    def test_colors_stable_under_order(self):
        assert policy_colors(["B", "A"]) == policy_colors(["A", "B"])
        colors = policy_colors(["A", "B"])
        assert colors["A"] != colors["B"]
