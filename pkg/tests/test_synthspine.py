import numpy as np
import pytest

from spinecobb.cobb import measure
from spinecobb.contour import ANATOMICAL_LABELS, extract_regions, filter_small
from spinecobb.errors import SpecInfeasibleError
from spinecobb.synthspine import SynthSpec, analytic_cobb, generate, polygon_distance, spec_for_cobb


def test_straight_spine():
    mask, gt = generate(SynthSpec())
    assert mask.width == 512 and mask.height == 1024
    assert gt.labels == ANATOMICAL_LABELS
    assert all(a == 0.0 for a in gt.upper_angles + gt.lower_angles)
    assert analytic_cobb(gt).theta == 0.0
    assert measure(mask).result.theta == 0.0


def test_region_count():
    mask, _ = generate(SynthSpec(amplitude=40.0, jitter=1.0, seed=5))
    assert len(filter_small(extract_regions(mask), 200)) == 18


def test_deterministic():
    spec = SynthSpec(amplitude=35.0, jitter=1.5, seed=11)
    m1, g1 = generate(spec)
    m2, g2 = generate(spec)
    assert m1 == m2 and g1 == g2
    m3, _ = generate(SynthSpec(amplitude=35.0, jitter=1.5, seed=12))
    assert m3 != m1


def test_tilted_endpoints_give_twenty():
    target = spec_for_cobb(20.0)
    gt = generate(target)[1]
    assert analytic_cobb(gt).theta == pytest.approx(20.0, abs=1e-4)
    # Half-wave c-curve: the end vertebrae lean in opposite directions.
    assert gt.tilts[0] < 0 < gt.tilts[-1]


@pytest.mark.parametrize("target", [5.0, 15.0, 30.0, 45.0])
def test_measured_matches_analytic(target):
    mask, gt = generate(spec_for_cobb(target))
    got = measure(mask).result.theta
    assert got == pytest.approx(analytic_cobb(gt).theta, abs=1.0)


def test_polynomial_centerline():
    spec = SynthSpec(centerline="polynomial", poly_coeffs=(0.0, 200.0, -200.0))
    mask, gt = generate(spec)
    assert analytic_cobb(gt).theta > 5
    assert measure(mask).result.theta == pytest.approx(analytic_cobb(gt).theta, abs=1.5)


def test_ground_truth_dict():
    _, gt = generate(spec_for_cobb(12.0))
    d = gt.to_dict()
    assert len(d["vertebrae"]) == 18
    assert d["cobb"]["severity"] == "mild"


@pytest.mark.parametrize(
    "spec,match",
    [
        (SynthSpec(gap=1.0), "gap"),
        (SynthSpec(vertebra_count=3), "vertebra_count"),
        (SynthSpec(scales=(1.0,) * 5), "scales"),
        (SynthSpec(centerline="spiral"), "centerline"),
        (SynthSpec(jitter=-1.0), "jitter"),
    ],
)
def test_invalid_specs(spec, match):
    with pytest.raises(SpecInfeasibleError, match=match):
        generate(spec)


def test_off_canvas_names_vertebra():
    with pytest.raises(SpecInfeasibleError) as exc:
        generate(SynthSpec(height=600))
    assert exc.value.index is not None
    assert f"vertebra {exc.value.index}" in str(exc.value)


def test_overlap_names_vertebra():
    with pytest.raises(SpecInfeasibleError) as exc:
        generate(SynthSpec(gap=2.0, jitter=3.0, seed=0, amplitude=60.0))
    assert exc.value.index is not None


def test_from_dict_rejects_unknown():
    with pytest.raises(SpecInfeasibleError, match="unknown"):
        SynthSpec.from_dict({"amplitude": 1.0, "bogus": 2})
    assert SynthSpec.from_dict(SynthSpec(seed=3).to_dict()) == SynthSpec(seed=3)


def test_digest_stable():
    assert SynthSpec().digest() == SynthSpec().digest()
    assert SynthSpec(seed=1).digest() != SynthSpec().digest()


def test_polygon_distance():
    a = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
    b = a + [5, 0]
    c = a + [1, 1]
    assert polygon_distance(a, b) == pytest.approx(3.0)
    assert polygon_distance(a, c) == 0.0
