import math

import numpy as np
import pytest

from hodgescat.expressions import parse_expression
from hodgescat.geometry import CircleSection, ModeSection, SphereSection, WarpedModel
from hodgescat.complexes import build_graded_complex
from hodgescat.spectral import (CrossSectionSpectrum, SpectralError,
                                SpectralReport, ac_prediction,
                                cross_section_spectrum,
                                essential_bottom_estimate,
                                sphere_function_eigenvalues,
                                truncated_spectrum)

ONE = parse_expression("1")

# frozen by the polar Sturm-Liouville oracle with one Richardson step
S2_DEG1_LOWEST = 2.0


def test_circle_spectrum_fourier():
    cs = cross_section_spectrum(CircleSection(1.0), count=4)
    assert np.array_equal(cs.eigenvalues(0), [0.0, 1.0, 4.0, 9.0])
    assert np.array_equal(cs.eigenvalues(1), cs.eigenvalues(0))
    mults = [m for d, v, m in cs.entries if d == 0]
    assert mults == [1, 2, 2, 2]


def test_circle_radius_scaling():
    cs = cross_section_spectrum(CircleSection(2.0), count=3)
    assert cs.eigenvalues(0)[1] == pytest.approx(0.25)


def test_sphere_oracle_against_closed_form():
    for n in (2, 3):
        lam = sphere_function_eigenvalues(n, count=5)
        exact = [l * (l + n - 1) for l in range(5)]
        assert np.abs(lam - exact).max() <= 1e-6


def test_sphere2_degree1_regression():
    sp2 = cross_section_spectrum(SphereSection(2), count=6)
    assert sp2.lowest(1) == pytest.approx(S2_DEG1_LOWEST, abs=1e-6)
    assert sp2.source == "oracle"


def test_sphere_degree1_unsupported_above_n2():
    sp3 = cross_section_spectrum(SphereSection(3), count=4)
    assert sp3.eigenvalues(1).size == 0  # only degrees 0 and n are produced


def test_explicit_spectrum_roundtrip_and_errors():
    cs = cross_section_spectrum([(0, 0.0, 1), (0, 2.5, 2)])
    assert cs.eigenvalues(0)[1] == 2.5
    with pytest.raises(SpectralError):
        cross_section_spectrum([])
    with pytest.raises(SpectralError):
        cross_section_spectrum([(0, -1.0, 1)])


# -- truncated spectra ---------------------------------------------------------

def test_cylinder_dirichlet_lowest_eigenvalue():
    model = WarpedModel(2, ONE, ONE, CircleSection(1.0), R_max=11.0)
    cx = build_graded_complex(model, boundary_condition="dirichlet",
                              dr=10.0 / 400, n_theta=8)
    ev = truncated_spectrum(cx, 0, 3)
    expected = (math.pi / 10.0) ** 2
    assert abs(ev[0] - expected) <= 0.02 * expected


def test_cylinder_neumann_lowest_zero():
    model = WarpedModel(2, ONE, ONE, CircleSection(1.0), R_max=11.0)
    cx = build_graded_complex(model, boundary_condition="neumann",
                              dr=0.1, n_theta=8)
    assert truncated_spectrum(cx, 0, 2)[0] <= 1e-10


@pytest.mark.parametrize("j", [0, 1, 2])
def test_sector_method_matches_dense(j):
    model = WarpedModel(2, parse_expression("r"), ONE, CircleSection(1.0),
                        R_max=5.0)
    cx = build_graded_complex(model, boundary_condition="dirichlet",
                              dr=0.25, n_theta=6)
    a = truncated_spectrum(cx, j, 20, method="dense")
    b = truncated_spectrum(cx, j, 20, method="sectors")
    assert np.abs(a - b).max() <= 1e-8


def test_arpack_method_matches_dense():
    model = WarpedModel(2, ONE, ONE, CircleSection(1.0), R_max=6.0)
    cx = build_graded_complex(model, boundary_condition="dirichlet",
                              dr=0.25, n_theta=6)
    a = truncated_spectrum(cx, 0, 10, method="dense")
    b = truncated_spectrum(cx, 0, 10, method="arpack")
    assert np.abs(a - b).max() <= 1e-8


def test_count_exceeding_dimension_rejected():
    model = WarpedModel(2, ONE, ONE, CircleSection(1.0), R_max=5.0)
    cx = build_graded_complex(model, boundary_condition="dirichlet",
                              dr=0.25, n_theta=4)
    with pytest.raises(SpectralError):
        truncated_spectrum(cx, 0, cx.dims[0] + 1)


def test_dirichlet_interlacing_degree0():
    # enlarging the truncation radius never raises the k-th eigenvalue
    evs = []
    for R in (11.0, 21.0):
        model = WarpedModel(2, ONE, ONE, CircleSection(1.0), R_max=R)
        cx = build_graded_complex(model, boundary_condition="dirichlet",
                                  dr=0.125, n_theta=8)
        evs.append(truncated_spectrum(cx, 0, 10))
    assert np.all(evs[1] <= evs[0] + 1e-10)


# -- essential bottom ----------------------------------------------------------

def _mode_reports(eigenvalue, radii, dr, count=40):
    reports = []
    for R in radii:
        model = WarpedModel(2, ONE, ONE, ModeSection(eigenvalue, 2 * math.pi),
                            R_max=R)
        cx = build_graded_complex(model, boundary_condition="dirichlet",
                                  dr=dr)
        reports.append(SpectralReport(R, 0,
                                      truncated_spectrum(cx, 0, count)))
    return reports


def test_bottom_mode_sector_k1():
    reports = _mode_reports(1.0, (50.0, 100.0, 200.0), 199.0 / 400)
    est = essential_bottom_estimate(reports)
    assert est.bottom == pytest.approx(1.0, rel=0.05)
    assert est.counts_below[-1] == est.counts_below[-2]


def test_bottom_free_sector_zero():
    reports = _mode_reports(0.0, (40.0, 80.0, 160.0), 0.25)
    est = essential_bottom_estimate(reports)
    assert abs(est.bottom) <= 0.05


def test_bottom_requires_three_increasing_radii():
    reports = _mode_reports(0.0, (40.0, 80.0, 160.0), 0.5)
    with pytest.raises(SpectralError):
        essential_bottom_estimate(reports[:2])
    with pytest.raises(SpectralError):
        essential_bottom_estimate([reports[0], reports[2], reports[1]])


# -- ac predictions -------------------------------------------------------------

@pytest.fixture(scope="module")
def circle_spec():
    return cross_section_spectrum(CircleSection(1.0), count=6)


def test_prediction_ball_core_j0(circle_spec):
    pred = ac_prediction(0.0, circle_spec, 0, ball_core=True)
    assert pred.kind == "equality"
    assert pred.bottom == 0.0
    assert pred.reading_include_zero == 0.0
    assert pred.reading_exclude_zero == 1.0


def test_prediction_positive_b_full_line(circle_spec):
    pred = ac_prediction(0.5, circle_spec, 1, ball_core=True)
    assert pred.kind == "full"
    assert pred.thresholds == [0.0]


def test_prediction_union_thresholds(circle_spec):
    pred = ac_prediction(0.0, circle_spec, 1, ball_core=False)
    assert pred.kind == "containment"
    assert pred.thresholds[:3] == [0.0, 1.0, 4.0]


def test_prediction_degree_minus_one_empty(circle_spec):
    pred = ac_prediction(0.0, circle_spec, 0, ball_core=False)
    # only degree 0 contributes; degree -1 adds nothing
    assert pred.thresholds[0] == 0.0


def test_prediction_rejects_bad_exponent(circle_spec):
    with pytest.raises(SpectralError):
        ac_prediction(1.5, circle_spec, 0)


def test_prediction_missing_degree_data():
    spec = CrossSectionSpectrum([(0, 0.0, 1)], "explicit")
    with pytest.raises(SpectralError):
        ac_prediction(0.0, spec, 2, ball_core=False)


def test_threshold_monotonicity(circle_spec):
    # enlarging the eigenvalue list never raises the predicted bottom
    small = CrossSectionSpectrum([(0, 2.0, 1), (1, 3.0, 1)], "explicit")
    big = CrossSectionSpectrum([(0, 2.0, 1), (0, 0.5, 1), (1, 3.0, 1)],
                               "explicit")
    b_small = ac_prediction(0.0, small, 1).bottom
    b_big = ac_prediction(0.0, big, 1).bottom
    assert b_big <= b_small


def test_duality_symmetry_of_readings(circle_spec):
    # S^1 is Hodge-self-dual: lambda-bar agrees for j and m - j (m = 2)
    for include in (True, False):
        p0 = ac_prediction(0.0, circle_spec, 0, ball_core=True)
        p2 = ac_prediction(0.0, circle_spec, 2, ball_core=True)
        a = (p0.reading_include_zero if include else p0.reading_exclude_zero)
        b = (p2.reading_include_zero if include else p2.reading_exclude_zero)
        assert a == b


def test_counting_function_nondecreasing():
    rep = SpectralReport(10.0, 0, np.array([0.1, 0.5, 1.0]))
    assert rep.counting(0.4) <= rep.counting(0.6)
