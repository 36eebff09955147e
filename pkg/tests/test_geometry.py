import math

import numpy as np
import pytest

from hodgescat.expressions import parse_expression
from hodgescat.geometry import (ChartMetric, CircleSection, ConformalFactor,
                                GeometryError, WarpedModel,
                                conformal_curvature, conformal_rescale,
                                connection_deviation, curvature_oracle_in_frame,
                                euclidean_metric, homogenized_radius,
                                kulkarni_nomizu, lipschitz_defect,
                                orthonormal_frame, radius_lower_bound,
                                warped_geometry_check)


# -- conformal rescaling ------------------------------------------------------

def test_rescale_identity_psi_zero():
    g = euclidean_metric(2)
    gbar = conformal_rescale(g, lambda x: 0.0)
    x = np.array([0.3, 0.4])
    assert gbar.volume_weight(x) == 1.0
    for j in range(3):
        assert gbar.fiber_weight(j, x) == 1.0


def test_rescale_constant_weights():
    g = euclidean_metric(2)
    gbar = conformal_rescale(g, lambda x: 0.5)
    x = np.zeros(2)
    assert gbar.volume_weight(x) == pytest.approx(math.e)
    assert gbar.fiber_weight(1, x) == pytest.approx(math.exp(-1.0))


def test_rescale_m3_pointwise():
    g = euclidean_metric(3)
    gbar = conformal_rescale(g, lambda x: 0.1)
    x = np.zeros(3)
    assert gbar.fiber_weight(1, x) == pytest.approx(math.exp(-0.2))
    assert gbar.fiber_weight(3, x) == pytest.approx(math.exp(-0.6))


def test_rescale_involution():
    g = euclidean_metric(2)
    psi = lambda x: 0.3 * math.sin(x[0])
    back = conformal_rescale(conformal_rescale(g, psi),
                             lambda x: -psi(x))
    x = np.array([0.7, -0.2])
    assert back.volume_weight(x) == pytest.approx(1.0, abs=1e-12)
    assert back.fiber_weight(2, x) == pytest.approx(1.0, abs=1e-12)


def test_rescale_domain_mismatch():
    with pytest.raises(GeometryError):
        conformal_rescale(euclidean_metric(2), parse_expression("exp(-r)"))


# -- Kulkarni-Nomizu ----------------------------------------------------------

def test_kn_zero_and_flat():
    z = kulkarni_nomizu(np.zeros((3, 3)), np.zeros((3, 3)))
    assert np.all(z.components == 0.0)
    t = kulkarni_nomizu(np.eye(2), np.eye(2))
    assert t.components[0, 1, 0, 1] == 2.0


def test_kn_symmetries_and_commutativity():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 4)); A = A + A.T
    B = rng.standard_normal((4, 4)); B = B + B.T
    t = kulkarni_nomizu(A, B)
    assert t.check_symmetries(tol=1e-12)
    assert np.allclose(t.components, kulkarni_nomizu(B, A).components)


def test_kn_rejects_asymmetric():
    with pytest.raises(GeometryError):
        kulkarni_nomizu(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))
    with pytest.raises(GeometryError):
        kulkarni_nomizu(np.eye(2), np.eye(3))


# -- conformal curvature vs the finite-difference oracle ----------------------

def test_constant_psi_scales_curvature_exactly():
    g = ChartMetric(2, lambda x: np.diag([1.0, 1.5 + math.sin(x[0]) ** 2]))
    x = np.array([0.7, 0.3])
    rg = curvature_oracle_in_frame(g, x)
    rbar = conformal_curvature(g, lambda y: 0.4, x)
    assert np.allclose(rbar.components, math.exp(-0.8) * rg.components,
                       atol=1e-12)


def test_sphere_from_flat_plane():
    # e^{2 psi} delta with psi = log(2/(1+|x|^2)) is the round unit sphere
    g = euclidean_metric(2)
    psi = lambda x: math.log(2.0 / (1.0 + float(np.dot(x, x))))
    gbar = conformal_rescale(g, psi)
    for pt in ((0.0, 0.0), (0.3, -0.2), (1.0, 0.5)):
        x = np.array(pt)
        rbar = conformal_curvature(g, psi, x)
        frame = math.exp(-psi(x)) * orthonormal_frame(g.matrix(x))
        oracle = curvature_oracle_in_frame(gbar, x, frame=frame)
        assert rbar.sectional() == pytest.approx(1.0, abs=1e-6)
        scale = np.abs(oracle.components).max()
        assert np.abs(rbar.components - oracle.components).max() <= 1e-4 * scale


def test_linear_psi_matches_oracle_m3():
    g = euclidean_metric(3)
    a = np.array([0.3, -0.2, 0.1])
    psi = lambda x: float(a @ np.asarray(x))
    x0 = np.zeros(3)
    rbar = conformal_curvature(g, psi, x0)
    gbar = conformal_rescale(g, psi)
    frame = math.exp(-psi(x0)) * np.eye(3)
    oracle = curvature_oracle_in_frame(gbar, x0, frame=frame)
    scale = np.abs(oracle.components).max()
    assert np.abs(rbar.components - oracle.components).max() <= 1e-6 * scale


def test_curvature_requires_smooth_psi():
    g = euclidean_metric(2)
    with pytest.raises(GeometryError):
        conformal_curvature(g, "not a function", np.zeros(2))


def test_warped_chart_cone_is_flat():
    from hodgescat.geometry import warped_chart_metric
    model = WarpedModel(2, parse_expression("r"), parse_expression("1"),
                        CircleSection(1.0), R_max=10.0)
    g = warped_chart_metric(model)
    oracle = curvature_oracle_in_frame(g, np.array([3.0, 0.5]))
    assert abs(oracle.sectional()) <= 1e-6


# -- connection deviation -----------------------------------------------------

def test_deviation_constant_psi_zero():
    cd = connection_deviation([0.0, 0.0], [1.0, 0.0])
    assert np.all(cd.matrix == 0.0)
    assert cd.frame_norm == 0.0


def test_deviation_example_m2():
    cd = connection_deviation([1.0, 0.0], [1.0, 0.0])
    # deviation(e1, e1) = 2 e1 - e1 = e1; deviation(e2, e1) = e2
    assert np.allclose(cd.matrix, np.eye(2))
    assert cd.frame_norm >= cd.dpsi_norm


def test_deviation_norm_dominates_dpsi_1000_trials():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        m = int(rng.integers(2, 6))
        dp = rng.standard_normal(m)
        y = rng.standard_normal(m)
        cd = connection_deviation(dp, y)
        assert cd.frame_norm >= cd.dpsi_norm - 1e-12


def test_deviation_rejects_bad_frame():
    with pytest.raises(GeometryError):
        connection_deviation([1.0, 0.0], [1.0, 0.0], gram=2 * np.eye(2))


# -- warped geometry checks ---------------------------------------------------

@pytest.mark.parametrize("ftxt,expect", [
    ("r^0.5", True),
    ("exp(r)", True),
    ("exp(r^2)", False),
])
def test_bounded_geometry_profiles(ftxt, expect):
    model = WarpedModel(2, parse_expression(ftxt), parse_expression("1"),
                        CircleSection(1.0))
    v = warped_geometry_check(model)
    assert v.complete is True
    assert v.volume_noncollapse is True
    assert v.bounded_geometry is expect


def test_bounded_geometry_needs_unit_lapse():
    model = WarpedModel(2, parse_expression("r"), parse_expression("2"),
                        CircleSection(1.0))
    v = warped_geometry_check(model)
    assert v.bounded_geometry is None


# -- radius lower bounds ------------------------------------------------------

def test_radius_lipschitz_constant_profile():
    rb = radius_lower_bound("lipschitz", h_tilde=lambda x: 0.7 + 0 * np.asarray(x),
                            lipschitz_const=0.0)
    assert rb.r0(3.0) == pytest.approx(0.7)


def test_radius_exponential_value():
    rb = radius_lower_bound("exponential", c1=1.0, c2=1.0,
                            distance=lambda x: np.asarray(x))
    assert rb.r0(0.0) == pytest.approx(math.exp(-1.0))
    assert "C(m,p,q)" in rb.description


def test_radius_bound_below_bruteforce_iota():
    pos = np.linspace(0.0, 30.0, 3001)
    inj = 2.0 + np.sin(pos)
    rb = radius_lower_bound("lipschitz", h_tilde=lambda x: 2.0 + np.sin(x),
                            lipschitz_const=1.0)
    for x in np.linspace(3.0, 27.0, 13):
        iota = homogenized_radius(pos, inj, float(x))
        assert float(rb.r0(x)) <= iota + 1e-6


def test_radius_errors():
    with pytest.raises(GeometryError):
        radius_lower_bound("exponential", c1=-1.0, c2=0.0,
                           distance=lambda x: x)
    with pytest.raises(GeometryError):
        radius_lower_bound("lipschitz", h_tilde=lambda x: x)


# -- Lipschitz defect ---------------------------------------------------------

def test_lipschitz_defect_distance_function():
    pos = np.linspace(0.0, 10.0, 401)
    field = np.minimum(1.0, np.abs(pos - 3.0))
    defect, _ = lipschitz_defect(field, positions=pos)
    assert defect <= 1e-12


def test_lipschitz_defect_detects_slope_two():
    pos = np.linspace(0.0, 10.0, 101)
    defect, _ = lipschitz_defect(2.0 * np.abs(pos - 3.0), positions=pos)
    assert defect > 0


def test_lipschitz_defect_capped_exponential_bound():
    # capped r0 from the exponential mode with C2 <= 1 stays 1-Lipschitz
    rb = radius_lower_bound("exponential", c1=1.0, c2=1.0,
                            distance=lambda x: np.asarray(x))
    pos = np.linspace(0.0, 20.0, 801)
    defect, _ = lipschitz_defect(rb.capped(pos), positions=pos)
    assert defect <= 1e-9


def test_lipschitz_defect_empty():
    with pytest.raises(GeometryError):
        lipschitz_defect([], positions=[])


# -- conformal factor invariants ---------------------------------------------

def test_conformal_factor_sample_agreement():
    rr = np.linspace(1, 5, 9)
    ConformalFactor(parse_expression("exp(-r)"),
                    samples=(rr, np.exp(-rr)))  # consistent: fin
    with pytest.raises(GeometryError):
        ConformalFactor(parse_expression("exp(-r)"),
                        samples=(rr, np.exp(-rr) + 1e-6))


def test_conformal_factor_requires_bound_for_scattering():
    cf = ConformalFactor(parse_expression("r"))
    cf.auto_bounds()
    with pytest.raises(GeometryError):
        cf.require_bounded()


def test_warped_model_invariants():
    with pytest.raises(GeometryError):
        WarpedModel(1, parse_expression("1"), parse_expression("1"),
                    CircleSection(1.0))
    with pytest.raises(GeometryError):
        WarpedModel(2, parse_expression("r - 5"), parse_expression("1"),
                    CircleSection(1.0), R_max=10.0)


def test_radius_bound_invariants():
    from hodgescat.geometry import RadiusBound
    RadiusBound(h=lambda r: 0.5 + 0 * np.asarray(r), p=4.0, q=1.2, m=2)
    with pytest.raises(GeometryError):
        RadiusBound(h=lambda r: 0.5, p=2.0, q=1.2, m=3)       # p <= m
    with pytest.raises(GeometryError):
        RadiusBound(h=lambda r: 0.5, p=4.0, q=1.5, m=2)       # q >= sqrt(2)
    with pytest.raises(GeometryError):
        RadiusBound(h=lambda r: 0.5, p=4.0, q=1.2, m=2, C1=0.0)
    with pytest.raises(GeometryError):
        RadiusBound(h=lambda r: 2.0 + 0 * np.asarray(r), p=4.0, q=1.2, m=2)
