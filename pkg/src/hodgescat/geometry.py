"""Metric descriptors, conformal rescaling, curvature, and radius bounds.

Conventions fixed here and validated against the finite-difference oracle:

* (0,4) curvature: R(X,Y,Z,W) = (R(X,Y)W, Z)_g with
  R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y], so that the
  sectional curvature of orthonormal X, Y is R(X,Y,X,Y).
* Kulkarni-Nomizu: (A o B)(X,Y,Z,W) = A(X,Z)B(Y,W) + A(Y,W)B(X,Z)
  - A(X,W)B(Y,Z) - A(Y,Z)B(X,W).
* Conformal curvature is returned in frame components: for a g-orthonormal
  frame F and the induced gbar-orthonormal frame e^{-psi} F,
  R_gbar[e^{-psi}F] = e^{-2 psi} (R_g[F] - (g o T)[F]),
  T = Hess_g psi - dpsi (x) dpsi + 1/2 |dpsi|_g^2 g.
  (The raw coordinate (0,4) tensors satisfy the same identity with e^{+2 psi};
  frame components are what make "psi = const scales curvature by e^{-2c}"
  literal.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .expressions import Expression, as_expression, tail_boundedness

FD_STEP = 1e-4  # central differences with one Richardson extrapolation


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cross-section descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleSection:
    """Circle cross-section of the given radius."""
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("circle radius must be positive")

    @property
    def dim(self) -> int:
        return 1

    @property
    def volume(self) -> float:
        return 2.0 * math.pi * self.radius


@dataclass(frozen=True)
class SphereSection:
    """Standard unit sphere S^n cross-section."""
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise GeometryError("sphere dimension must be >= 1")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def volume(self) -> float:
        n = self.n
        return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


@dataclass(frozen=True)
class ModeSection:
    """Abstract single cross-sectional mode with a fixed eigenvalue."""
    eigenvalue: float
    volume: float = 1.0

    @property
    def dim(self) -> int:
        return 1


CrossSection = Union[CircleSection, SphereSection, ModeSection]


# ---------------------------------------------------------------------------
# core domain types
# ---------------------------------------------------------------------------

@dataclass
class WarpedModel:
    """Warped-product end [1, oo) x N with metric h^2 dr^2 + f^2 g_N."""

    m: int
    f: Expression
    h_warp: Expression
    cross_section: CrossSection
    b: float = 0.0
    R_max: float = 40.0

    def __post_init__(self):
        if self.m < 2:
            raise GeometryError("ambient dimension must be >= 2")
        self.f = as_expression(self.f)
        self.h_warp = as_expression(self.h_warp)
        rr = np.linspace(1.0, self.R_max, 257)
        if np.min(self.f(rr)) <= 0 or np.min(self.h_warp(rr)) <= 0:
            raise GeometryError("profiles must be positive on [1, R_max]")

    @property
    def n(self) -> int:
        return self.m - 1

    def volume_density(self, r):
        """Radial density of mu_g per unit cross-section volume: h f^n."""
        return self.h_warp(r) * self.f(r) ** self.n


@dataclass
class ConformalFactor:
    """Conformal exponent psi with declared sup bounds (None = unknown)."""

    psi: Union[Expression, Callable, float]
    sup_psi: Optional[float] = None
    sup_dpsi: Optional[float] = None
    sup_hess: Optional[float] = None
    samples: Optional[tuple] = None  # (r_values, psi_values) consistency data

    def __post_init__(self):
        if isinstance(self.psi, (int, float)):
            self.psi = as_expression(float(self.psi))
        if isinstance(self.psi, str):
            self.psi = as_expression(self.psi)
        if self.samples is not None and isinstance(self.psi, Expression):
            rr, vv = self.samples
            rr = np.asarray(rr, float)
            vv = np.asarray(vv, float)
            ref = np.asarray(self.psi(rr), float)
            scale = max(1.0, float(np.abs(ref).max())) if ref.size else 1.0
            if np.any(np.abs(ref - vv) > 1e-12 * scale):
                raise GeometryError(
                    "sampled psi disagrees with the closed form beyond 1e-12")

    def __call__(self, r):
        return self.psi(r)

    def dpsi_dr(self, r):
        if isinstance(self.psi, Expression):
            return self.psi.diff()(r)
        raise GeometryError("derivative data requires a closed-form psi")

    def require_bounded(self):
        if self.sup_psi is None or not np.isfinite(self.sup_psi):
            raise GeometryError(
                "scattering operations need a finite declared sup|psi| "
                "(quasi-isometry of g and gbar)")

    def auto_bounds(self, r0: float = 1.0) -> "ConformalFactor":
        """Fill unknown sup bounds by tail analysis of the closed form."""
        if not isinstance(self.psi, Expression):
            return self
        def sup_of(expr):
            v = tail_boundedness(expr, r0)
            return v.sup if v.bounded else np.inf
        if self.sup_psi is None:
            self.sup_psi = sup_of(self.psi)
        if self.sup_dpsi is None:
            self.sup_dpsi = sup_of(self.psi.diff())
        if self.sup_hess is None:
            self.sup_hess = sup_of(self.psi.diff(2))
        return self


@dataclass
class RadiusBound:
    """Lower-bound data for the capped Sobolev-harmonic radius."""

    h: Union[Expression, Callable]
    K: float = 0.0
    L: float = 0.0
    p: float = 4.0
    q: float = 1.2
    C1: float = 1.0
    C2: float = 0.0
    m: int = 2

    def __post_init__(self):
        if not (self.p > self.m):
            raise GeometryError(f"Sobolev exponent p must exceed m={self.m}")
        if not (1.0 < self.q < math.sqrt(2.0)):
            raise GeometryError("distortion q must lie in (1, sqrt(2))")
        if self.C1 <= 0 or self.C2 < 0:
            raise GeometryError("need C1 > 0 and C2 >= 0")
        hv = self.h(np.linspace(1.0, 50.0, 101)) if callable(self.h) else None
        if hv is not None and (np.min(hv) <= 0 or np.max(hv) > 1 + 1e-12):
            raise GeometryError("radius bound h must take values in (0, 1]")


@dataclass
class CurvatureTensor4:
    """(0,4) algebraic curvature tensor at a point, in a chosen frame."""

    m: int
    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        if self.components.shape != (self.m,) * 4:
            raise GeometryError("curvature tensor must have shape (m,m,m,m)")

    def check_symmetries(self, tol: float = 1e-9) -> bool:
        c = self.components
        scale = max(1.0, float(np.abs(c).max()))
        ok = (np.abs(c + np.swapaxes(c, 0, 1)).max() <= tol * scale
              and np.abs(c + np.swapaxes(c, 2, 3)).max() <= tol * scale
              and np.abs(c - np.transpose(c, (2, 3, 0, 1))).max() <= tol * scale)
        return bool(ok)

    def sectional(self, i: int = 0, j: int = 1) -> float:
        """Sectional curvature of the (orthonormal) frame plane (i, j)."""
        return float(self.components[i, j, i, j])


# ---------------------------------------------------------------------------
# metric descriptors
# ---------------------------------------------------------------------------

class ChartMetric:
    """Metric given by a matrix-valued callable on a coordinate chart."""

    def __init__(self, m: int, matrix_fn: Callable[[np.ndarray], np.ndarray],
                 name: str = "chart", exact_curvature=None):
        self.m = m
        self._matrix_fn = matrix_fn
        self.name = name
        self._exact_curvature = exact_curvature

    def matrix(self, x) -> np.ndarray:
        g = np.asarray(self._matrix_fn(np.asarray(x, dtype=float)), dtype=float)
        if g.shape != (self.m, self.m):
            raise GeometryError("metric matrix has wrong shape")
        return g

    def exact_curvature(self, x) -> Optional[np.ndarray]:
        if self._exact_curvature is None:
            return None
        return self._exact_curvature(np.asarray(x, dtype=float))


def euclidean_metric(m: int) -> ChartMetric:
    eye = np.eye(m)
    return ChartMetric(m, lambda x: eye, name="euclidean",
                       exact_curvature=lambda x: np.zeros((m,) * 4))


def warped_chart_metric(model: WarpedModel) -> ChartMetric:
    """The (r, theta) chart of a surface-of-revolution end (m = 2 only)."""
    if model.m != 2 or not isinstance(model.cross_section,
                                      (CircleSection, ModeSection)):
        raise GeometryError("chart form available for m=2 circle models only")
    rho = getattr(model.cross_section, "radius", 1.0)

    def mat(x):
        r = x[0]
        return np.diag([float(model.h_warp(r)) ** 2,
                        (float(model.f(r)) * rho) ** 2])

    return ChartMetric(2, mat, name="warped")


def _psi_callable(psi) -> Callable[[np.ndarray], float]:
    if isinstance(psi, ConformalFactor):
        inner = psi.psi
    else:
        inner = psi
    if isinstance(inner, (int, float)):
        c = float(inner)
        return lambda x: c
    if isinstance(inner, Expression):
        return lambda x: float(inner(np.asarray(x).reshape(-1)[0]))
    if callable(inner):
        return lambda x: float(inner(np.asarray(x, dtype=float)))
    raise GeometryError(f"cannot interpret conformal factor {psi!r}")


class ConformalMetric(ChartMetric):
    """gbar = e^{2 psi} g, exposing the degree-wise conformal weights."""

    def __init__(self, base: ChartMetric, psi):
        self.base = base
        self.psi_raw = psi
        self._psi = _psi_callable(psi)
        super().__init__(base.m, self._matrix, name=f"conformal({base.name})")

    def _matrix(self, x):
        return np.exp(2.0 * self._psi(x)) * self.base.matrix(x)

    def psi(self, x) -> float:
        return self._psi(x)

    def fiber_weight(self, j: int, x) -> float:
        """Fiber inner-product weight on j-forms: e^{-2 j psi}."""
        if not (0 <= j <= self.m):
            raise GeometryError(f"degree {j} out of range for m={self.m}")
        return float(np.exp(-2.0 * j * self._psi(x)))

    def volume_weight(self, x) -> float:
        """Volume weight mu_gbar / mu_g = e^{m psi}."""
        return float(np.exp(self.m * self._psi(x)))


def conformal_rescale(g_desc: ChartMetric, psi) -> ConformalMetric:
    """Return the descriptor of gbar = e^{2 psi} g.

    Rescaling a ConformalMetric composes the exponents, so rescaling by psi
    and then -psi returns unit weights exactly (up to roundoff in exp).
    """
    radial_psi = (isinstance(psi, Expression)
                  or (isinstance(psi, ConformalFactor)
                      and isinstance(psi.psi, Expression)))
    if radial_psi and g_desc.m > 1 and getattr(g_desc, "name", "") != "warped":
        raise GeometryError(
            "domain mismatch: radial profile psi on a non-radial chart; "
            "pass a callable of the chart point instead")
    if isinstance(g_desc, ConformalMetric):
        inner = _psi_callable(g_desc.psi_raw)
        outer = _psi_callable(psi)
        return ConformalMetric(g_desc.base,
                               lambda x: inner(np.asarray(x)) + outer(np.asarray(x)))
    if not isinstance(g_desc, ChartMetric):
        raise GeometryError("unsupported metric descriptor")
    # probe evaluability at a nominal interior point of the chart
    probe = np.full(g_desc.m, 1.5)
    try:
        _psi_callable(psi)(probe)
    except Exception as exc:
        raise GeometryError(f"psi not evaluable on the metric domain: {exc}")
    return ConformalMetric(g_desc, psi)


# ---------------------------------------------------------------------------
# Kulkarni-Nomizu and curvature
# ---------------------------------------------------------------------------

def kulkarni_nomizu(A: np.ndarray, B: np.ndarray) -> CurvatureTensor4:
    """Kulkarni-Nomizu product of symmetric 2-tensors (fixed convention)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise GeometryError("inputs must be square matrices of equal size")
    scale = max(1.0, np.abs(A).max(), np.abs(B).max())
    if (np.abs(A - A.T).max() > 1e-12 * scale
            or np.abs(B - B.T).max() > 1e-12 * scale):
        raise GeometryError("Kulkarni-Nomizu inputs must be symmetric")
    m = A.shape[0]
    out = (np.einsum("xz,yw->xyzw", A, B) + np.einsum("yw,xz->xyzw", A, B)
           - np.einsum("xw,yz->xyzw", A, B) - np.einsum("yz,xw->xyzw", A, B))
    return CurvatureTensor4(m, out)


def _fd_grad(fn: Callable, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Gradient of a scalar/array-valued fn by 4th-order central differences."""
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        f1 = np.asarray(fn(x + h * e)) - np.asarray(fn(x - h * e))
        f2 = np.asarray(fn(x + 2 * h * e)) - np.asarray(fn(x - 2 * h * e))
        out.append((8.0 * f1 - f2) / (12.0 * h))
    return np.stack(out, axis=0)


def christoffel_fd(g_desc: ChartMetric, x, h: float = FD_STEP) -> np.ndarray:
    """Christoffel symbols Gamma^k_{ij} from finite differences of g."""
    x = np.asarray(x, dtype=float)
    g = g_desc.matrix(x)
    ginv = np.linalg.inv(g)
    dg = _fd_grad(g_desc.matrix, x, h)  # dg[i, a, b] = d_i g_ab
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    term = (np.einsum("ijl->ijl", dg) + np.einsum("jil->ijl", dg)
            - np.einsum("lij->ijl", dg))
    return 0.5 * np.einsum("kl,ijl->kij", ginv, term)


def curvature_fd(g_desc: ChartMetric, x, h: float = FD_STEP) -> np.ndarray:
    """(0,4) coordinate curvature of g at x by the FD Christoffel oracle."""
    x = np.asarray(x, dtype=float)
    g = g_desc.matrix(x)
    gamma = christoffel_fd(g_desc, x, h)
    dgamma = _fd_grad(lambda y: christoffel_fd(g_desc, y, h), x, h)
    # R^s_{l i j} = d_i Gamma^s_{j l} - d_j Gamma^s_{i l}
    #              + Gamma^s_{i a} Gamma^a_{j l} - Gamma^s_{j a} Gamma^a_{i l}
    d_term = np.einsum("isjl->slij", dgamma) - np.einsum("jsil->slij", dgamma)
    gg_term = (np.einsum("sia,ajl->slij", gamma, gamma)
               - np.einsum("sja,ail->slij", gamma, gamma))
    r_up = d_term + gg_term  # [s, l, i, j]
    # R4(i,j,k,l) = g(R(d_i, d_j) d_l, d_k) = g_{k s} R^s_{l i j}
    return np.einsum("ks,slij->ijkl", g, r_up)


def orthonormal_frame(g_matrix: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal frame (inverse Cholesky transpose)."""
    L = np.linalg.cholesky(np.asarray(g_matrix, dtype=float))
    return np.linalg.inv(L).T


def frame_components(t4: np.ndarray, frame: np.ndarray) -> np.ndarray:
    return np.einsum("abcd,ax,by,cz,dw->xyzw", t4, frame, frame, frame, frame)


def _check_orthonormal(frame: np.ndarray, g: np.ndarray, tol: float = 1e-8):
    gram = frame.T @ g @ frame
    if np.abs(gram - np.eye(g.shape[0])).max() > tol:
        raise GeometryError("frame is not orthonormal for the metric")


def curvature_oracle_in_frame(g_desc: ChartMetric, x,
                              frame: Optional[np.ndarray] = None,
                              h: float = FD_STEP) -> CurvatureTensor4:
    """FD Christoffel oracle for R_g, returned in an orthonormal frame."""
    x = np.asarray(x, dtype=float)
    g = g_desc.matrix(x)
    if frame is None:
        frame = orthonormal_frame(g)
    _check_orthonormal(frame, g)
    r4 = g_desc.exact_curvature(x)
    if r4 is None:
        r4 = curvature_fd(g_desc, x, h)
    return CurvatureTensor4(g_desc.m, frame_components(r4, frame))


def conformal_curvature(g_desc: ChartMetric, psi, point,
                        frame: Optional[np.ndarray] = None,
                        h: float = FD_STEP) -> CurvatureTensor4:
    """Curvature of gbar = e^{2 psi} g via the conformal transformation law.

    frame must be g-orthonormal at the point (default: Cholesky frame); the
    result is expressed in the induced gbar-orthonormal frame e^{-psi} frame,
    which is the normalization in which constant psi scales curvature by
    e^{-2 psi}. Cross-check against curvature_oracle_in_frame applied to the
    rescaled descriptor directly.
    """
    x = np.asarray(point, dtype=float)
    g = g_desc.matrix(x)
    if frame is None:
        frame = orthonormal_frame(g)
    _check_orthonormal(frame, g)
    psi_fn = _psi_callable(psi)
    try:
        dpsi = _fd_grad(psi_fn, x, h).reshape(-1)
        d2psi = _fd_grad(lambda y: _fd_grad(psi_fn, y, h).reshape(-1), x, h)
    except Exception as exc:
        raise GeometryError(
            f"insufficient smoothness data to form Hess_g psi: {exc}")
    gamma = (np.zeros((g_desc.m,) * 3) if g_desc.exact_curvature(x) is not None
             and getattr(g_desc, "name", "") == "euclidean"
             else christoffel_fd(g_desc, x, h))
    hess = 0.5 * (d2psi + d2psi.T) - np.einsum("kij,k->ij", gamma, dpsi)
    ginv = np.linalg.inv(g)
    dpsi_sq = float(dpsi @ ginv @ dpsi)
    T = hess - np.outer(dpsi, dpsi) + 0.5 * dpsi_sq * g
    rg4 = g_desc.exact_curvature(x)
    if rg4 is None:
        rg4 = curvature_fd(g_desc, x, h)
    rg_f = frame_components(rg4, frame)
    T_f = frame_components_2(T, frame)
    kn = kulkarni_nomizu(np.eye(g_desc.m), T_f).components
    return CurvatureTensor4(
        g_desc.m, np.exp(-2.0 * psi_fn(x)) * (rg_f - kn))


def frame_components_2(t2: np.ndarray, frame: np.ndarray) -> np.ndarray:
    return frame.T @ np.asarray(t2, dtype=float) @ frame


# ---------------------------------------------------------------------------
# connection deviation (first-order metric deviation)
# ---------------------------------------------------------------------------

@dataclass
class ConnectionDeviation:
    """(nabla_gbar - nabla_g)(., Y) in an orthonormal frame, with norms."""

    matrix: np.ndarray        # row i = frame components of deviation(X_i, Y)
    frame_norm: float         # |nabla_gbar - nabla_g|_g from the frame expansion
    dpsi_norm: float


def connection_deviation(dpsi: Sequence[float], y: Sequence[float],
                         gram: Optional[np.ndarray] = None) -> ConnectionDeviation:
    """Evaluate the conformal connection deviation at a point.

    dpsi, y: frame components of dpsi and of the vector field Y in a
    g-orthonormal frame (gram, if given, is checked to be the identity).
    Returns the endomorphism-valued one-form sample X_i -> deviation(X_i, Y)
    and the full frame norm, which dominates |dpsi|_g.
    """
    a = np.asarray(dpsi, dtype=float)
    yv = np.asarray(y, dtype=float)
    m = a.size
    if yv.size != m:
        raise GeometryError("dpsi and Y must have matching dimension")
    if gram is not None:
        if np.abs(np.asarray(gram, float) - np.eye(m)).max() > 1e-10:
            raise GeometryError("frame is not orthonormal for g")
    eye = np.eye(m)
    dev = (np.outer(a, yv) + float(a @ yv) * eye - np.outer(yv, a))
    # full norm over all frame pairs: |a_j e_k + a_k e_j - delta_jk a|^2 summed
    total = 0.0
    for j in range(m):
        for k in range(m):
            v = a[j] * eye[k] + a[k] * eye[j] - (1.0 if j == k else 0.0) * a
            total += float(v @ v)
    return ConnectionDeviation(dev, math.sqrt(total), float(np.linalg.norm(a)))


# ---------------------------------------------------------------------------
# warped geometry checks (completeness / noncollapse / bounded geometry)
# ---------------------------------------------------------------------------

@dataclass
class WarpedGeometryVerdict:
    complete: Optional[bool]
    volume_noncollapse: Optional[bool]
    bounded_geometry: Optional[bool]
    suprema: dict
    notes: dict


def _positivity(expr: Expression, r0: float = 1.0) -> tuple:
    """Infimum analysis on [r0, oo): (verdict bool/None, inf estimate)."""
    grid = np.linspace(r0, r0 + 60.0, 1201)
    vals = np.asarray(expr(grid), dtype=float)
    head_inf = float(vals.min())
    if head_inf <= 0:
        return False, head_inf
    lim = expr.limit_at_infinity()
    if lim is not None:
        import sympy as sp
        if isinstance(lim, sp.AccumBounds):
            lo = lim.min
            if lo.is_infinite:
                return None, head_inf
            lv = float(lo)
            return (lv > 0 and head_inf > 0), min(head_inf, lv)
        if lim.is_infinite:
            return (head_inf > 0), head_inf
        lv = float(lim)
        return (lv > 0 and head_inf > 0), min(head_inf, lv)
    tail = np.asarray(expr(np.linspace(r0 + 60, 4 * (r0 + 60), 801)), float)
    if np.all(np.diff(tail) >= -1e-12) and tail.min() > 0:
        return True, min(head_inf, float(tail.min()))
    return None, head_inf


def warped_geometry_check(model: WarpedModel) -> WarpedGeometryVerdict:
    """Completeness, volume noncollapse, and bounded-geometry verdicts.

    Bounded geometry follows the three-part profile test: (log f)'',
    (log f')^2 and 1/f^2 all bounded on [1, oo), decided symbolically when
    the profile allows and by sampled tail monotonicity otherwise; that check
    presumes h_warp = 1 and is reported as None (not applicable) otherwise.
    """
    import sympy as sp

    notes: dict = {}
    suprema: dict = {}

    complete, inf_h = _positivity(model.h_warp)
    suprema["inf_h_warp"] = inf_h
    min_hf = Expression(sp.Min(model.h_warp.sym, model.f.sym))
    noncollapse, inf_hf = _positivity(min_hf)
    suprema["inf_min_h_f"] = inf_hf

    h_is_one = model.h_warp.is_constant() and abs(model.h_warp(2.0) - 1.0) < 1e-14
    if not h_is_one:
        notes["bounded_geometry"] = "check requires h_warp == 1"
        return WarpedGeometryVerdict(complete, noncollapse, None, suprema, notes)

    logf = Expression(sp.log(model.f.sym))
    pieces = {
        "sup_logf_dd": logf.diff(2),
        "sup_logf_d_sq": Expression(logf.diff().sym ** 2),
        "sup_inv_f_sq": Expression(1 / model.f.sym ** 2),
    }
    bounded: Optional[bool] = True
    for key, expr in pieces.items():
        verdict = tail_boundedness(expr, 1.0)
        notes[key] = f"{verdict.method}: {verdict.detail}"
        suprema[key] = verdict.sup
        if verdict.status == "unbounded":
            bounded = False
        elif verdict.status == "inconclusive" and bounded is not False:
            bounded = None
    return WarpedGeometryVerdict(complete, noncollapse, bounded, suprema, notes)


# ---------------------------------------------------------------------------
# radius lower bounds and Lipschitz diagnostics
# ---------------------------------------------------------------------------

@dataclass
class RadiusLowerBound:
    """Pointwise lower bound r0 plus the capped bound with symbolic C."""

    r0: Callable
    capped: Callable
    mode: str
    description: str


def radius_lower_bound(mode: str, *, h_tilde: Optional[Callable] = None,
                       lipschitz_const: Optional[float] = None,
                       c1: Optional[float] = None, c2: Optional[float] = None,
                       distance: Optional[Callable] = None,
                       curvature_scale: float = np.inf) -> RadiusLowerBound:
    """Lower bounds for the homogenized injectivity radius.

    mode "lipschitz": r0(x) = h_tilde(x) / (1 + L) for L the Lipschitz
    constant of the continuous injectivity lower bound h_tilde.
    mode "exponential": r0(x) = (C1/e^{C2}) e^{-C2 d(x, x0)}.
    The capped bound min{1, r0, beta} is carried up to the symbolic constant
    C(m, p, q), which the underlying estimate never instantiates.
    """
    if mode == "lipschitz":
        if h_tilde is None or lipschitz_const is None:
            raise GeometryError("lipschitz mode needs h_tilde and its "
                                "Lipschitz constant")
        L = float(lipschitz_const)
        r0 = lambda x: np.asarray(h_tilde(x), dtype=float) / (1.0 + L)
    elif mode == "exponential":
        if c1 is None or c1 <= 0:
            raise GeometryError("exponential mode needs C1 > 0")
        if c2 is None or c2 < 0:
            raise GeometryError("exponential mode needs C2 >= 0")
        if distance is None:
            raise GeometryError("exponential mode needs distance samples")
        scale = c1 / math.exp(c2)
        r0 = lambda x: scale * np.exp(-c2 * np.asarray(distance(x), dtype=float))
    else:
        raise GeometryError(f"unknown mode {mode!r}")

    def capped(x):
        return np.minimum(1.0, np.minimum(r0(x), curvature_scale))

    return RadiusLowerBound(
        r0, capped, mode,
        "C(m,p,q) * min{1, r0(x), beta}; C carried symbolically")


def homogenized_radius(positions: np.ndarray, inj_values: np.ndarray,
                       x: float, t_grid: Optional[np.ndarray] = None) -> float:
    """Brute-force homogenized radius iota(x) on a sampled 1-D profile.

    iota(x) = sup{t > 0 : inf_{|y - x| < t} inj(y) >= t}, evaluated on a
    t-grid against the samples. Used as the oracle for radius_lower_bound.
    """
    positions = np.asarray(positions, dtype=float)
    inj_values = np.asarray(inj_values, dtype=float)
    if t_grid is None:
        t_grid = np.linspace(1e-6, float(inj_values.max()) + 1.0, 2000)
    best = 0.0
    for t in t_grid:
        ball = np.abs(positions - x) < t
        if not ball.any():
            continue
        if inj_values[ball].min() >= t:
            best = float(t)
    return best


def lipschitz_defect(field_values: Sequence[float],
                     positions: Optional[Sequence[float]] = None,
                     dist_matrix: Optional[np.ndarray] = None):
    """Maximal violation of 1-Lipschitz continuity over sample pairs.

    Returns (max of |f(x)-f(y)| - d(x,y), (i, j) attaining it). A field that
    is 1-Lipschitz yields a nonpositive defect up to sampling tolerance.
    """
    f = np.asarray(field_values, dtype=float)
    if f.size == 0:
        raise GeometryError("empty sample set")
    if dist_matrix is None:
        if positions is None:
            raise GeometryError("need positions or a distance matrix")
        pos = np.asarray(positions, dtype=float)
        dist_matrix = np.abs(pos[:, None] - pos[None, :])
    viol = np.abs(f[:, None] - f[None, :]) - np.asarray(dist_matrix, float)
    np.fill_diagonal(viol, -np.inf)
    idx = np.unravel_index(np.argmax(viol), viol.shape)
    return float(viol[idx]), idx
