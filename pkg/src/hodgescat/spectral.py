"""Cross-section eigendata and truncated spectra of warped Hodge-Laplacians.

The absolutely-continuous predictions conclude from the warp exponent b and
the cross-section spectrum: for b = 0 the thresholds are cross-section
eigenvalues of degrees j and j-1; over a ball core with the standard sphere
the prediction sharpens to the half line starting at the smaller of the two
lowest eigenvalues; for 0 < b <= 1 over a ball core the half line starts at
zero. Truncated spectra probe these endpoints numerically: eigenvalue
clusters that keep growing with the truncation radius mark the essential
bottom, isolated eigenvalues below it stay fixed in number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .complexes import GradedComplex, ProductComplex
from .geometry import CircleSection, SphereSection


class SpectralError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# cross-section spectra
# ---------------------------------------------------------------------------

@dataclass
class CrossSectionSpectrum:
    """Eigenvalues of the cross-section Hodge-Laplacian per form degree."""

    entries: List[Tuple[int, float, int]]   # (degree, eigenvalue, multiplicity)
    source: str                             # analytic | oracle | explicit
    section: Optional[object] = None

    def __post_init__(self):
        cleaned = []
        for deg, lam, mult in self.entries:
            if lam < -1e-8:
                raise SpectralError("cross-section eigenvalues must be >= 0")
            cleaned.append((int(deg), max(0.0, float(lam)), int(mult)))
        cleaned.sort(key=lambda t: (t[0], t[1]))
        self.entries = cleaned

    def degrees(self) -> List[int]:
        return sorted({d for d, _, _ in self.entries})

    def eigenvalues(self, degree: int) -> np.ndarray:
        return np.array([lam for d, lam, _ in self.entries if d == degree])

    def lowest(self, degree: int, include_zero: bool = True) -> Optional[float]:
        vals = self.eigenvalues(degree)
        if not include_zero:
            vals = vals[vals > 1e-12]
        return float(vals.min()) if vals.size else None

    @property
    def is_sphere(self) -> bool:
        if isinstance(self.section, SphereSection):
            return True
        return (isinstance(self.section, CircleSection)
                and abs(self.section.radius - 1.0) < 1e-12)


def _circle_spectrum(radius: float, count: int) -> CrossSectionSpectrum:
    entries = []
    for j in (0, 1):
        entries.append((j, 0.0, 1))
        for k in range(1, count):
            entries.append((j, (k / radius) ** 2, 2))
    return CrossSectionSpectrum(entries, "analytic", CircleSection(radius))


def sphere_function_eigenvalues(n: int, count: int = 8,
                                grid: int = 800) -> np.ndarray:
    """Degree-0 sphere eigenvalues by the axisymmetric polar oracle.

    Discretizes -(sin^{n-1} t)^{-1} (sin^{n-1} t u')' on (0, pi) with lumped
    masses and Richardson-extrapolates one grid halving; the distinct values
    converge to l (l + n - 1).
    """

    def solve(nn: int) -> np.ndarray:
        # unknowns at cell centers (i + 1/2) dt, fluxes at interior nodes;
        # the weight sin^{n-1} vanishing at the poles supplies the natural
        # boundary condition without singular mass entries
        dt = math.pi / nn
        tc = dt * (np.arange(nn) + 0.5)
        tn = dt * np.arange(1, nn)
        p_n = np.sin(tn) ** (n - 1)
        G = sparse.diags([np.full(nn - 1, -1.0 / dt),
                          np.full(nn - 1, 1.0 / dt)],
                         [0, 1], shape=(nn - 1, nn))
        K = (G.T @ sparse.diags(p_n * dt) @ G).toarray()
        q_c = np.sin(tc) ** (n - 1) * dt
        lam = sla.eigh(K, np.diag(q_c), eigvals_only=True)
        return np.sort(lam)[:count]

    coarse = solve(grid)
    fine = solve(2 * grid)
    # second-order scheme: one Richardson step
    return (4.0 * fine - coarse) / 3.0


def _sphere_spectrum(n: int, count: int) -> CrossSectionSpectrum:
    lam0 = sphere_function_eigenvalues(n, count)
    entries = [(0, v, 1) for v in lam0] + [(n, v, 1) for v in lam0]
    if n == 2:
        # exact 1-forms pair with nonzero functions, coexact with nonzero
        # 2-forms; both lists equal the nonzero degree-0 values by duality
        nonzero = [v for v in lam0 if v > 1e-8]
        entries += [(1, v, 1) for v in nonzero for _ in range(2)]
    return CrossSectionSpectrum(entries, "oracle", SphereSection(n))


def cross_section_spectrum(section, count: int = 12) -> CrossSectionSpectrum:
    """Cross-section eigendata for circle / sphere / explicit inputs.

    Circles are analytic Fourier data; spheres go through the polar
    Sturm-Liouville oracle (degrees 0 and n; degree 1 additionally for S^2);
    explicit lists pass through after invariant validation.
    """
    if isinstance(section, CircleSection):
        return _circle_spectrum(section.radius, count)
    if isinstance(section, SphereSection):
        return _sphere_spectrum(section.n, count)
    if isinstance(section, (list, tuple)):
        if not section:
            raise SpectralError("explicit spectrum list is empty")
        return CrossSectionSpectrum(list(section), "explicit")
    raise SpectralError(f"unsupported cross-section {section!r}")


# ---------------------------------------------------------------------------
# truncated spectra
# ---------------------------------------------------------------------------

def dense_eigenpairs(cx: GradedComplex, j: int):
    """Full eigendecomposition of the (Laplacian_j, M_j) pencil.

    Whitening by the diagonal mass keeps this a standard Hermitian solve.
    Returns (eigenvalues, vectors) with vectors M-orthonormal.
    """
    K = cx.stiffness(j).toarray()
    w = cx.mass(j)
    s = 1.0 / np.sqrt(w)
    Kw = (K * s[None, :]) * s[:, None]
    Kw = 0.5 * (Kw + Kw.conj().T)
    vals, vecs = sla.eigh(Kw)
    return vals, vecs * s[:, None]


def _eigs_small(cx: GradedComplex, j: int, count: int, seed: int) -> np.ndarray:
    vals, _ = dense_eigenpairs(cx, j)
    return np.sort(vals)[:count]


def _eigs_arpack(K, w, count: int, seed: int, sigma: float = -1e-2):
    dim = K.shape[0]
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    if np.dtype(K.dtype).kind == "c":
        v0 = v0 + 1j * rng.standard_normal(dim)
    try:
        vals = spla.eigsh(K, k=count, M=sparse.diags(w), sigma=sigma,
                          which="LM", v0=v0, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        if dim <= 2000:
            # reproducible dense rescue; non-convergence stays visible in
            # larger problems, reported with whatever residual data exists
            s = 1.0 / np.sqrt(w)
            Kw = (K.toarray() * s[None, :]) * s[:, None]
            return np.sort(sla.eigh(0.5 * (Kw + Kw.conj().T),
                                    eigvals_only=True))[:count]
        got = np.sort(exc.eigenvalues) if exc.eigenvalues is not None else []
        raise SpectralError(
            f"eigensolver did not converge: {len(got)}/{count} values, "
            f"residual data {exc!r}") from None
    return np.sort(np.real(vals))


def truncated_spectrum(cx: GradedComplex, j: int, count: int,
                       seed: int = 0, method: str = "auto") -> np.ndarray:
    """The `count` smallest eigenvalues of the pencil (Laplacian_j, M_j).

    method "auto" picks the exact Fourier-sector reduction for product grids
    with radial weights (the discrete spectrum is the multiset union over
    sectors), ARPACK shift-invert otherwise, and a dense solve for small
    dimensions. Deterministic for a fixed seed.
    """
    if count > cx.dims[j]:
        raise SpectralError(
            f"count {count} exceeds matrix dimension {cx.dims[j]}")
    if method == "auto":
        if cx.dims[j] <= 400:
            method = "dense"
        elif isinstance(cx, ProductComplex) and cx.meta["psi_radial"]:
            method = "sectors"
        else:
            method = "arpack"
    if method == "dense":
        return _eigs_small(cx, j, count, seed)
    if method == "sectors":
        if not isinstance(cx, ProductComplex):
            raise SpectralError("sector method needs a product complex")
        vals: List[float] = []
        n_theta = cx.meta["n_theta"]
        for k in range(n_theta):
            sec = cx.mode_sector(k)
            kk = min(count, sec.dims[j])
            if sec.dims[j] <= 600 or kk > sec.dims[j] - 2:
                sec_vals = _eigs_small(sec, j, kk, seed)
            else:
                sec_vals = _eigs_arpack(sec.stiffness(j), sec.mass(j), kk, seed)
            vals.extend(sec_vals.tolist())
        return np.sort(np.array(vals))[:count]
    if method == "arpack":
        return _eigs_arpack(cx.stiffness(j), cx.mass(j), count, seed)
    raise SpectralError(f"unknown method {method!r}")


@dataclass
class SpectralReport:
    """Truncated eigendata for one radius and degree."""

    R: float
    degree: int
    eigenvalues: np.ndarray
    provenance: str = "eigensolve"

    def counting(self, lam: float) -> int:
        return int(np.count_nonzero(self.eigenvalues <= lam))


# ---------------------------------------------------------------------------
# essential-bottom extrapolation
# ---------------------------------------------------------------------------

@dataclass
class BottomEstimate:
    bottom: Optional[float]
    band: Tuple[float, float]
    counts_below: List[int]          # counts below bottom - 0.1 per radius
    count_trend: List[List[int]]     # counting data per candidate threshold
    detail: str = ""


def essential_bottom_estimate(reports: Sequence[SpectralReport],
                              margin: float = 0.1) -> BottomEstimate:
    """Locate the accumulation threshold of truncated spectra.

    Candidate thresholds scan the eigenvalues of the largest truncation;
    the essential bottom is the smallest candidate whose counting function
    strictly grows at every radius increase, so isolated eigenvalues below it
    stay bounded in number while clusters above densify.
    """
    if len(reports) < 3:
        raise SpectralError("need at least 3 truncation radii")
    radii = [rep.R for rep in reports]
    if any(r2 <= r1 for r1, r2 in zip(radii, radii[1:])):
        raise SpectralError("truncation radii must be strictly increasing")
    eig_sets = [np.sort(rep.eigenvalues) for rep in reports]
    t_cap = min(es[-1] for es in eig_sets)
    cands = np.unique(eig_sets[-1][eig_sets[-1] <= t_cap])
    bottom = None
    prev_t = 0.0
    trend: List[List[int]] = []
    for t in cands:
        counts = [int(np.count_nonzero(es <= t + 1e-12)) for es in eig_sets]
        trend.append(counts)
        growing = all(c2 > c1 for c1, c2 in zip(counts, counts[1:]))
        if growing:
            bottom = float(t)
            break
        prev_t = float(t)
    if bottom is None:
        return BottomEstimate(None, (prev_t, math.inf), [], trend,
                              "no accumulation detected below the cap")
    counts_below = [int(np.count_nonzero(es <= bottom - margin))
                    for es in eig_sets]
    return BottomEstimate(bottom, (prev_t, bottom), counts_below, trend,
                          f"first growing threshold among {cands.size} candidates")


# ---------------------------------------------------------------------------
# absolutely continuous predictions
# ---------------------------------------------------------------------------

@dataclass
class AcPrediction:
    """Predicted absolutely-continuous structure for one form degree."""

    kind: str                      # containment | equality | full | unavailable
    thresholds: List[float]
    bottom: Optional[float]
    reading_include_zero: Optional[float]
    reading_exclude_zero: Optional[float]
    detail: str = ""


def ac_prediction(b: float, spec: CrossSectionSpectrum, j: int,
                  ball_core: bool = False) -> AcPrediction:
    """Threshold prediction for the Hodge-Laplacian on j-forms.

    b = 0: thresholds are cross-section eigenvalues of degrees j and j-1
    (a containment statement in general; equality from the smallest one when
    the core is a ball and the cross-section the standard sphere). For
    0 < b <= 1 with a ball core the spectrum fills [0, oo). Degree -1
    contributes nothing. Both readings of "lowest eigenvalue" (with and
    without zero modes) are reported; the include-zero reading is the one
    used downstream.
    """
    if not (0.0 <= b <= 1.0):
        raise SpectralError(f"warp exponent b={b} outside [0, 1]")
    degs = spec.degrees()
    need = [d for d in (j, j - 1) if 0 <= d]
    have = [d for d in need if d in degs]
    if not have and need:
        raise SpectralError(
            f"cross-section spectrum lacks degrees {need} needed for j={j}")
    vals = np.concatenate([spec.eigenvalues(d) for d in have]) if have \
        else np.array([])
    lows_inc = [spec.lowest(d, True) for d in have]
    lows_exc = [spec.lowest(d, False) for d in have]
    inc = min([v for v in lows_inc if v is not None], default=None)
    exc = min([v for v in lows_exc if v is not None], default=None)

    if b == 0.0:
        if ball_core and spec.is_sphere:
            if inc is None:
                raise SpectralError("missing degree data for the ball-core case")
            return AcPrediction("equality", [inc], inc, inc, exc,
                                "half line from the smaller lowest eigenvalue")
        thr = sorted(set(round(float(v), 12) for v in vals))
        bottom = thr[0] if thr else None
        return AcPrediction("containment", thr, bottom, inc, exc,
                            "union of half lines over degrees j and j-1")
    if ball_core:
        return AcPrediction("full", [0.0], 0.0, inc, exc,
                            "essential = absolutely continuous = [0, oo)")
    return AcPrediction("unavailable", [], None, inc, exc,
                        "no statement for 0 < b <= 1 without a ball core")
