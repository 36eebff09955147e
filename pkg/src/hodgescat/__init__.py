"""Desk-scale spectral-geometry numerics for conformal scattering of
Hodge-Laplacians on warped product ends."""

from .expressions import Expression, parse_expression
from .geometry import (CircleSection, ConformalFactor, CurvatureTensor4,
                       ModeSection, RadiusBound, SphereSection, WarpedModel,
                       conformal_curvature, conformal_rescale,
                       connection_deviation, kulkarni_nomizu,
                       lipschitz_defect, radius_lower_bound,
                       warped_geometry_check)
from .fiber import FiberElement, fiber_apply
from .complexes import (GradedComplex, IdentificationMaps,
                        build_graded_complex, conformal_codifferential,
                        dirac_commutator_residual, identification_maps)
from .spectral import (CrossSectionSpectrum, SpectralReport, ac_prediction,
                       cross_section_spectrum, essential_bottom_estimate,
                       truncated_spectrum)
from .scattering import (ControlFunction, DeviationReport, deviation_field,
                         ms_conditions, phi_profile, scattering_integral,
                         warped_beta_check)
from .waveops import (AcProjector, ResolventConfig, SchattenRecord,
                      VAssembly, WaveOpDiagnostics, decomposition_residual,
                      resolvent_power, schatten_diagnostics, wave_operator)

__version__ = "0.1.0"
