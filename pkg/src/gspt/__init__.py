"""Geometric analysis of planar slow-fast systems z' = N(z) f(z) + eps G(z).

The package covers the full pipeline for two-stroke relaxation oscillations
in systems with no global slow/fast variable split: critical-curve and
contact-point classification, singular-cycle construction, perturbed-cycle
continuation with Floquet data, epsilon-scaling reports, friction regime
maps, and the Riccati transition problem governing passage past a regular
jump-off point.
"""

from .errors import (ComputationError, ConfigError, DomainError, EscapeError,
                     GsptError, IntegrationTimeoutError, PreconditionError,
                     StalledAtSingularityError, StiffnessError)
from .models import (MODEL_NAMES, EpsPlaneField, ModelSpec, PlaneField,
                     ScalarField, builtin_model, em_turning_point, eval_rhs,
                     make_rhs, physical_time)
from .rk import Event, Trajectory, integrate_field
from .singular import (Branch, ContactPoint, CriticalCurve, NSingularity,
                       classify_contact, contact_order, desingularised_rhs,
                       expansion_coeffs, find_contact_points,
                       find_N_singularities, nontrivial_eigenvalue,
                       projection, rectify, reduced_rhs, trace_critical_curve)
from .cycles import (ReducedSegment, SingularCycle, build_singular_cycle,
                     layer_flow, reciprocal_point, reduced_segment,
                     winding_number)
from .simulate import (LimitCycle, PoincareSection, find_limit_cycle,
                       floquet_exponent, hausdorff_distance, integrate,
                       poincare_return, resample_closed, stroke_count)
from .scaling import (RegimeMap, ScalingReport, SectionOffsets,
                      epsilon_scaling_report, run_jobs, section_offsets,
                      slow_segment_distance, stickslip_regime_sweep,
                      stroke_phase_diagram)
from .riccati import (RiccatiProblem, k2_exit_prediction, left_tail_decay,
                      omega0_constant, riccati_special_solution,
                      right_tail_constant)

__version__ = "0.1.0"
