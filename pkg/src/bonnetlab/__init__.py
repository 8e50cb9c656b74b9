"""Killing-field Lie algebroids of hypersurfaces and numerical Bonnet
reconstruction."""

from .algebroid import (AlgebroidFibre, ResidualReport, ResidualStat, Section,
                        action_algebroid_bracket, anchor, fibre,
                        identity_residuals, random_section, section_bracket)
from .errors import BonnetLabError
from .forms import OmegaForms, form_comparison_residual, gauss_from_omega, iota, omega_forms
from .hypersurface import (Chart, HypersurfacePatch, classical_first_form,
                           classical_second_form, gauss_map, jacobian, preset)
from .killing import (KillingField, RigidMotion, Subspace, adjoint_pushforward,
                      canonical_basis, common_zero, isotropy_basis, killing_bracket,
                      killing_eval, transverse_to_radical)
from .logderiv import (BonnetConditionReport, ad_equivariance_residual,
                       check_bonnet_conditions, morphism_residual, omega)
from .reconstruct import (FrameState, Polyline, ReconstructionResult,
                          TensorFieldPair, align_rigid, christoffel,
                          default_initial_frame, frame_form, frame_from_patch,
                          gauss_codazzi_residual, holonomy_loop, integrate_path,
                          reconstruct_grid)

__version__ = "0.1.0"
