"""Wave-function tailoring by conditional teleportation with photon-subtracted resources."""
from .grid import (GridError, NullStateError, QuadratureGrid, WaveFunction, displace, fidelity,
                   fourier_rotate, inner_product, make_grid)
from .metrics import (FitResult, WignerMap, extrema_report, fit_displacement, fit_four_cat,
                      fit_squeezed_cat, wigner)
from .nges import OperatorPoly, SubtractionSpec, apply_f, apply_g, apply_h
from .states import (CatSpec, CpsSpec, cat_state, coherent_wave, cps_target, fock_state,
                     fock_superposition, four_cat_state, squeezed_fock, squeezed_vacuum, vacuum)
from .teleport import (BellOutcome, IterationPlan, PlanError, TeleportConfig, density_map,
                       run_plan, success_sweep, teleport_step, two_step_correlated_sweep)

__version__ = "0.1.0"
