"""Simulation, control design and identification for fiber-reinforced
elastomeric enclosures (FREEs)."""

from .control import (ChainedTrajectory, ConstantReference, CubicTrajectory,
                      PidGains, StepSchedule, chained_trajectory,
                      cubic_coefficients, pid_pressure)
from .dynamics import (BodyParams, FreeModel, Loads, State, TimeSeries,
                       integrate, simulate_closed_loop,
                       simulate_constant_pressure, static_equilibrium,
                       static_residuals)
from .geometry import (DeformedConfig, ElastomerParams, Geometry,
                       critical_winding_angle, deformed_config,
                       deformed_fiber_angle, deformed_radius, fiber_tension,
                       pressure_axial_force, pressure_torque)
from .linear import (LinearizedPlant, RationalTF, RootLocus, classify_stability,
                     linearized_constants, open_loop_tf, poly_roots, root_locus,
                     simulate_linear_closed_loop)
from .units import PA_PER_PSI, pa_to_psi, psi_to_pa

__version__ = "0.1.0"
