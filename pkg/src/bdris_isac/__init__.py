"""Joint active/passive beamforming for BD-RIS assisted ISAC transmitters.

The scattering matrix of a transmitter-side beyond-diagonal RIS and the
active beamformer feeding it are optimized by alternating projected
successive convex approximation (AO-PSCA) for a normalized trade-off between
the users' sum rate and the CRB of the targets' angle/coefficient estimates.
"""

from .ao import (
    NormalizationConstants,
    NumericalAbort,
    RunResult,
    SolverSettings,
    compute_normalizers,
    initialize,
    run,
)
from .geometry import ScenarioConfig, Scenario, make_scenario
from .manifold import TopologySpec, project_power, project_scattering, symuni
from .metrics import Beamformer, JointProblem, SingularFimError

__version__ = "0.1.0"

__all__ = [
    "Beamformer",
    "JointProblem",
    "NormalizationConstants",
    "NumericalAbort",
    "RunResult",
    "Scenario",
    "ScenarioConfig",
    "SingularFimError",
    "SolverSettings",
    "TopologySpec",
    "compute_normalizers",
    "initialize",
    "make_scenario",
    "project_power",
    "project_scattering",
    "run",
    "symuni",
]
