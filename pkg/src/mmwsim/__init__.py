"""Site-specific millimeter-wave channel simulator.

2.5D map ray tracing (shooting-bouncing rays with intersection reuse),
uniform-theory wedge diffraction, radiative-energy-transfer tree
scattering, stochastic intra-cluster sub-ray expansion, and MIMO-OFDM
channel synthesis.
"""

from .channel import (ArrayConfig, ChannelTensor, Jadpp, OfdmGrid,
                      array_response, channel_power, jadpp,
                      mean_subcarrier_power, read_tensor, synthesize,
                      write_tensor)
from .cluster import ClusterConfig, SubRay, expand_cluster, seed_for
from .em import (DiffractionGeometry, DomainError, WaveContext,
                 diffraction_coefficient, diffraction_gain,
                 diffraction_gain_for_path, fresnel_coefficients, los_gain,
                 reflection_gain, ret_reradiation, roughness_factor,
                 scattering_gain, utd_transition_F)
from .geometry import (DigitalMap, MapError, MapValidationError, Material,
                       RetParams, Surface, Tree, Wedge,
                       find_intersection_point, find_intersection_surface,
                       load_map, los_visible, map_from_dict)
from .oracle import (ImageSolution, OracleSizeError, enumerate_image_paths,
                     transition_integral_quadrature)
from .scenario import (ScenarioConfig, ScenarioError, Trajectory, build_world,
                       load_scenario, run, trajectory_from_waypoints)
from .tracer import (CaptureIndex, PathKind, PropagationPath, RayRecord,
                     TracerConfig, associate_paths,
                     collect_diffraction_candidates,
                     collect_scattering_candidates, fsbr_trace, image_solve,
                     lift_to_3d)

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig", "CaptureIndex", "ChannelTensor", "ClusterConfig",
    "DiffractionGeometry", "DigitalMap", "DomainError", "ImageSolution",
    "Jadpp", "MapError", "MapValidationError", "Material", "OfdmGrid",
    "OracleSizeError", "PathKind", "PropagationPath", "RayRecord",
    "RetParams", "ScenarioConfig", "ScenarioError", "SubRay", "Surface",
    "TracerConfig", "Trajectory", "Tree", "WaveContext", "Wedge",
    "array_response", "associate_paths", "build_world", "channel_power",
    "collect_diffraction_candidates", "collect_scattering_candidates",
    "diffraction_coefficient", "diffraction_gain",
    "diffraction_gain_for_path", "enumerate_image_paths", "expand_cluster",
    "find_intersection_point", "find_intersection_surface",
    "fresnel_coefficients", "fsbr_trace", "image_solve", "jadpp",
    "lift_to_3d", "load_map", "load_scenario", "los_gain", "los_visible",
    "map_from_dict", "mean_subcarrier_power", "read_tensor",
    "reflection_gain", "ret_reradiation", "roughness_factor", "run",
    "scattering_gain", "seed_for", "synthesize",
    "trajectory_from_waypoints", "transition_integral_quadrature",
    "utd_transition_F", "write_tensor",
]
