"""Video-aware routing and spectrum assignment for elastic optical networks."""

from .qot import FiberParams
from .rsa import ConnectionRequest, CostWeights, RsaEngine, exhaustive_oracle, serve_request
from .simulator import ScenarioConfig, run_load, run_scenario
from .spectrum import SpectrumBlock, SpectrumGrid, validate_assignment
from .topology import k_shortest_paths, load_topology
from .video import GopModel, QualityEstimator, fit_estimator

__version__ = "0.1.0"
