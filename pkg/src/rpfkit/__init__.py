"""Random Ruelle-Perron-Frobenius numerics for random open interval maps."""

from .interval_fn import PiecewiseFn
from .random_map import AssumptionError, OpenMap, make_branch, partition_stats, survivor_partition
from .driver import IIDDriver, MarkovDriver, RotationDriver, fiber_word, symbol_at
from .transfer import ConstantPotential, GeometricPotential, PiecewiseAffineLogPotential
from .ensemble import RandomEnsemble, builtin, parse_config

__version__ = "0.1.0"
