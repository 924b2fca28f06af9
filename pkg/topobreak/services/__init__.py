from .geometry import GeometryService, EnclosingBallSolver
from .persistence import PersistenceService
from .stability import StabilityService
from .procgen import ProcgenService
from .limit_law import LimitLawService, LimitLawCache
from .changepoint import ChangepointService
from .pipeline import PipelineService
from .config_loader import ConfigLoader
from .report_generator import RunReporter
