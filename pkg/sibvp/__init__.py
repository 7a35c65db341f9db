__version__ = '0.1.0'

from .dual import Dual2

from .stepfn import StepArgs
from .stepfn import StepResult
from .stepfn import u_step
from .stepfn import v_step

from .problem import Problem
from .problem import make_problem
from .problem import problems
from .problem import register

from .ivp import IvpTrace
from .ivp import StopRule
from .ivp import si_march
from .ivp import si_march_dual

from .shooting import MsMesh
from .shooting import ShootingConfig
from .shooting import ms_solve
from .shooting import simple_shoot

from .bounds import BoundConstants
from .bounds import compute_constants

from .formats import encoders
from .formats import decoders

from .errors import SolverError
