from . import conditioning
from . import harmonic
from . import models
from . import path
from . import report
from . import util
from . import verify
from . import config
from . import cli
