from .checks import *
from .excursions import *
from .main import *
from .reference import *
from .settings import *
from .stats import *
