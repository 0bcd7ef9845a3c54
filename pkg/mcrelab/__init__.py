# Provide the laboratory artifacts directly for simplicity of import statements
import logging

from mcrelab.interface import *
from mcrelab.parallel import *
from mcrelab.env import *
from mcrelab.mcre import *
from mcrelab.coupling import *
from mcrelab.models import *
from mcrelab.diagnostics import *


def enable_debug_log():
    logging.getLogger("mcrelab").setLevel(logging.DEBUG)
