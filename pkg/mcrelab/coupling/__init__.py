from mcrelab.coupling.strategy import *
from mcrelab.coupling.run import *
