from mcrelab.parallel.streams import *
from mcrelab.parallel.pool import *
