from mcrelab.models.interarrival import *
from mcrelab.models.queue import *
from mcrelab.models.sgld import *
from mcrelab.models.linear import *
