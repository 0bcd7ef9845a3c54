from mcrelab.diagnostics.law import *
from mcrelab.diagnostics.oracle import *
from mcrelab.diagnostics.rates import *
from mcrelab.diagnostics.lln import *
