from mcrelab.env.process import *
