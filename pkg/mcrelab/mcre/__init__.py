from mcrelab.mcre.kernel import *
from mcrelab.mcre.spec import *
from mcrelab.mcre.estimate import *
from mcrelab.mcre.verify import *
from mcrelab.mcre.chain import *
