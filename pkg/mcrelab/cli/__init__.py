from mcrelab.cli.config import *
from mcrelab.cli.report import *
from mcrelab.cli.commands import *
