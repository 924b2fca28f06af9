from .schemas import *
from .enums import *
