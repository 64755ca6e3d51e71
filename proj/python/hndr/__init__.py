from ._hndr import *
