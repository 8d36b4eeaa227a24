import os
import sys

HERE = os.path.dirname(__file__)
sys.path.insert(0, os.path.join(HERE, "..", "src"))

# the fixtures drive the solver CLI as a subprocess; make it importable too
SOLVER_SRC = os.path.abspath(os.path.join(HERE, "..", "..", "src"))
