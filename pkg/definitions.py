import os

ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
DIAGRAMS_DIR = os.path.join(ROOT_DIR, "tests", "diagrams")
