import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

settings.register_profile("det", derandomize=True, max_examples=50)
settings.load_profile("det")
