"""``python -m dygpp``."""
import sys

from .cli import main

sys.exit(main())
