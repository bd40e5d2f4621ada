"""Allow ``python -m posereid`` alongside the ``posereid`` console script."""

import sys

from posereid.trainer.cli import main

if __name__ == "__main__":
    sys.exit(main())
