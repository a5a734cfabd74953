"""fplab command-line runner."""

import logging

from src.runner.cli import main

logging.basicConfig(level=logging.INFO)

if __name__ == "__main__":
    raise SystemExit(main())
