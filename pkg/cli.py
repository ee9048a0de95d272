"""
Process entry point: ``python cli.py <command> --config scenario.json --out results/``.
"""

import sys

from qthermo.main import main

if __name__ == "__main__":
    sys.exit(main())
