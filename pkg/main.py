"""
Wrapper to run the opfrelax package CLI.

Usage:
  python main.py solve --case builtin:case3_base --relax soc,qc,cp
  python main.py check --samples 1000 --seed 42
"""

from opfrelax import main


if __name__ == "__main__":
    raise SystemExit(main())
