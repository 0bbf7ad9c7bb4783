"""Rerun the Asian-call reference rows (crude, -Id, annealed A*) and print the CSV.

    python3 scripts/reproduce_table1.py [--seed S] [--iters N] [--threads T]
"""

import sys

from antimc.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce-table1", *sys.argv[1:]]))
