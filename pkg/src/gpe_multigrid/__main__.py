import sys

from gpe_multigrid.cli import gpe_multigrid

if __name__ == "__main__":
    sys.exit(gpe_multigrid())
