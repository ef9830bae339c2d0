import sys

from energy_sched.cli import main

if __name__ == "__main__":
    sys.exit(main())
