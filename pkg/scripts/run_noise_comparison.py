#!/usr/bin/env python3
"""Run the noise comparison experiment; forwards all flags to the CLI subcommand."""
import sys

from sparsepoly.cli import main

if __name__ == "__main__":
    sys.exit(main(["noise-comparison", *sys.argv[1:]]))
