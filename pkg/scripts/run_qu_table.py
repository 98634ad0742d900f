#!/usr/bin/env python3
"""Run the qu table experiment; forwards all flags to the CLI subcommand."""
import sys

from sparsepoly.cli import main

if __name__ == "__main__":
    sys.exit(main(["qu-table", *sys.argv[1:]]))
