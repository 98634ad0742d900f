#!/usr/bin/env python3
"""Run the error vs m experiment; forwards all flags to the CLI subcommand."""
import sys

from sparsepoly.cli import main

if __name__ == "__main__":
    sys.exit(main(["error-vs-m", *sys.argv[1:]]))
