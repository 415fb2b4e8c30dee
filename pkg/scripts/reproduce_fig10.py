#!/usr/bin/env python3
"""Run the (observation count x SNR) study of the second field.

Usage: python scripts/reproduce_fig10.py [--out DIR] [--full] [--workers N]
"""
import sys

from mfbia.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "fig10", *sys.argv[1:]]))
