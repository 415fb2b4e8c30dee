#!/usr/bin/env python3
"""Emit the full single- vs multi-field comparison bundle.

Usage: python scripts/reproduce_fig9.py [--out DIR]
"""
import sys

from mfbia.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "fig9", *sys.argv[1:]]))
