#!/usr/bin/env python3
"""Three-axis sweep (SNR1 x SNR2 x coupling) on the toy fully coupled model.

Usage: python scripts/toyfull_coupling_sweep.py [--out DIR] [--workers N]
"""
import sys
from pathlib import Path

from mfbia.cli import main

if __name__ == "__main__":
    config = Path(__file__).resolve().parent.parent / "configs" / "toyfull_coupling.yaml"
    sys.exit(main(["sweep", "--config", str(config), *sys.argv[1:]]))
