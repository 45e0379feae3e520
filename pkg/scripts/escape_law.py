#!/usr/bin/env python3
"""End-to-end escape-time experiment on the canonical unstable shear state:
steady state, dense spectrum, four-decade epsilon sweep, regression of the
escape time against ln(1/eps).  Equivalent to

    sqglab instability --config configs/unstable_shear_n64.ini

but kept as a script for interactive tinkering with the experiment knobs.

Usage: python scripts/escape_law.py [outdir]
"""

import sys
from pathlib import Path

from sqglab.cli import cmd_instability
from sqglab.config import load_config


def main(outdir="out/escape_law"):
    cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / "unstable_shear_n64.ini")
    code = cmd_instability(cfg, Path(outdir), jobs=1)
    print(f"exit code {code}; artifacts in {outdir}/")
    return code


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
