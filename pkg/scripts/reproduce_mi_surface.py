#!/usr/bin/env python3
"""Emit the single-measurement information surface CSV.

Default configuration: Gaussian prior of std 3/sqrt(2), readout phase 0,
exposure times up to 5, coherence times {2, 5, 10, inf}.  Pass an output
directory (default ./out-mi-surface) and optionally a config file.
"""

import sys

from ramsey_sched.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out-mi-surface"
    argv = ["mi-surface", "--out", out]
    if len(sys.argv) > 2:
        argv += ["--config", sys.argv[2]]
    raise SystemExit(main(argv))
