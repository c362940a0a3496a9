"""Switching of the slow light by a control pulse at detunings 0, 0.5, 1 and 2 MHz.

Usage: python scripts/fig2_detuning.py [--out DIR] [--plots] [KEY=VALUE ...]
"""

import argparse
import sys

from slowlight.cli import parse_config, run_scenario

CONFIG = """\
scenario = detuning-sweep
sweep.detunings_MHz = 0, 0.5, 1, 2
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fig2_detuning")
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    settings = parse_config(CONFIG + "\n".join(o.replace("=", " = ", 1) for o in args.overrides),
                            "fig2_detuning.py")
    for path in run_scenario(settings, args.out, plots=args.plots):
        if path.name == "summary.txt":
            sys.stdout.write(path.read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
