"""Oscillation frequency against control intensity with a square-root fit.

Usage: python scripts/fig4_sqrt_law.py [--out DIR] [--plots] [KEY=VALUE ...]
"""

import argparse
import sys

from slowlight.cli import parse_config, run_scenario

CONFIG = """\
scenario = intensity-sweep
sweep.intensities_Wcm2 = 2, 4, 6, 8, 10, 12, 14, 16, 18, 20
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fig4_sqrt_law")
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    settings = parse_config(CONFIG + "\n".join(o.replace("=", " = ", 1) for o in args.overrides),
                            "fig4_sqrt_law.py")
    for path in run_scenario(settings, args.out, plots=args.plots):
        if path.name == "summary.txt":
            sys.stdout.write(path.read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
