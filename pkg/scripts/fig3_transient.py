"""Damped Rabi flopping of rho55-rho33 and the probe transmission during the control pulse.

Usage: python scripts/fig3_transient.py [--out DIR] [--plots] [KEY=VALUE ...]
"""

import argparse
import sys

from slowlight.cli import parse_config, run_scenario

CONFIG = """\
scenario = transient
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fig3_transient")
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    settings = parse_config(CONFIG + "\n".join(o.replace("=", " = ", 1) for o in args.overrides),
                            "fig3_transient.py")
    for path in run_scenario(settings, args.out, plots=args.plots):
        if path.name == "summary.txt":
            sys.stdout.write(path.read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
