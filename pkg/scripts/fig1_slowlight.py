"""Slow light through a burned spectral hole: input and delayed pulse, hole spectrum.

Usage: python scripts/fig1_slowlight.py [--out DIR] [--plots] [KEY=VALUE ...]
"""

import argparse
import sys

from slowlight.cli import parse_config, run_scenario

CONFIG = """\
scenario = slowlight
hole.fwhm_kHz = 300
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fig1_slowlight")
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    settings = parse_config(CONFIG + "\n".join(o.replace("=", " = ", 1) for o in args.overrides),
                            "fig1_slowlight.py")
    for path in run_scenario(settings, args.out, plots=args.plots):
        if path.name == "summary.txt":
            sys.stdout.write(path.read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
