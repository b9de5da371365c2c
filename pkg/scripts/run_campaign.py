"""Run a set of verify checks from a YAML config and print a verdict table.

    python scripts/run_campaign.py scripts/configs/egg2_campaign.yaml --out out/egg2
    python scripts/run_campaign.py scripts/configs/ball_quick.yaml --checks dg,up,hyperbolicity
"""

import argparse
import json
import sys
import time
from pathlib import Path

from catlin_gh import cli

DEFAULT_CHECKS = "dg,up,gh,height,fin,proposition,hyperbolicity,localization,exponent"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--checks", default=DEFAULT_CHECKS)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)

    out = Path(args.out or Path("out") / Path(args.config).stem)
    flags = ["verify", "--config", args.config, "--check", args.checks, "--out", str(out)]
    if args.seed is not None:
        flags += ["--seed", str(args.seed)]
    t0 = time.perf_counter()
    code = cli.main(flags)
    elapsed = time.perf_counter() - t0

    manifest = out / "manifest.json"
    if manifest.exists():
        verdicts = json.loads(manifest.read_text()).get("verdicts", {})
        for check, v in verdicts.items():
            rep = json.loads((out / f"{check}_report.json").read_text())
            value = rep.get("fitted_value", rep.get("slope"))
            print(f"{check:14s} {'PASS' if v['passed'] else 'FAIL'}  value={value!r}  {'; '.join(v['reasons'])}")
    print(f"exit {code} after {elapsed:.0f} s; artifacts in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
