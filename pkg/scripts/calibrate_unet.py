"""Fit the simulator to the UNet min/max case study and write the scenario file."""

import argparse
from pathlib import Path

from magus.calibration import fit_case_study, scenario_toml

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src/magus/scenarios/unet-calibration.toml"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    fit = fit_case_study()
    args.out.write_text(scenario_toml(fit))
    print(f"wrote {args.out}")
    for k, v in vars(fit).items():
        print(f"  {k} = {v}")


if __name__ == "__main__":
    main()
