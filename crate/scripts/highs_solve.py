#!/usr/bin/env python3
"""Solve an LP-format model with HiGHS and write a `name value` solution file.

Usage: highs_solve.py MODEL.lp SOLUTION.sol

Requires the `highspy` package. Exits non-zero when HiGHS does not report an
optimal solution, leaving no solution file behind.
"""
import sys

import highspy


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    model_path, sol_path = sys.argv[1], sys.argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    if h.readModel(model_path) != highspy.HighsStatus.kOk:
        print(f"could not read {model_path}", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        print(f"solver status: {h.modelStatusToString(status)}", file=sys.stderr)
        return 1
    lp = h.getLp()
    values = h.getSolution().col_value
    with open(sol_path, "w") as out:
        out.write(f"# objective {h.getInfo().objective_function_value!r}\n")
        for name, value in zip(lp.col_names_, values):
            out.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
