"""Writes data/standard_life_table.csv from a Siler hazard
mu(x) = a1 exp(-b1 x) + a2 + a3 exp(b3 x), integrated at 5-year ages 0..100."""
import math
import sys

PARAMS = {
    "female": (0.030, 1.6, 0.0004, 0.000025, 0.098),
    "male": (0.035, 1.6, 0.0009, 0.000050, 0.094),
}


def cumulative_hazard(x, a1, b1, a2, a3, b3):
    return a1 / b1 * (1 - math.exp(-b1 * x)) + a2 * x + a3 / b3 * (math.exp(b3 * x) - 1)


def main(path):
    with open(path, "w") as out:
        out.write("sex,age_group_start,lx\n")
        for sex, p in PARAMS.items():
            for age in range(0, 101, 5):
                out.write(f"{sex},{age},{math.exp(-cumulative_hazard(age, *p)):.10f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/standard_life_table.csv")
