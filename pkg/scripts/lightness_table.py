"""Measured lightness of a few coordinate maps across resolutions."""

import argparse
from fractions import Fraction

from qctree.arc import QuasiArc
from qctree.dyadic import generate
from qctree.glue import arc_matrix, basepoint_coordinate, circle_matrix, circle_wrap, lightness_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r-grid", default="1/64,1/32,1/16,1/8,1/4")
    args = ap.parse_args()
    grid = [Fraction(s) for s in args.r_grid.split(",")]
    print(f"{'map':<28}{'K':>3}{'Q_hat':>9}{'slack':>9}")
    for K in (5, 6, 7):
        plain = QuasiArc(generate("euclidean", K, normalized=False))
        norm = QuasiArc(generate("euclidean", K))
        snow = QuasiArc(generate("snowflake", K))
        rows = [
            ("identity, euclidean", plain, [Fraction(i, plain.cells) for i in range(plain.cells + 1)]),
            ("d(0, .), normalized", norm, basepoint_coordinate(norm)),
            ("d(0, .), snowflake", snow, basepoint_coordinate(snow)),
            ("circle wrap 1/2, snowflake", snow, circle_wrap(snow, Fraction(1, 2))),
        ]
        for name, arc, f in rows:
            r = lightness_estimate(arc_matrix(arc), f, grid)
            print(f"{name:<28}{K:>3}{r.q_hat:>9.3f}{r.slack:>9.3f}")
    for m in (16, 64, 256):
        c = circle_matrix(m)
        r = lightness_estimate(c, c[0], grid)
        print(f"{'circle distance, m=' + str(m):<28}{'-':>3}{r.q_hat:>9.3f}{r.slack:>9.3f}")


if __name__ == "__main__":
    main()
