"""Build the disk calibration for the Green-function radius estimator and check it on held-out disks."""
import argparse

from _common import RESULTS, write_rows

from perclab.confradius import calibrate_green, doubling_increments, measure_disks

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--walks", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--check-seed", type=int, default=2)
    args = p.parse_args()
    cal = calibrate_green(args.walks, args.seed)
    out = RESULTS / "green"
    out.mkdir(parents=True, exist_ok=True)
    cal.save(out / "calibration.json")
    radii = (16, 24, 32, 48, 64)
    g, se = measure_disks(radii, args.walks // 2, seed=args.check_seed)
    rows = [{"radius": r, "g": gi, "g_se": si, "estimate": cal.radius_over_mesh(gi),
             "rel_error": cal.radius_over_mesh(gi) / r - 1.0} for r, gi, si in zip(radii, g, se)]
    write_rows(out, rows, {"increments": doubling_increments(cal).tolist(), "checksum": cal.checksum()})
