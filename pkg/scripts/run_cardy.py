"""Interval-to-interval crossing frequency at mesh 1/32 against Cardy's formula."""
from _common import RESULTS, cache_dir, parser, write_rows

from perclab.experiments import CARDY_MARKS, cardy_check

if __name__ == "__main__":
    p = parser(__doc__, 10**6)
    p.add_argument("--mesh", type=float, default=1 / 32)
    args = p.parse_args()
    m = CARDY_MARKS
    row = cardy_check(m.u1, m.s1, m.u2, m.s2, args.mesh, args.n, workers=args.workers,
                      cache_dir=cache_dir(args), doubling=True)
    write_rows(args.out or RESULTS / "cardy", [row])
