"""Conditional point-version ratios of comparable event pairs as the scale s shrinks."""
from _common import RESULTS, cache_dir, parser, write_rows

from perclab.experiments import COUPLING_PAIRS, coupling_ratio, coupling_trend_ok

if __name__ == "__main__":
    p = parser(__doc__, 10**6)
    p.add_argument("--pairs", nargs="+", default=sorted(COUPLING_PAIRS))
    p.add_argument("--mesh", type=float, default=1 / 32)
    args = p.parse_args()
    rows = []
    for key in args.pairs:
        got = coupling_ratio(COUPLING_PAIRS[key], mesh=args.mesh, n=args.n, workers=args.workers,
                             cache_dir=cache_dir(args))
        ok = coupling_trend_ok(got)
        rows += [dict(r, pair=key, trend_ok=ok) for r in got]
    write_rows(args.out or RESULTS / "coupling", rows)
