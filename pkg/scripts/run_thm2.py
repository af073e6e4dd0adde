"""Interval ratio over dyadic meshes against psi(x), with the window-doubling check."""
from _common import RESULTS, cache_dir, parser, write_rows

from perclab.experiments import DEFAULT_MESHES, THM2_MARKS, thm2_ratio

if __name__ == "__main__":
    p = parser(__doc__, 10**6)
    p.add_argument("--meshes", type=float, nargs="+", default=list(DEFAULT_MESHES))
    args = p.parse_args()
    rows = thm2_ratio(THM2_MARKS, args.meshes, args.n, workers=args.workers, cache_dir=cache_dir(args))
    write_rows(args.out or RESULTS / "thm2", rows)
