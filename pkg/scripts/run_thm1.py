"""Three-point factorization ratio over dyadic meshes, with the window-doubling check."""
from _common import RESULTS, cache_dir, parser, write_rows

from perclab import theory
from perclab.experiments import DEFAULT_MESHES, THM1_MARKS, thm1_ratio

if __name__ == "__main__":
    p = parser(__doc__, 10**6)
    p.add_argument("--meshes", type=float, nargs="+", default=list(DEFAULT_MESHES))
    args = p.parse_args()
    rows = thm1_ratio(THM1_MARKS, args.meshes, args.n, workers=args.workers, cache_dir=cache_dir(args))
    write_rows(args.out or RESULTS / "thm1", rows, {"K_F": theory.k_f()})
