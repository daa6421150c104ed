"""ReLU across ||A|| at two sample sizes (N=500 and N=2500)."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _common import parser, run  # noqa: E402
from nlsysid.experiment import ExperimentConfig  # noqa: E402


def main(argv=None):
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--a-norms", type=float, nargs="+", default=[0.5, 0.7, 0.8, 0.9])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2500])
    args = ap.parse_args(argv)
    for N in args.sizes:
        for a in args.a_norms:
            cfg = ExperimentConfig(n=50, p=100, N=N, a_norm=a, activations=[{"kind": "relu"}],
                                   eta=0.01, iterations=50_000, realizations=20)
            run(cfg, args, f"relu_sweep_N{N}_a{a}")


if __name__ == "__main__":
    main()
