"""Unstable system (||A|| > 1) learned from many short independent trajectories.

The step size starts from the theoretical recipe and is halved until the run is stable.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _common import parser, run  # noqa: E402
from nlsysid.experiment import ExperimentConfig  # noqa: E402


def main(argv=None):
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--a-norm", type=float, default=1.2)
    ap.add_argument("--t0", type=int, default=3)
    args = ap.parse_args(argv)
    cfg = ExperimentConfig(n=2, p=4, N=2000, a_norm=args.a_norm,
                           activations=[{"kind": "leaky_relu", "beta": 0.5}], eta="theory",
                           iterations=200_000, realizations=20, trace_stride=1000,
                           sampling="multi", T0=args.t0)
    run(cfg, args, f"unstable_a{args.a_norm}_T0{args.t0}")


if __name__ == "__main__":
    main()
