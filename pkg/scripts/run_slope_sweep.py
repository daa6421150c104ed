"""Leaky ReLU slope sweep at a well-conditioned and a poorly conditioned ||A||.

Writes one directory per ||A|| under --out with per-activation CSVs and summary.json.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from _common import parser, run  # noqa: E402
from nlsysid.experiment import ExperimentConfig  # noqa: E402

BETAS = [0.0, 0.25, 0.5, 0.75, 1.0]


def main(argv=None):
    ap = parser(__doc__.splitlines()[0])
    ap.add_argument("--a-norms", type=float, nargs="+", default=[0.3, 0.8])
    args = ap.parse_args(argv)
    acts = [{"kind": "relu"}] + [{"kind": "leaky_relu", "beta": b} for b in BETAS[1:]]
    for a in args.a_norms:
        cfg = ExperimentConfig(n=50, p=100, N=500, a_norm=a, activations=acts, eta=0.01,
                               iterations=50_000, realizations=20)
        run(cfg, args, f"slope_sweep_a{a}")


if __name__ == "__main__":
    main()
