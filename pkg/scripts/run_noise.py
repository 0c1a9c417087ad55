"""Input-noise sweep on the heat task."""
from _common import emit, limited, model_config, parser, seeds

from fracop.data import gen_heat1d
from fracop.protocols import mean_by, protocol_noise
from fracop.train import TrainConfig

p = parser(__doc__)
p.add_argument("--gamma", default="0,0.001,0.01,0.1")
p.add_argument("--grid", type=int, default=32)
p.set_defaults(epochs=100, step_size=20)
args = p.parse_args()

with limited(args):
    rows = protocol_noise(gen_heat1d(240, grid_n=args.grid, seed=0), model_config(args),
                          TrainConfig(epochs=args.epochs, step_size=args.step_size),
                          [float(g) for g in args.gamma.split(",")], seeds(args))
emit(rows, args)
for g, m in mean_by(rows, "gamma").items():
    print(f"# mean gamma={g}: {m:.5f}")
