"""Training-set size sweep on the heat task."""
from _common import emit, limited, model_config, parser, seeds

from fracop.data import gen_heat1d
from fracop.protocols import mean_by, protocol_data_ratio
from fracop.train import TrainConfig

p = parser(__doc__)
p.add_argument("--ratios", default="0.25,0.5,1.0")
p.add_argument("--grid", type=int, default=32)
p.set_defaults(epochs=100, step_size=20)
args = p.parse_args()

with limited(args):
    rows = protocol_data_ratio(gen_heat1d(240, grid_n=args.grid, seed=0), model_config(args),
                               TrainConfig(epochs=args.epochs, step_size=args.step_size),
                               [float(r) for r in args.ratios.split(",")], seeds(args))
emit(rows, args)
for r, m in mean_by(rows, "ratio").items():
    print(f"# mean ratio={r}: {m:.5f}")
