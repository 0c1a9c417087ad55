"""Train on a coarse heat grid, then evaluate zero-shot on finer grids."""
from _common import emit, limited, model_config, parser

from fracop.data import gen_heat1d
from fracop.model import ConoModel
from fracop.protocols import protocol_resolution, resolution_family
from fracop.train import TrainConfig, prepare_data, train_loop

p = parser(__doc__)
p.add_argument("--train-res", type=int, default=32)
p.add_argument("--res", default="32,64,128")
p.add_argument("--samples", type=int, default=240)
p.set_defaults(epochs=100, seeds="0")
args = p.parse_args()

res = sorted({args.train_res, *(int(r) for r in args.res.split(","))})
with limited(args):
    family = resolution_family(lambda n: gen_heat1d(args.samples, grid_n=n, seed=0), res)
    tcfg = TrainConfig(epochs=args.epochs, step_size=args.step_size, seed=int(args.seeds.split(",")[0]))
    train, test = prepare_data(family[args.train_res], tcfg)
    out = train_loop(ConoModel.create(model_config(args), tcfg.seed), train, test, tcfg)
    rows = protocol_resolution(out.model, family)
emit(rows, args)
