"""Train the heat-equation operator and report the final test error."""
from _common import emit, limited, model_config, parser, seeds

from fracop.data import gen_heat1d
from fracop.model import ConoModel
from fracop.train import TrainConfig, prepare_data, train_loop

p = parser(__doc__)
p.add_argument("--grid", type=int, default=64)
p.add_argument("--samples", type=int, default=240)
p.set_defaults(epochs=200, seeds="0")
args = p.parse_args()

rows = []
with limited(args):
    data = gen_heat1d(args.samples, grid_n=args.grid, seed=0)
    for s in seeds(args):
        tcfg = TrainConfig(epochs=args.epochs, step_size=args.step_size, seed=s)
        train, test = prepare_data(data, tcfg)
        res = train_loop(ConoModel.create(model_config(args), s), train, test, tcfg)
        last = res.metrics.rows[-1]
        rows.append({"seed": s, "test_rel_l2": last["test_rel_l2"],
                     "train_rel_l2": last["train_rel_l2"], "best_test_rel_l2": res.metrics.best_test})
emit(rows, args)
