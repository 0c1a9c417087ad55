"""Component ablations on the chirp filtering task (full model vs each removal)."""
from _common import emit, limited, model_config, parser, seeds

from fracop.data import gen_chirp_operator
from fracop.model import ABLATIONS
from fracop.protocols import mean_by, protocol_ablation
from fracop.train import TrainConfig

p = parser(__doc__)
p.add_argument("--grid", type=int, default=128)
p.add_argument("--samples", type=int, default=300)
p.add_argument("--variants", default=",".join(("full",) + ABLATIONS))
p.add_argument("--no-truncate", action="store_true",
               help="keep the alpha-prime branch untruncated (it then commutes with its transform)")
p.set_defaults(epochs=40)
args = p.parse_args()

with limited(args):
    data = gen_chirp_operator(args.samples, grid_n=args.grid, seed=0)
    cfg = model_config(args, truncate_alpha_prime=not args.no_truncate)
    rows = protocol_ablation(data, cfg, TrainConfig(epochs=args.epochs, step_size=args.step_size),
                             args.variants.split(","), seeds(args))
emit(rows, args)
for variant, m in mean_by(rows, "variant").items():
    print(f"# mean {variant}: {m:.5f}")
