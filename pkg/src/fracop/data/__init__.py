from .generators import (gen_burgers1d, gen_chirp_operator, gen_darcy2d, gen_heat1d,
                         solve_burgers, solve_darcy)
from .grf import GrfSpec, sample_grf, sample_grf_batch
from .nodf import DatasetFile, read_field_csv, write_field_csv

__all__ = [
    "DatasetFile", "GrfSpec", "gen_burgers1d", "gen_chirp_operator", "gen_darcy2d",
    "gen_heat1d", "read_field_csv", "sample_grf", "sample_grf_batch", "solve_burgers",
    "solve_darcy", "write_field_csv",
]
