"""Data-driven balanced truncation for proportionally damped second-order systems."""

from .model import (
    FirstOrderRealization,
    ReducedModel,
    SecondOrderSystem,
    benchmark_chain,
    build_proportional,
    eval_transfer,
    eval_transfer_batch,
    load_model,
    save_model,
    synth_msd_chain,
    to_first_order,
)
from .quadrature import QuadratureRule, make_symmetric_rule, offset_rule_pair
from .sampling import FrequencySampleSet, export_samples, import_samples, sample_model
from .gramians import bt_reduce, lyapunov_velocity_gramians, quad_gramian_factors
from .databt import build_mdk_closed_form, build_real_quantities, databt_reduce
from .sylvester import assemble_sylvester, krydatabt_reduce, krylov_sylvester_solve
from .evaluation import ExpSineInput, bode_sweep, export_plot_data, h2_error, hinf_error_grid, simulate_time

__version__ = "0.1.0"
