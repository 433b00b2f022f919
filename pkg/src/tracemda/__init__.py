"""Trace-ratio optimization and multilinear discriminant analysis with the Einstein product."""
from tracemda.data_io import (
    SplitSpec,
    SynthSpec,
    load_container,
    load_idx,
    save_container,
    split,
    synth_gaussian_classes,
)
from tracemda.evaluation import knn1_classify, recognition_rate, run_benchmark
from tracemda.mda import LabeledDataset, mda_ls, mda_rt, mda_tr, project, scatters
from tracemda.spectral import EigenSystem, eig_sym, gevp, top_d_eig
from tracemda.tensor_core import einstein_product, identity_tensor, m_mode_product, transpose
from tracemda.trace_ratio import (
    SolverOptions,
    TRSolution,
    f_eval,
    solve_rt_gevp,
    solve_tr_newton,
    trace_ratio_objective,
)

__version__ = "0.1.0"
