"""Top-K eigenpairs of sparse symmetric matrices via Lanczos and a systolic Jacobi solver."""
__version__ = "0.1.0"

from .fixed import FixedMode, FloatMode, QFormat, dot_fixed, fixed_add, fixed_mul, parse_arith, to_fixed
from .jacobi import SystolicGrid, TrigMode, compute_rotation, interchange, jacobi_eigen
from .lanczos import LanczosBasis, ReorthPolicy, TridiagonalK, initial_vector, lanczos, reorthogonalize
from .oracle import dense_oracle
from .solver import (AccuracyReport, EigenDecomposition, SolverConfig, accuracy_report,
                     reconstruct_topk, top_k_eigen)
from .sparse import CooMatrix, frobenius_normalize, load_matrix_market, partition, save_matrix_market
from .spmv import merge, spmv, spmv_cu

__all__ = [
    "AccuracyReport", "CooMatrix", "EigenDecomposition", "FixedMode", "FloatMode", "LanczosBasis",
    "QFormat", "ReorthPolicy", "SolverConfig", "SystolicGrid", "TridiagonalK", "TrigMode",
    "accuracy_report", "compute_rotation", "dense_oracle", "dot_fixed", "fixed_add", "fixed_mul",
    "frobenius_normalize", "initial_vector", "interchange", "jacobi_eigen", "lanczos", "load_matrix_market",
    "merge", "parse_arith", "partition", "reconstruct_topk", "reorthogonalize", "save_matrix_market",
    "spmv", "spmv_cu", "to_fixed", "top_k_eigen",
]
