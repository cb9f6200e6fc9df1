"""Fault localization in fiber profiles with sparse-Kaczmarz linearized Bregman
iterations and fault-cluster compensation."""

from .detect import (ClusterShape, CompensationVector, approximate_deconvolution,
                     compensation_vector, detect_peaks, extract_cluster_shape)
from .evaluate import contingency, mcc, sweep
from .lbi import SolverConfig, sparse_kaczmarz, split_profile_run
from .model import EventList, FiberProfile, ModelError, SparseEstimate
from .simulate import NoiseConfig, TestbenchConfig, generate_testbench

__version__ = "0.1.0"
