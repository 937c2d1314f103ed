"""Centered-model construction and Monte Carlo validation for the
quasilinear SPDE (d_0 - Laplace) u = a(u) Laplace u + noise on a
periodic space-time grid."""

from .indices import (
    ModelParams,
    MultiIndex,
    OrderingParams,
    e_k,
    e_n,
    enumerate_populated,
    format_index,
    homogeneity,
    is_populated,
    noise_homogeneity,
    ordinal,
    parse_index,
)
from .series import Series, Universe, shift_counterterm
from .fields import GridField, GridPoint, GridSpec
from .gamma import GammaData, GammaMatrix, build_dgamma, build_gamma
from .ensembles import EnsembleSpec, mollify, sample_noise
from .model import ModelBuilder, ModelRun, calibrate_counterterm

__all__ = [
    "ModelParams",
    "MultiIndex",
    "OrderingParams",
    "e_k",
    "e_n",
    "enumerate_populated",
    "format_index",
    "homogeneity",
    "is_populated",
    "noise_homogeneity",
    "ordinal",
    "parse_index",
    "Series",
    "Universe",
    "shift_counterterm",
    "GridField",
    "GridPoint",
    "GridSpec",
    "GammaData",
    "GammaMatrix",
    "build_dgamma",
    "build_gamma",
    "EnsembleSpec",
    "mollify",
    "sample_noise",
    "ModelBuilder",
    "ModelRun",
    "calibrate_counterterm",
]

__version__ = "0.1.0"
