"""Self-supervised fractional super-resolution for lossy voxelized point clouds."""

from .ctc import ctc_scale
from .geometry import (
    GeometryError,
    VoxelCloud,
    children_of,
    downscale,
    integer_upscale,
    translation_of,
    upscale_nni,
)
from .metrics import RdCurve, RdPoint, bd_rate, d1_psnr, directional_mse, load_rd_csv
from .ply import load_ply, save_ply
from .sr import (
    OccupancyLut,
    apply_sr,
    build_lut,
    choose_s_prime,
    dus_super_resolve,
    factorize_scale,
    neighborhood_code,
    super_resolve,
)

__version__ = "0.1.0"
