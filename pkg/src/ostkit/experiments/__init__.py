from .datasets import (
    DatasetSpec,
    gen_blobs,
    gen_diff_var,
    gen_mnist_pair,
    gen_symmetric_matched,
    load_csv_sample,
)
from .harness import KernelMenuSpec, MCReport, parse_method, run_monte_carlo
from .mnist import downsample_images, load_idx, load_mnist_downsampled

__all__ = [
    "DatasetSpec",
    "KernelMenuSpec",
    "MCReport",
    "downsample_images",
    "gen_blobs",
    "gen_diff_var",
    "gen_mnist_pair",
    "gen_symmetric_matched",
    "load_csv_sample",
    "load_idx",
    "load_mnist_downsampled",
    "parse_method",
    "run_monte_carlo",
]
