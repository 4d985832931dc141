"""Python access to the csd core.

Conditions and oracle specs are passed as plain dicts and serialized to JSON
for the extension.
"""
import json

from . import _csd
from ._csd import (
    ConfigError,
    ContractError,
    DimensionError,
    NumericError,
    alpha_sigma,
    check,
    enumerate_patches,
    median_bandwidth,
    rbf,
    rbf_grad_first,
    sha256_hex,
    svgd_gaussian,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "NumericError",
    "Oracle",
    "alpha_sigma",
    "check",
    "edit_canvas",
    "enumerate_patches",
    "median_bandwidth",
    "rbf",
    "rbf_grad_first",
    "run",
    "sha256_hex",
    "svgd_gaussian",
]


class Oracle:
    """Analytic three-branch eps oracle built from a spec dict."""

    def __init__(self, spec):
        self._impl = _csd.EditOracle(json.dumps(spec))

    @property
    def dim(self):
        return self._impl.dim

    def eps(self, x_t, t, condition=None, omega_y=7.5, omega_s=1.5, schedule="vp-cosine"):
        condition = condition or {"kind": "unconditional"}
        return self._impl.eps(x_t, t, json.dumps(condition), omega_y, omega_s, schedule)


def edit_canvas(oracle, canvas, patch, stride, batch, condition, steps=100, eta=1.0, kernel_mixing=True, seed=0):
    """Edits an (H, W, C) array; returns (edited array, seam discrepancy)."""
    import numpy as np

    canvas = np.asarray(canvas, dtype=np.float64)
    h, w, c = canvas.shape
    values, seam = _csd.edit_canvas(
        oracle._impl, canvas.reshape(-1), h, w, c, patch, stride, batch, json.dumps(condition), steps, eta,
        kernel_mixing, seed,
    )
    return np.asarray(values).reshape(h, w, c), seam


def run(config, seed=None, out=None):
    """Runs a config file like `csd run`; returns (exit code, log text)."""
    return _csd.run(str(config), seed, None if out is None else str(out))
