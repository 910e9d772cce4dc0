"""Periodic convolution of kernels with sets and fields, plus inner products.

The FFT path multiplies cached kernel spectra; the direct path accumulates
rolled copies of the input over the kernel's nonzero offsets. Both compute
the same Riemann sum field(x) = sum_y K(x - y) f(y) vol and are kept as
independent routes so one can certify the other.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError, SpecMismatchError
from .grid import BinarySetField, GridSpec, ScalarField
from .kernels import SampledKernel

__all__ = ["convolve", "convolve_batch", "inner_product"]

_DIRECT_AUTO_LIMIT = 32  # max grid side for the auto direct path
_BATCH_MATMUL_LIMIT = 2048  # max cell count for the circulant-matrix batch path


def _as_values(
    field: BinarySetField | ScalarField | np.ndarray, spec: GridSpec
) -> np.ndarray:
    """Input field as float64 values on the kernel's grid."""
    if isinstance(field, BinarySetField):
        if field.spec != spec:
            raise SpecMismatchError("set and kernel live on different grids")
        return field.mask.astype(np.float64)
    if isinstance(field, ScalarField):
        if field.spec != spec:
            raise SpecMismatchError("field and kernel live on different grids")
        return field.values
    values = np.asarray(field, dtype=np.float64)
    if values.shape != spec.dims:
        raise SpecMismatchError(
            f"array shape {values.shape} does not match grid {spec.dims}"
        )
    return values


def _convolve_fft(kernel: SampledKernel, values: np.ndarray) -> np.ndarray:
    spec = kernel.spec
    axes = tuple(range(spec.ndim))
    spectrum = np.fft.rfftn(values, axes=axes) * kernel.spectrum()
    return np.fft.irfftn(spectrum, s=spec.dims, axes=axes) * spec.cell_volume


def _convolve_direct(kernel: SampledKernel, values: np.ndarray) -> np.ndarray:
    spec = kernel.spec
    out = np.zeros_like(values)
    axes = tuple(range(spec.ndim))
    for idx in np.argwhere(kernel.values != 0.0):
        shift = tuple(int(i) for i in idx)
        out += kernel.values[shift] * np.roll(values, shift, axis=axes)
    return out * spec.cell_volume


def convolve(
    kernel: SampledKernel,
    field: BinarySetField | ScalarField | np.ndarray,
    *,
    method: str = "auto",
) -> ScalarField:
    """Periodic convolution K * f on the kernel's grid.

    Accepts a binary set (as its indicator), a scalar field, or a raw value
    array (signed inputs allowed, e.g. indicator differences). `method` is
    "fft", "direct" (spatial accumulation over kernel offsets), or "auto",
    which picks the direct route only on small grids (side <= 32).
    """
    spec = kernel.spec
    values = _as_values(field, spec)
    if method == "auto":
        method = "direct" if max(spec.dims) <= _DIRECT_AUTO_LIMIT else "fft"
    if method == "fft":
        out = _convolve_fft(kernel, values)
    elif method == "direct":
        out = _convolve_direct(kernel, values)
    else:
        raise PreconditionError(f"unknown convolution method {method!r}")
    return ScalarField(spec, out)


def convolve_batch(
    kernel: SampledKernel, fields: list | tuple | np.ndarray
) -> np.ndarray:
    """Convolve many inputs with one kernel; returns (n, *dims) values.

    Small grids go through one circulant matrix product for the whole batch;
    larger grids fall back to per-input FFTs with the cached kernel spectrum.
    """
    spec = kernel.spec
    stack = np.stack([_as_values(f, spec) for f in fields])
    if spec.cell_count <= _BATCH_MATMUL_LIMIT:
        mat = kernel.direct_matrix()
        flat = stack.reshape(len(stack), -1)
        return (flat @ mat.T).reshape(stack.shape)
    return np.stack([_convolve_fft(kernel, v) for v in stack])


def inner_product(
    weight: BinarySetField | ScalarField | np.ndarray,
    field: BinarySetField | ScalarField | np.ndarray,
    *,
    spec: GridSpec | None = None,
) -> float:
    """Deterministic L2 pairing int w f dx on the grid.

    The cellwise products are summed in fixed-size chunks (pairwise inside
    each chunk, Kahan compensation across chunks) so the result does not
    depend on memory layout and stays stable for near-cancelling inputs.
    """
    for candidate in (weight, field):
        if isinstance(candidate, (BinarySetField, ScalarField)):
            spec = candidate.spec
            break
    if spec is None:
        raise PreconditionError("inner_product of raw arrays requires a grid spec")
    w = _as_values(weight, spec)
    f = _as_values(field, spec)
    prod = (w * f).ravel()
    total = 0.0
    comp = 0.0
    for start in range(0, prod.size, 4096):
        part = float(np.sum(prod[start : start + 4096]))
        y = part - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total * spec.cell_volume
