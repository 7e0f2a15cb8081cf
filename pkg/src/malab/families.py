"""Built-in field, density, and potential families.

These parametric builders are the only user-programmable surface of the
CLI (no embedded expression language), and the tests draw their randomized
instances from the same constructors so every run is reproducible from a
seed.
"""

from __future__ import annotations

import numpy as np

from .geometry import HermitianForm, ScalarField, TorusGrid, hessian_values
from .ma_ops import Density, NormalizedVolume, _min_eig_hermitian

FIELD_FAMILIES = (
    "constant",
    "sine",
    "exp_sine",
    "exp_sine_product",
    "bump",
    "random",
)


def sine_field(grid: TorusGrid, axis: int = 0, freq: int = 1, amp: float = 1.0,
               base: float = 0.0) -> ScalarField:
    x = grid.axis_coords(axis)
    vals = base + amp * np.sin(2.0 * np.pi * freq * x)
    return ScalarField(grid, np.broadcast_to(vals, grid.shape).copy())


def bump_field(grid: TorusGrid, amp: float = 1.0, width: float = 0.15,
               center=None) -> ScalarField:
    """Smooth periodic bump: product of von Mises profiles per axis."""
    if center is None:
        center = [0.5] * (2 * grid.n)
    conc = 1.0 / max(width, 1e-3) ** 2
    vals = np.ones(grid.shape)
    for axis in range(2 * grid.n):
        x = grid.axis_coords(axis)
        vals = vals * np.exp(conc * (np.cos(2.0 * np.pi * (x - center[axis])) - 1.0))
    return ScalarField(grid, amp * vals)


def random_bandlimited(grid: TorusGrid, rng, amp: float = 1.0, kmax: int = 2) -> ScalarField:
    """Seeded random real field supported on frequencies |k_axis| <= kmax.

    Coefficients decay with |k| so the field is numerically smooth; the mean
    mode is zero.
    """
    shape = grid.shape
    coeffs = np.zeros(shape, dtype=complex)
    res = grid.resolution
    axes_freqs = np.fft.fftfreq(res, d=1.0 / res).astype(int)
    index_sets = [np.where(np.abs(axes_freqs) <= kmax)[0] for _ in range(2 * grid.n)]
    mesh = np.meshgrid(*index_sets, indexing="ij")
    sel = tuple(m.ravel() for m in mesh)
    kk = np.stack([np.abs(axes_freqs[s]) for s in sel], axis=0)
    decay = np.exp(-0.5 * (kk**2).sum(axis=0))
    re = rng.standard_normal(sel[0].size)
    im = rng.standard_normal(sel[0].size)
    coeffs[sel] = (re + 1j * im) * decay
    coeffs[(0,) * (2 * grid.n)] = 0.0
    vals = np.fft.ifftn(coeffs).real
    peak = np.abs(vals).max()
    if peak > 0:
        vals = vals * (amp / peak)
    return ScalarField(grid, vals)


def field_from_config(grid: TorusGrid, spec: dict, rng=None) -> ScalarField:
    family = spec.get("family", "constant")
    if family == "constant":
        return ScalarField.constant(grid, spec.get("value", 0.0))
    if family == "sine":
        return sine_field(
            grid,
            axis=spec.get("axis", 0),
            freq=spec.get("freq", 1),
            amp=spec.get("amp", 1.0),
            base=spec.get("base", 0.0),
        )
    if family == "exp_sine":
        inner = sine_field(grid, axis=spec.get("axis", 0), freq=spec.get("freq", 1),
                           amp=spec.get("amp", 0.3))
        return ScalarField(grid, np.exp(inner.values))
    if family == "exp_sine_product":
        freq = spec.get("freq", 1)
        x = grid.axis_coords(0)
        y = grid.axis_coords(1)
        prod = np.sin(2 * np.pi * freq * x) * np.cos(2 * np.pi * freq * y)
        vals = np.exp(spec.get("amp", 0.3) * np.broadcast_to(prod, grid.shape))
        return ScalarField(grid, vals.copy())
    if family == "bump":
        return bump_field(grid, amp=spec.get("amp", 1.0), width=spec.get("width", 0.15),
                          center=spec.get("center"))
    if family == "random":
        if rng is None:
            raise ValueError("random family needs an rng (seeded run)")
        return random_bandlimited(grid, rng, amp=spec.get("amp", 0.3),
                                  kmax=spec.get("kmax", 2))
    raise ValueError(f"unknown field family {family!r}")


def density_from_config(grid: TorusGrid, spec: dict, p: float, rng=None) -> Density:
    f_min = spec.get("f_min", 1e-6)
    base = field_from_config(grid, spec, rng)
    vals = base.values.copy()
    if spec.get("shift_positive", True):
        floor = vals.min()
        if floor < f_min:
            vals = vals - floor + max(f_min, 1e-3)
    if spec.get("normalize", True):
        vals = normalize_mass(vals, grid)
    vals = np.maximum(vals, f_min)
    return Density(ScalarField(grid, vals), p=p, f_min=f_min)


def normalize_mass(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    dV = NormalizedVolume(grid)
    mass = dV.integrate(values)
    if mass <= 0:
        raise ValueError("cannot normalize a field with nonpositive mass")
    return values / mass


def random_density(grid: TorusGrid, rng, p: float, amp: float = 0.3,
                   kmax: int = 2, f_min: float = 1e-6) -> Density:
    """exp(random band-limited) density, normalized to unit mass."""
    raw = random_bandlimited(grid, rng, amp=amp, kmax=kmax)
    vals = normalize_mass(np.exp(raw.values), grid)
    vals = np.maximum(vals, f_min)
    return Density(ScalarField(grid, vals), p=p, f_min=f_min)


def random_psh(grid: TorusGrid, theta: HermitianForm, rng, margin: float = 0.5,
               amp: float = 1.0, kmax: int = 2) -> ScalarField:
    """Random strictly theta-psh potential.

    A band-limited draw is rescaled so the Hessian never eats more than
    ``margin`` of the smallest eigenvalue of theta.
    """
    raw = random_bandlimited(grid, rng, amp=amp, kmax=kmax)
    hess = hessian_values(raw.values, grid)
    most_negative = float(_min_eig_hermitian(hess).min())
    lam = theta.min_eig()
    scale = 1.0
    if most_negative < 0:
        scale = min(1.0, margin * lam / (-most_negative))
    return ScalarField(grid, scale * raw.values)
