"""Flat-torus discretization and complex differential calculus.

The computational manifold is the flat complex torus of complex dimension
``n`` (1 or 2), realized as the periodic box ``[0,1)^{2n}`` with real
coordinates ordered ``(x_1, y_1, ..., x_n, y_n)`` where ``z_j = x_j + i y_j``.
Translation-invariant Kahler forms are constant positive-definite Hermitian
``n x n`` matrices, and the complex Hessian ``d d^c`` acts as a Fourier
multiplier, so all differential calculus here is spectral: exact on
band-limited fields, with finite differences kept only as test oracles.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class TorusGrid:
    """Uniform periodic grid on the flat torus, period 1 per real axis.

    Axis ``2j`` carries ``x_{j+1}`` and axis ``2j+1`` carries ``y_{j+1}``.
    The resolution is the same on every axis; it must be even (spectral
    symmetry) and at least 8.
    """

    def __init__(self, n_complex: int, resolution: int):
        if n_complex not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {n_complex}")
        if resolution < 8 or resolution % 2 != 0:
            raise ValueError(f"resolution must be even and >= 8, got {resolution}")
        self.n = int(n_complex)
        self.resolution = int(resolution)
        self.spacing = 1.0 / resolution
        self.shape = (resolution,) * (2 * self.n)
        self.npoints = resolution ** (2 * self.n)
        # integer FFT frequencies per axis; the "deriv" copy zeroes the
        # Nyquist mode, required for odd-order spectral derivatives
        k = np.fft.fftfreq(resolution, d=self.spacing)
        kd = k.copy()
        kd[resolution // 2] = 0.0
        self._k_full = k
        self._k_deriv = kd

    # -- coordinates ---------------------------------------------------

    def axis_coords(self, axis: int) -> np.ndarray:
        """1-d coordinate array along ``axis``, reshaped for broadcasting."""
        x = np.arange(self.resolution) * self.spacing
        return self._broadcast(x, axis)

    def meshgrid(self):
        """Full coordinate arrays for all 2n real axes."""
        axes = [np.arange(self.resolution) * self.spacing] * (2 * self.n)
        return np.meshgrid(*axes, indexing="ij")

    def _broadcast(self, vec: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * (2 * self.n)
        shape[axis] = self.resolution
        return vec.reshape(shape)

    # -- spectral frequency bookkeeping ---------------------------------

    def freq(self, axis: int, nyquist: bool = True) -> np.ndarray:
        """Integer frequencies along ``axis`` (broadcastable).

        With ``nyquist=False`` the ambiguous N/2 mode is zeroed; use that
        variant inside first-derivative factors.
        """
        vec = self._k_full if nyquist else self._k_deriv
        return self._broadcast(vec, axis)

    def __eq__(self, other):
        return (
            isinstance(other, TorusGrid)
            and other.n == self.n
            and other.resolution == self.resolution
        )

    def __hash__(self):
        return hash((self.n, self.resolution))

    def __repr__(self):
        return f"TorusGrid(n_complex={self.n}, resolution={self.resolution})"


@dataclass(frozen=True)
class ScalarField:
    """Real-valued grid function (potentials and densities live here).

    Values are immutable after construction and must be finite everywhere.
    """

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.npoints:
                vals = vals.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"value count {vals.size} does not match grid {self.grid.shape}"
                )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # small arithmetic surface so barrier formulas read like the math
    def __add__(self, other):
        return ScalarField(self.grid, self.values + _raw(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _raw(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, _raw(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _raw(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))


def _raw(x):
    return x.values if isinstance(x, ScalarField) else x


class HermitianForm:
    """Constant positive-definite Hermitian matrix: a flat Kahler form.

    The stored matrix is symmetrized on construction so Hermitian symmetry
    is exact to representation precision.
    """

    def __init__(self, entries):
        m = np.asarray(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("entries must be a square matrix")
        if m.shape[0] not in (1, 2):
            raise ValueError("only complex dimensions 1 and 2 are supported")
        herm_defect = np.max(np.abs(m - m.conj().T))
        if herm_defect > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"matrix is not Hermitian (defect {herm_defect:.3e})")
        m = 0.5 * (m + m.conj().T)
        eigs = np.linalg.eigvalsh(m)
        if eigs[0] <= 0:
            raise ValueError(f"form is not positive definite (min eig {eigs[0]:.3e})")
        m.flags.writeable = False
        self.entries = m
        self.n = m.shape[0]

    @classmethod
    def identity(cls, n: int) -> "HermitianForm":
        return cls(np.eye(n))

    def scaled(self, c: float) -> "HermitianForm":
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return HermitianForm(c * self.entries)

    def det(self) -> float:
        return float(np.linalg.det(self.entries).real)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def max_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[-1])

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)

    def __eq__(self, other):
        return isinstance(other, HermitianForm) and np.array_equal(
            self.entries, other.entries
        )

    def __repr__(self):
        return f"HermitianForm({self.entries.tolist()})"


@dataclass(frozen=True)
class HermitianField:
    """Pointwise Hermitian n x n matrix field (the complex Hessian)."""

    grid: TorusGrid
    values: np.ndarray  # shape grid.shape + (n, n), complex

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        n = self.grid.n
        if vals.shape != self.grid.shape + (n, n):
            raise ValueError("matrix field shape does not match grid")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def entry(self, j: int, k: int) -> np.ndarray:
        return self.values[..., j, k]

    def hermitian_defect(self) -> float:
        v = self.values
        return float(np.max(np.abs(v - np.conj(np.swapaxes(v, -1, -2)))))


# ---------------------------------------------------------------------------
# spectral complex Hessian
# ---------------------------------------------------------------------------


def _hessian_multiplier(grid: TorusGrid, j: int, k: int) -> np.ndarray:
    """Fourier multiplier of the (j,k) complex Hessian entry.

    Entry (j,k) is the mixed derivative in z_j and conj(z_k); with integer
    frequencies kappa the symbol is
    ``-pi^2 (kappa_{x_j} - i kappa_{y_j}) (kappa_{x_k} + i kappa_{y_k})``.
    Diagonal entries reduce to the even symbol ``-pi^2 (kx_j^2 + ky_j^2)``
    which keeps the Nyquist mode; off-diagonal entries are products of
    first-derivative factors, where Nyquist is zeroed.
    """
    if j == k:
        kx = grid.freq(2 * j)
        ky = grid.freq(2 * j + 1)
        return -np.pi**2 * (kx**2 + ky**2)
    kxj = grid.freq(2 * j, nyquist=False)
    kyj = grid.freq(2 * j + 1, nyquist=False)
    kxk = grid.freq(2 * k, nyquist=False)
    kyk = grid.freq(2 * k + 1, nyquist=False)
    return -np.pi**2 * (kxj - 1j * kyj) * (kxk + 1j * kyk)


def hessian_values(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Raw-array complex Hessian, shape ``grid.shape + (n, n)``.

    Only the upper triangle is transformed; the lower triangle is the exact
    conjugate, so the output is Hermitian at every point by construction.
    """
    n = grid.n
    phi_hat = np.fft.fftn(values)
    out = np.empty(grid.shape + (n, n), dtype=complex)
    for j in range(n):
        diag = np.fft.ifftn(_hessian_multiplier(grid, j, j) * phi_hat)
        out[..., j, j] = diag.real
        for k in range(j + 1, n):
            ent = np.fft.ifftn(_hessian_multiplier(grid, j, k) * phi_hat)
            out[..., j, k] = ent
            out[..., k, j] = np.conj(ent)
    return out


def complex_hessian(phi: ScalarField) -> HermitianField:
    """Pointwise complex Hessian of ``phi``, computed spectrally.

    One forward transform, one inverse transform per independent entry.
    Every entry of the result has zero mean (derivative of a periodic
    function).
    """
    return HermitianField(phi.grid, hessian_values(phi.values, phi.grid))


@functools.lru_cache(maxsize=16)
def _quarter_laplacian_multiplier(grid: TorusGrid) -> np.ndarray:
    mult = -np.pi**2 * (grid.freq(0) ** 2 + grid.freq(1) ** 2)
    mult = mult[:, : grid.resolution // 2 + 1]
    mult.flags.writeable = False
    return mult


def quarter_laplacian(phi_values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Fast real-transform path for the n=1 Hessian entry H_11 = Lap(phi)/4."""
    mult = _quarter_laplacian_multiplier(grid)
    axes = tuple(range(len(grid.shape)))
    return np.fft.irfftn(mult * np.fft.rfftn(phi_values), s=grid.shape, axes=axes)


# ---------------------------------------------------------------------------
# form algebra
# ---------------------------------------------------------------------------


def form_distance(omega: HermitianForm, theta: HermitianForm) -> float:
    """Multiplicative pinching gap between two Kahler forms.

    The infimum of ``t > 0`` with ``exp(-t) omega <= theta <= exp(t) omega``,
    which equals the largest ``|log lambda|`` over generalized eigenvalues
    ``lambda`` of theta relative to omega. Symmetric, zero iff equal.
    """
    from scipy.linalg import eigh

    if np.array_equal(omega.entries, theta.entries):
        return 0.0
    lam = eigh(theta.entries, omega.entries, eigvals_only=True)
    if np.any(lam <= 0):
        raise ValueError("generalized eigenvalues must be positive")
    return float(np.max(np.abs(np.log(lam))))


def interpolate_family(
    omega0: HermitianForm, omega1: HermitianForm, t: float
) -> HermitianForm:
    """Linear segment between two Kahler forms; positive definite by convexity."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0,1], got {t}")
    return HermitianForm((1.0 - t) * omega0.entries + t * omega1.entries)


class FormPath:
    """Time-dependent family of flat Kahler forms on [0, T].

    Provides the pinching data every flow estimate needs: a fixed lower
    form theta with ``theta <= omega_t`` for all t, constants ``a, A`` with
    ``a theta <= omega_t <= A theta``, and the time-derivative bound ``B1``
    with ``-B1 omega_t <= dot(omega_t) <= B1 omega_t``.
    """

    def __init__(self, omega0: HermitianForm, omega1: HermitianForm | None, T: float):
        if T <= 0:
            raise ValueError("T must be positive")
        self.omega0 = omega0
        self.omega1 = omega1 if omega1 is not None else omega0
        self.T = float(T)
        self.n = omega0.n
        if self.omega1.n != self.n:
            raise ValueError("endpoint forms must share the dimension")

    @classmethod
    def constant(cls, theta: HermitianForm, T: float) -> "FormPath":
        return cls(theta, theta, T)

    @property
    def is_constant(self) -> bool:
        return np.array_equal(self.omega0.entries, self.omega1.entries)

    def at(self, t: float) -> HermitianForm:
        if self.is_constant:
            return self.omega0
        s = min(max(t / self.T, 0.0), 1.0)
        return interpolate_family(self.omega0, self.omega1, s)

    def lower_bound_form(self) -> HermitianForm:
        """A fixed form theta with theta <= omega_t for every t.

        The smallest eigenvalue of the segment is concave in t, so its
        minimum sits at an endpoint; a multiple of the identity at that
        level is a valid floor.
        """
        c = min(self.omega0.min_eig(), self.omega1.min_eig())
        return HermitianForm(c * np.eye(self.n))

    def pinching(self, theta: HermitianForm) -> tuple[float, float]:
        """Constants (a, A) with a*theta <= omega_t <= A*theta for all t.

        Extreme generalized eigenvalues of the affine segment against theta
        are attained at the endpoints (Rayleigh quotients are affine over
        a fixed positive denominator).
        """
        from scipy.linalg import eigh

        lo, hi = np.inf, 0.0
        for form in (self.omega0, self.omega1):
            lam = eigh(form.entries, theta.entries, eigvals_only=True)
            lo = min(lo, lam[0])
            hi = max(hi, lam[-1])
        return float(lo), float(hi)

    def b1_bound(self) -> float:
        """Sup over t of the generalized spectral radius of dot(omega_t).

        For the linear segment the derivative is constant, and the Rayleigh
        ratio |v* D v| / (v* omega_t v) is convex in t, so the supremum is
        attained at an endpoint; the bound returned here is exact.
        """
        if self.is_constant:
            return 0.0
        from scipy.linalg import eigh

        D = (self.omega1.entries - self.omega0.entries) / self.T
        worst = 0.0
        for form in (self.omega0, self.omega1):
            lam = eigh(D, form.entries, eigvals_only=True)
            worst = max(worst, float(np.max(np.abs(lam))))
        return worst

    def log_det_range(self, samples: int = 257) -> tuple[float, float]:
        """(min, max) of log det(omega_t) over t; log det is concave in t."""
        ts = np.linspace(0.0, 1.0, samples)
        vals = [
            float(np.log(np.linalg.det(
                (1 - s) * self.omega0.entries + s * self.omega1.entries
            ).real))
            for s in ts
        ]
        return min(vals), max(vals)


# ---------------------------------------------------------------------------
# MAFLD1 field file format
# ---------------------------------------------------------------------------

_MAGIC = b"MAFLD1"


def write_field(path, phi: ScalarField) -> None:
    """Persist a field: ASCII header, then row-major little-endian float64."""
    header = f"MAFLD1 n={phi.grid.n} res={phi.grid.resolution}\n".encode("ascii")
    payload = np.ascontiguousarray(phi.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_field(path) -> ScalarField:
    """Read a MAFLD1 field file; round-trips bit-exactly with write_field."""
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    parts = header.strip().split()
    if len(parts) != 3 or parts[0] != _MAGIC:
        raise ValueError(f"not a MAFLD1 file: header {header!r}")
    n = int(parts[1].split(b"=")[1])
    res = int(parts[2].split(b"=")[1])
    grid = TorusGrid(n, res)
    values = np.frombuffer(payload, dtype="<f8")
    if values.size != grid.npoints:
        raise ValueError(
            f"payload holds {values.size} values, grid wants {grid.npoints}"
        )
    return ScalarField(grid, values.reshape(grid.shape).astype(float))


def field_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()
