"""Deterministic generators of stable test systems.

Three families, all with vacuum/Dirichlet-zero boundaries on the unit
domain, zero initial state, and a constant-in-time source:

* ``heat1d``      diffusion on n_x interior nodes of [0, 1]
* ``advdiff2d``   diffusion + first-order upwind advection on an
                  n_x x n_y interior grid (row-major, x fastest)
* ``transport1d`` mono-energetic isotropic discrete-ordinates slab:
                  n_z zones times n_dir Gauss-Legendre directions,
                  upwind streaming, total/scattering cross sections
                  sigma_t >= sigma_s, particle speed nu

Identical spec + parameters always produce bit-identical operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .system import LinearDynamicalSystem

PROBLEM_KINDS = ("heat1d", "advdiff2d", "transport1d")

# Parameter-point component names, in --param order, per problem kind.
PARAM_NAMES = {
    "heat1d": ("kappa",),
    "advdiff2d": ("kappa", "vx", "vy"),
    "transport1d": ("sigma_t", "sigma_s"),
}


@dataclass
class ProblemSpec:
    kind: str = "heat1d"
    nx: int = 32
    ny: int = 8
    n_dir: int = 4
    kappa: float = 1.0
    vx: float = 1.0
    vy: float = 0.5
    sigma_t: float = 1.0
    sigma_s: float = 0.5
    speed: float = 1.0
    source: float = 1.0

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("mesh counts must be at least 2")


def _resolve(spec: ProblemSpec, param: dict, name: str) -> float:
    return float(param.get(name, getattr(spec, name)))


def _constant_signal(value: float):
    f = np.array([float(value)])

    def signal(k: int) -> np.ndarray:
        return f

    return signal


def make_system(spec: ProblemSpec, param: dict | None = None) -> LinearDynamicalSystem:
    param = dict(param or {})
    unknown = set(param) - set(PARAM_NAMES[spec.kind])
    if unknown:
        raise ValueError(f"{spec.kind} does not take parameters {sorted(unknown)}")
    if spec.kind == "heat1d":
        return make_heat1d(spec, param)
    if spec.kind == "advdiff2d":
        return make_advdiff2d(spec, param)
    return make_transport1d(spec, param)


def make_heat1d(spec: ProblemSpec, param: dict) -> LinearDynamicalSystem:
    """Diffusion kappa * u_xx on interior nodes; unit-indicator source over the
    middle third; output is the nodal mean."""
    kappa = _resolve(spec, param, "kappa")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    n = spec.nx
    h = 1.0 / (n + 1)
    scale = kappa / h**2
    a = sp.diags_array(
        [np.full(n - 1, scale), np.full(n, -2.0 * scale), np.full(n - 1, scale)],
        offsets=(-1, 0, 1),
        format="csr",
    )
    x = (np.arange(n) + 1) * h
    b = ((x >= 1.0 / 3.0) & (x <= 2.0 / 3.0)).astype(float)
    c = np.full((n, 1), 1.0 / n)
    return LinearDynamicalSystem(
        a=a,
        b=sp.csr_array(b[:, None]),
        c=c,
        x0=np.zeros(n),
        input_signal=_constant_signal(spec.source),
        constant_input=True,
        param=param,
    )


def make_advdiff2d(spec: ProblemSpec, param: dict) -> LinearDynamicalSystem:
    """5-point diffusion plus first-order upwind advection on the unit square.

    Unknown (ix, iy) sits at index iy * nx + ix.  The source is a Gaussian
    blob centered at (0.3, 0.3); the output integrates the upper-right
    corner subdomain [0.7, 1] x [0.7, 1].
    """
    kappa = _resolve(spec, param, "kappa")
    vx = _resolve(spec, param, "vx")
    vy = _resolve(spec, param, "vy")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if not (np.isfinite(vx) and np.isfinite(vy)):
        raise ValueError("velocity components must be finite")
    nx, ny = spec.nx, spec.ny
    hx, hy = 1.0 / (nx + 1), 1.0 / (ny + 1)
    n = nx * ny

    def idx(ix, iy):
        return iy * nx + ix

    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    dxw = kappa / hx**2
    dyw = kappa / hy**2
    for iy in range(ny):
        for ix in range(nx):
            i = idx(ix, iy)
            diag = -2.0 * dxw - 2.0 * dyw
            # upwind advection: -v . grad(u), biased against the flow
            if vx >= 0.0:
                diag -= vx / hx
                if ix > 0:
                    add(i, idx(ix - 1, iy), dxw + vx / hx)
                if ix < nx - 1:
                    add(i, idx(ix + 1, iy), dxw)
            else:
                diag += vx / hx
                if ix > 0:
                    add(i, idx(ix - 1, iy), dxw)
                if ix < nx - 1:
                    add(i, idx(ix + 1, iy), dxw - vx / hx)
            if vy >= 0.0:
                diag -= vy / hy
                if iy > 0:
                    add(i, idx(ix, iy - 1), dyw + vy / hy)
                if iy < ny - 1:
                    add(i, idx(ix, iy + 1), dyw)
            else:
                diag += vy / hy
                if iy > 0:
                    add(i, idx(ix, iy - 1), dyw)
                if iy < ny - 1:
                    add(i, idx(ix, iy + 1), dyw - vy / hy)
            add(i, i, diag)
    a = sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(n, n)))

    xs = (np.arange(nx) + 1) * hx
    ys = (np.arange(ny) + 1) * hy
    gx, gy = np.meshgrid(xs, ys)  # shape (ny, nx), row-major matches idx
    blob = np.exp(-(((gx - 0.3) ** 2 + (gy - 0.3) ** 2) / (2 * 0.1**2))).ravel()
    corner = ((gx >= 0.7) & (gy >= 0.7)).astype(float).ravel() * hx * hy
    return LinearDynamicalSystem(
        a=a,
        b=sp.csr_array(blob[:, None]),
        c=corner[:, None],
        x0=np.zeros(n),
        input_signal=_constant_signal(spec.source),
        constant_input=True,
        param=param,
    )


def gauss_legendre_directions(n_dir: int) -> tuple[np.ndarray, np.ndarray]:
    """Direction cosines on (-1, 1) with weights normalized to sum to one."""
    if n_dir < 2 or n_dir % 2 != 0:
        raise ValueError(f"direction count must be even and >= 2, got {n_dir}")
    mu, w = np.polynomial.legendre.leggauss(n_dir)
    return mu, w / w.sum()


def make_transport1d(spec: ProblemSpec, param: dict) -> LinearDynamicalSystem:
    """Discrete-ordinates slab with upwind streaming and isotropic scattering.

    Unknown ordering is direction-major: psi[(l, z)] = x[l * n_z + z].
    The streaming-plus-collision operator per direction is
    H_l = C_l + diag(sigma_t) with C_l the upwind difference scaled by mu_l
    and vacuum inflow; isotropic scattering couples directions through the
    weighted angular mean, giving dx/dt = nu * (scatter - H) x + nu * q.
    """
    sigma_t = _resolve(spec, param, "sigma_t")
    sigma_s = _resolve(spec, param, "sigma_s")
    nu = spec.speed
    if not (sigma_t >= sigma_s >= 0.0):
        raise ValueError(f"need sigma_t >= sigma_s >= 0, got {sigma_t}, {sigma_s}")
    if nu <= 0.0:
        raise ValueError("particle speed must be positive")
    nz = spec.nx
    mu, w = gauss_legendre_directions(spec.n_dir)
    dz = 1.0 / nz

    h_blocks = []
    for m in mu:
        speed = abs(m) / dz
        if m > 0.0:
            # inflow from the left boundary is zero (vacuum)
            c = sp.diags_array(
                [np.full(nz, speed), np.full(nz - 1, -speed)], offsets=(0, -1)
            )
        else:
            c = sp.diags_array(
                [np.full(nz, speed), np.full(nz - 1, -speed)], offsets=(0, 1)
            )
        h_blocks.append(c + sigma_t * sp.identity(nz))
    h = sp.block_diag(h_blocks, format="csr")
    # scatter[(l, z), (l', z)] = sigma_s * w_l'
    scatter = sp.kron(
        np.outer(np.ones(mu.size), w), sigma_s * sp.identity(nz), format="csr"
    )
    a = sp.csr_array(nu * (scatter - h))

    zc = (np.arange(nz) + 0.5) * dz
    src = ((zc >= 0.25) & (zc <= 0.75)).astype(float)
    b = nu * np.tile(src, mu.size)
    c_out = (np.repeat(w, nz) * dz)[:, None]
    return LinearDynamicalSystem(
        a=a,
        b=sp.csr_array(b[:, None]),
        c=c_out,
        x0=np.zeros(nz * mu.size),
        input_signal=_constant_signal(spec.source),
        constant_input=True,
        param=param,
    )


def transport_collision_operators(
    spec: ProblemSpec, param: dict | None = None
) -> tuple[sp.csr_array, sp.csr_array]:
    """(H, scatter) of the transport system, for steady-state cross-checks."""
    param = dict(param or {})
    sys = make_transport1d(spec, param)
    mu, w = gauss_legendre_directions(spec.n_dir)
    scatter = sp.kron(
        np.outer(np.ones(mu.size), w),
        _resolve(spec, param, "sigma_s") * sp.identity(spec.nx),
        format="csr",
    )
    # A = nu * (scatter - H), so H falls out of the assembled system
    h = sp.csr_array(scatter - sys.a / spec.speed)
    return h, sp.csr_array(scatter)
