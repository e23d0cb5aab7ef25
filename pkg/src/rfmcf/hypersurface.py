"""Discrete hypersurfaces in a background chart and their extrinsic geometry.

Supported kinds:

* ``closed-curve``: periodic curve in a 2D background, spectral in the parameter.
* ``open-curve``: curve segment in a 2D background, 4th-order stencils.
* ``revolution-profile``: axisymmetric surface in a 3D background that is
  rotationally symmetric about the z axis. Nodes are the meridian in the
  ``y = 0`` half plane on a staggered grid over the polar parameter, so no
  node sits on the axis; the angular direction is handled in closed form.

Surface tensors use parameter coordinates: index 0 is the grid parameter and,
for surfaces of revolution, index 1 is the rotation angle. Adapted-frame
ambient tensors use index 0 for the unit normal ``e0`` and 1.. for the
coordinate tangents.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Optional

import numpy as np

from . import spectral, tensor
from .backgrounds import Background, ScalarField
from .errors import BadShape, DegenerateTangent, OpenImmersion, TooCoarse

N_MIN = 16
KINDS = ("closed-curve", "open-curve", "revolution-profile")


@dataclass(frozen=True)
class Immersion:
    """Sampled hypersurface.

    ``orientation`` is +1 for the default normal: inward for closed curves
    traversed counterclockwise and for meridians run from the top pole, and
    the left normal of the direction of travel for open curves.
    """

    kind: str
    nodes: np.ndarray
    background: Background
    orientation: int = 1
    shape: str = "table"
    params: dict = field(default_factory=dict)
    span: tuple[float, float] = (0.0, 2 * np.pi)

    @property
    def N(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return 2 if self.kind == "revolution-profile" else 1

    @property
    def closed(self) -> bool:
        return self.kind != "open-curve"

    @property
    def sigma(self) -> np.ndarray:
        if self.kind == "closed-curve":
            return spectral.periodic_grid(self.N)
        if self.kind == "revolution-profile":
            return spectral.staggered_grid(self.N)
        return np.linspace(self.span[0], self.span[1], self.N)

    @property
    def dsigma(self) -> float:
        if self.kind == "closed-curve":
            return 2 * np.pi / self.N
        if self.kind == "revolution-profile":
            return np.pi / self.N
        return (self.span[1] - self.span[0]) / (self.N - 1)

    def with_nodes(self, nodes: np.ndarray) -> "Immersion":
        return replace(self, nodes=np.asarray(nodes, dtype=float))

    def flipped(self) -> "Immersion":
        return replace(self, orientation=-self.orientation)

    # -- parameter derivatives ------------------------------------------------

    def d_param(self, F: np.ndarray, parity=1, order: int = 1) -> np.ndarray:
        """Derivative of node samples along the grid parameter.

        ``parity`` only matters for surfaces of revolution (behaviour under
        reflection through the poles).
        """
        F = np.asarray(F, dtype=float)
        if self.kind == "closed-curve":
            return spectral.fourier_derivative(F, order)
        if self.kind == "revolution-profile":
            return spectral.half_derivative(F, parity, order)
        D1, D2 = spectral.fd_matrices(self.N, self.dsigma)
        D = D1 if order == 1 else D2 if order == 2 else np.linalg.matrix_power(D1, order)
        return np.tensordot(D, F, axes=(1, 0))


@dataclass
class ExtrinsicGeometry:
    """Per-node geometry of an immersion at one background time."""

    t: float
    X: np.ndarray          # (N, n) node positions
    E: np.ndarray          # (N, k, n) coordinate tangent frame
    induced: np.ndarray    # (N, k, k)
    induced_inv: np.ndarray
    normal: np.ndarray     # (N, n) unit normal vector e0
    conormal: np.ndarray   # (N, n) metric dual of e0
    A: np.ndarray          # (N, k, k)
    H: np.ndarray          # (N,)
    christoffel_hat: np.ndarray  # (N, k, k, k), upper index first
    area_element: np.ndarray     # (N,) sqrt(det induced), angle factor included
    bundle: tensor.CurvatureBundle
    fbar: Optional[np.ndarray] = None
    fbar_dt: Optional[np.ndarray] = None
    grad_fbar: Optional[np.ndarray] = None      # (N, k) tangential d_i f
    e0f: Optional[np.ndarray] = None
    ambient_grad_f: Optional[np.ndarray] = None  # (N, n)
    ambient_hess_f: Optional[np.ndarray] = None  # (N, n, n) covariant
    ambient: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)

    @property
    def A_mixed(self) -> np.ndarray:
        """A^i_j."""
        return np.einsum("nik,nkj->nij", self.induced_inv, self.A)

    @property
    def A_norm_sq(self) -> np.ndarray:
        M = self.induced_inv @ self.A
        return np.einsum("nij,nji->n", M, M)


# ----------------------------------------------------------------------------
# construction


def _grim_reaper_nodes(N, x_max):
    s_max = np.arcsinh(np.tan(x_max))
    s = np.linspace(-s_max, s_max, N)
    x = 2 * np.arctan(np.tanh(s / 2))
    y = np.log(np.cosh(s))
    return np.stack([x, y], axis=-1), (-s_max, s_max)


def _legendre2(c):
    return 0.5 * (3 * c ** 2 - 1)


def build(kind: str, background: Background, shape: str, N: int, orientation: int = 1,
          **params) -> Immersion:
    """Sample a closed-form shape.

    closed-curve shapes: ``circle`` (radius, center), ``ellipse`` (a, b,
    center), ``perturbed-circle`` (radius, amplitude, mode, center),
    ``clustered-circle`` (radius, strength; non-uniform parametrization),
    ``table`` (points, counterclockwise, resampled spectrally to N nodes).
    open-curve shapes: ``grim-reaper`` (x_max, offset), ``line`` (start, end).
    revolution-profile shapes: ``sphere`` (radius, z0), ``perturbed-sphere``
    (radius, amplitude, z0; r = R(1 + amplitude P2(cos theta))),
    ``ellipsoid`` (a, c, z0).
    """
    if kind not in KINDS:
        raise BadShape(f"unknown immersion kind {kind!r}")
    if N < N_MIN:
        raise TooCoarse(f"N={N} below the floor {N_MIN}")
    n = background.n
    if kind == "revolution-profile" and n != 3:
        raise BadShape("surfaces of revolution need a 3D background")
    if kind != "revolution-profile" and n != 2:
        raise BadShape("curves need a 2D background")
    p = dict(params)

    def pos(name, default=None):
        val = p.pop(name, default)
        if val is None:
            raise BadShape(f"{shape}: missing parameter {name!r}")
        return val

    span = (0.0, 2 * np.pi)
    if kind == "closed-curve":
        s = spectral.periodic_grid(N)
        c = np.asarray(pos("center", (0.0, 0.0)), dtype=float)
        if shape in ("circle", "perturbed-circle", "clustered-circle"):
            r = float(pos("radius", 1.0))
            if r <= 0:
                raise BadShape("circle radius must be positive")
            if shape == "clustered-circle":
                w = float(pos("strength", 0.5))
                s = s + w * np.sin(s)
            rad = r * np.ones_like(s)
            if shape == "perturbed-circle":
                eps, m = float(pos("amplitude", 0.1)), int(pos("mode", 3))
                if abs(eps) >= 1:
                    raise BadShape("perturbation amplitude must be below 1")
                rad = r * (1 + eps * np.cos(m * s))
            X = c + np.stack([rad * np.cos(s), rad * np.sin(s)], axis=-1)
        elif shape == "ellipse":
            a, b = float(pos("a", 2.0)), float(pos("b", 1.0))
            if a <= 0 or b <= 0:
                raise BadShape("ellipse semi-axes must be positive")
            X = c + np.stack([a * np.cos(s), b * np.sin(s)], axis=-1)
        elif shape == "table":
            pts = np.asarray(pos("points"), dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
                raise BadShape("table needs an (M, 2) array with M >= 4")
            M = len(pts)
            X = spectral.fourier_interpolate(pts, 2 * np.pi * np.arange(N) / N * 1.0) \
                if M != N else pts
        else:
            raise BadShape(f"unknown closed-curve shape {shape!r}")
    elif kind == "open-curve":
        if shape == "grim-reaper":
            x_max = float(pos("x_max", 1.2))
            if not 0 < x_max < np.pi / 2:
                raise BadShape("grim reaper needs 0 < x_max < pi/2")
            X, span = _grim_reaper_nodes(N, x_max)
            X = X + np.array([0.0, float(pos("offset", 0.0))])
        elif shape == "line":
            a = np.asarray(pos("start", (-1.0, 0.0)), dtype=float)
            b = np.asarray(pos("end", (1.0, 0.0)), dtype=float)
            L = np.linalg.norm(b - a)
            if L == 0:
                raise BadShape("line endpoints coincide")
            u = np.linspace(0, 1, N)[:, None]
            X = a + u * (b - a)
            span = (0.0, float(L))
        else:
            raise BadShape(f"unknown open-curve shape {shape!r}")
    else:
        s = spectral.staggered_grid(N)
        z0 = float(pos("z0", 0.0))
        if shape in ("sphere", "perturbed-sphere"):
            R = float(pos("radius", 1.0))
            if R <= 0:
                raise BadShape("sphere radius must be positive")
            rad = R * np.ones_like(s)
            if shape == "perturbed-sphere":
                eps = float(pos("amplitude", 0.1))
                if abs(eps) >= 1:
                    raise BadShape("perturbation amplitude must be below 1")
                rad = R * (1 + eps * _legendre2(np.cos(s)))
            X = np.stack([rad * np.sin(s), 0 * s, z0 + rad * np.cos(s)], axis=-1)
        elif shape == "ellipsoid":
            a, cz = float(pos("a", 1.0)), float(pos("c", 1.5))
            if a <= 0 or cz <= 0:
                raise BadShape("ellipsoid semi-axes must be positive")
            X = np.stack([a * np.sin(s), 0 * s, z0 + cz * np.cos(s)], axis=-1)
        else:
            raise BadShape(f"unknown revolution-profile shape {shape!r}")
    if p:
        raise BadShape(f"{shape}: unexpected parameters {sorted(p)}")
    return Immersion(kind, np.asarray(X, dtype=float), background, int(orientation), shape,
                     dict(params), span)


# ----------------------------------------------------------------------------
# geometry


def _parity(k: int, rank: int) -> np.ndarray:
    """(-1)^(number of grid-parameter indices) for each component of a rank-r surface tensor."""
    if rank == 0:
        return np.array(1.0)
    out = np.empty((k,) * rank)
    for idx in product(range(k), repeat=rank):
        out[idx] = (-1.0) ** sum(1 for i in idx if i == 0)
    return out


def cov_derivative(imm: Immersion, T: np.ndarray, gam: np.ndarray) -> np.ndarray:
    """Covariant derivative of a covariant surface tensor with node axis first.

    Output index order: ``out[n, k, i1, ..., ir] = (nabla_k T)_{i1..ir}``.
    The angular derivative vanishes by symmetry.
    """
    k = imm.dim
    rank = T.ndim - 1
    out = np.zeros((T.shape[0], k) + T.shape[1:])
    out[:, 0] = imm.d_param(T, _parity(k, rank))
    for slot in range(rank):
        # - Gamma^m_{k i_slot} T_{.. m ..}
        Tm = np.moveaxis(T, 1 + slot, -1)                    # (N, ..., m)
        corr = np.einsum("nmks,n...m->nk...s", gam, Tm)       # s = i_slot
        out -= np.moveaxis(corr, -1, 2 + slot)
    return out


def _frame(imm: Immersion, X: np.ndarray):
    N, n = X.shape
    k = imm.dim
    if imm.kind == "revolution-profile":
        X1, X2 = spectral.fourier_derivatives12(spectral.reflect(X, np.array([-1.0, 1.0, 1.0])))
        X1, X2 = X1[:N], X2[:N]
        rho, rho1 = X[:, 0], X1[:, 0]
        E = np.zeros((N, 2, n))
        E[:, 0] = X1
        E[:, 1, 1] = rho
        DD = np.zeros((N, 2, 2, n))
        DD[:, 0, 0] = X2
        DD[:, 0, 1, 1] = DD[:, 1, 0, 1] = rho1
        DD[:, 1, 1, 0] = -rho
        nu = np.stack([X1[:, 2], 0 * rho, -X1[:, 0]], axis=-1)
    else:
        if imm.kind == "closed-curve":
            X1, X2 = spectral.fourier_derivatives12(X)
        else:
            X1, X2 = imm.d_param(X), imm.d_param(X, order=2)
        E = X1[:, None, :]
        DD = X2[:, None, None, :]
        nu = np.stack([-X1[:, 1], X1[:, 0]], axis=-1)
    return E, DD, imm.orientation * nu


@dataclass
class NormalData:
    """The slice of geometry needed to move nodes: normal, A, H, induced metric."""

    normal: np.ndarray
    induced: np.ndarray
    A: np.ndarray
    H: np.ndarray
    A_norm_sq: np.ndarray
    area_element: np.ndarray
    e0f: Optional[np.ndarray] = None


def _small_inverse(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if M.shape[-1] == 1:
        det = M[:, 0, 0]
        return 1.0 / M, det
    a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
    det = a * d - b * c
    inv = np.empty_like(M)
    inv[:, 0, 0], inv[:, 0, 1], inv[:, 1, 0], inv[:, 1, 1] = d, -b, -c, a
    return inv / det[:, None, None], det


def normal_data(imm: Immersion, t: float, with_potential: bool = False,
                method: str = "auto") -> NormalData:
    """Lean evaluation of e0, A and H for time stepping (first metric derivatives only)."""
    bg = imm.background
    X = bg.check_point(imm.nodes, t)
    E, DD, nu = _frame(imm, X)
    if bg.flat:
        gE = E
        ghat = E @ np.swapaxes(E, 1, 2)
        ginv = None
    else:
        jet = tensor.metric_jet(bg, X, t, order=1, method=method)
        g, ginv = jet.g, np.linalg.inv(jet.g)
        gE = E @ g
        ghat = gE @ np.swapaxes(E, 1, 2)
    ghat_inv, det = _small_inverse(ghat)
    if not np.all(np.isfinite(det)) or np.min(det) <= 1e-14 * np.max(np.abs(det)):
        raise DegenerateTangent("discrete tangent vanishes or metric degenerate on the immersion")
    if ginv is None:
        nu = nu / np.linalg.norm(nu, axis=1)[:, None]
        e0 = nu
        A = np.einsum("na,nija->nij", nu, DD)
    else:
        nu = nu / np.sqrt(np.einsum("na,nab,nb->n", nu, ginv, nu))[:, None]
        e0 = np.einsum("nab,nb->na", ginv, nu)
        # e0^d G_dbc E_i^b E_j^c from first metric derivatives
        P = np.einsum("nic,ncab->niab", E, jet.dg)
        Pe = np.einsum("niab,na,njb->nij", P, e0, E)
        Q = np.einsum("nc,ncab->nab", e0, jet.dg)
        A = (np.einsum("na,nija->nij", nu, DD)
             + 0.5 * (Pe + np.swapaxes(Pe, 1, 2) - np.einsum("nia,nab,njb->nij", E, Q, E)))
    M = ghat_inv @ A
    H = np.einsum("nii->n", M)
    quad = np.sqrt(det) * (2 * np.pi if imm.kind == "revolution-profile" else 1.0)
    out = NormalData(e0, ghat, A, H, np.einsum("nij,nji->n", M, M), quad)
    if with_potential:
        pot = bg.potential
        if pot is None:
            from .errors import NoPotential
            raise NoPotential(f"background {bg.name!r} has no potential")
        grad = pot.jet(X, t).grad if pot.jet is not None else \
            tensor.scalar_jet_fd(pot.value, X, t, time_domain=bg.time_domain).grad
        out.e0f = np.einsum("na,na->n", e0, grad)
    return out


def geometry(imm: Immersion, t: float, level: str = "full", method: str = "auto",
             potential: Optional[ScalarField] = "background") -> ExtrinsicGeometry:
    """Extrinsic geometry of ``imm`` in the background metric at time ``t``.

    ``level="velocity"`` stops after the normal, A, H and the potential
    (enough to move the nodes); ``"full"`` adds intrinsic derivatives of A and
    H and the adapted-frame ambient curvature.
    """
    bg = imm.background
    X = imm.nodes
    k = imm.dim
    order = 1 if level == "velocity" else 3
    bundle = tensor.curvature(bg, X, t, order=order, method=method)
    g, ginv, gam = bundle.g, bundle.ginv, bundle.christoffel

    E, DD, nu = _frame(imm, X)
    gE = E @ g
    ghat = gE @ np.swapaxes(E, 1, 2)
    det = np.linalg.det(ghat)
    if not np.all(np.isfinite(det)) or np.min(det) <= 1e-14 * np.max(np.abs(det)):
        raise DegenerateTangent("discrete tangent vanishes or metric degenerate on the immersion")
    ghat_inv = np.linalg.inv(ghat)
    nn = np.einsum("na,nab,nb->n", nu, ginv, nu)
    nu = nu / np.sqrt(nn)[:, None]
    e0 = np.einsum("nab,nb->na", ginv, nu)
    # covariant derivative of the tangent frame: D_i E_j + Gamma(E_i, E_j)
    nablaE = DD + np.einsum("nabj,nib->nija", np.einsum("nabc,njc->nabj", gam, E), E)
    A = np.einsum("na,nija->nij", nu, nablaE)
    H = np.einsum("nij,nij->n", ghat_inv, A)
    # surface Christoffels (upper index first), from the tangential part of nablaE
    first = np.einsum("nlb,nijb->nlij", gE, nablaE)
    gam_hat = np.einsum("nml,nlij->nmij", ghat_inv, first)

    if imm.kind == "revolution-profile":
        quad = 2 * np.pi * np.sqrt(det)
    else:
        quad = np.sqrt(det)

    geo = ExtrinsicGeometry(t=t, X=X, E=E, induced=ghat, induced_inv=ghat_inv, normal=e0,
                            conormal=nu, A=A, H=H, christoffel_hat=gam_hat,
                            area_element=quad, bundle=bundle)

    field_ = bg.potential if isinstance(potential, str) else potential
    if field_ is not None:
        if field_.jet is not None and method != "fd":
            fj = field_.jet(X, t)
        else:
            fj = tensor.scalar_jet_fd(field_.value, X, t, time_domain=bg.time_domain)
        geo.fbar = fj.value
        geo.fbar_dt = fj.dt
        geo.ambient_grad_f = fj.grad
        geo.ambient_hess_f = tensor.hessian(bundle, fj)
        geo.grad_fbar = np.einsum("nia,na->ni", E, fj.grad)
        geo.e0f = np.einsum("na,na->n", e0, fj.grad)

    if level == "full":
        _fill_full(imm, geo)
    return geo


def _fill_full(imm: Immersion, geo: ExtrinsicGeometry) -> None:
    b = geo.bundle
    F = np.concatenate([geo.normal[:, None, :], geo.E], axis=1)  # adapted frame
    amb = geo.ambient
    amb["frame"] = F
    amb["riemann"] = np.einsum("npa,nqb,nrc,nsd,nabcd->npqrs", F, F, F, F, b.riemann)
    amb["ricci"] = np.einsum("npa,nqb,nab->npq", F, F, b.ricci)
    amb["scalar"] = b.scalar
    amb["d_riemann"] = np.einsum("nte,npa,nqb,nrc,nsd,neabcd->ntpqrs", F, F, F, F, F,
                                 b.d_riemann)
    amb["d_ricci"] = np.einsum("nte,npa,nqb,neab->ntpq", F, F, F, b.d_ricci)
    amb["d_scalar"] = np.einsum("nte,ne->nt", F, b.d_scalar)

    gam = geo.christoffel_hat
    d = geo.derived
    d["grad_H"] = cov_derivative(imm, geo.H, gam)
    d["hess_H"] = cov_derivative(imm, d["grad_H"], gam)
    d["lap_H"] = np.einsum("nij,nij->n", geo.induced_inv, d["hess_H"])
    d["nabla_A"] = cov_derivative(imm, geo.A, gam)
    d["nabla2_A"] = cov_derivative(imm, d["nabla_A"], gam)
    d["lap_A"] = np.einsum("nkl,nklij->nij", geo.induced_inv, d["nabla2_A"])
    d["ric_0i"] = amb["ricci"][:, 0, 1:]
    d["nabla_ric_0i"] = cov_derivative(imm, d["ric_0i"], gam)
    if geo.fbar is not None:
        d["hess_fbar"] = cov_derivative(imm, geo.grad_fbar, gam)
        d["lap_fbar"] = np.einsum("nij,nij->n", geo.induced_inv, d["hess_fbar"])
        d["nabla_e0f"] = cov_derivative(imm, geo.e0f, gam)


# ----------------------------------------------------------------------------
# intrinsic operators


def surface_gradient(imm: Immersion, phi: np.ndarray, t: float,
                     geo: Optional[ExtrinsicGeometry] = None) -> np.ndarray:
    """Covector components d_i phi of a node field (angular part zero)."""
    if geo is None:
        geo = geometry(imm, t, level="velocity", potential=None)
    return cov_derivative(imm, np.asarray(phi, dtype=float), geo.christoffel_hat)


def surface_laplacian(imm: Immersion, phi: np.ndarray, t: float,
                      geo: Optional[ExtrinsicGeometry] = None) -> np.ndarray:
    if geo is None:
        geo = geometry(imm, t, level="velocity", potential=None)
    grad = surface_gradient(imm, phi, t, geo)
    hess = cov_derivative(imm, grad, geo.christoffel_hat)
    return np.einsum("nij,nij->n", geo.induced_inv, hess)


def integrate(imm: Immersion, geo, values: np.ndarray) -> float:
    """Integral of a node field against dA over a closed immersion."""
    if not imm.closed:
        raise OpenImmersion("integrals need a closed immersion")
    w = geo.area_element * np.asarray(values, dtype=float)
    if imm.kind == "closed-curve":
        return float(np.sum(w) * imm.dsigma)
    return float(spectral.sine_quadrature_weights(imm.N) @ w)


def weighted_area(imm: Immersion, t: float, weight: Optional[ScalarField] = "background",
                  geo: Optional[ExtrinsicGeometry] = None) -> float:
    """Integral of exp(-f) dA; ``weight=None`` gives the plain area."""
    if not imm.closed:
        raise OpenImmersion("weighted area needs a closed immersion")
    if geo is None:
        geo = geometry(imm, t, level="velocity", potential=None)
    field_ = imm.background.potential if isinstance(weight, str) else weight
    f = 0.0 if field_ is None else field_(imm.nodes, t)
    return integrate(imm, geo, np.exp(-f) * np.ones(imm.N))


def enclosed_volume(imm: Immersion) -> float:
    """Chart-coordinate enclosed area (curves) or volume (revolution)."""
    X = imm.nodes
    if imm.kind == "closed-curve":
        X1 = imm.d_param(X)
        return float(0.5 * np.sum(X[:, 0] * X1[:, 1] - X[:, 1] * X1[:, 0]) * imm.dsigma)
    if imm.kind == "revolution-profile":
        X1 = imm.d_param(X, np.array([-1.0, 1.0, 1.0]))
        # pi * integral of rho^2 (-dz); rho^2 z' is odd, so sine quadrature applies
        return float(-np.pi * spectral.sine_quadrature_weights(imm.N) @ (X[:, 0] ** 2 * X1[:, 2]))
    raise OpenImmersion("enclosed volume needs a closed immersion")


# ----------------------------------------------------------------------------
# identities on a single slice


def _tangential(T: np.ndarray, r: int) -> np.ndarray:
    """Drop the normal slot from adapted-frame indices (first r slots after node axis)."""
    sl = (slice(None),) + (slice(1, None),) * r
    return T[sl]


def restriction_identities(imm: Immersion, t: float, field_: Optional[ScalarField] = None,
                           geo: Optional[ExtrinsicGeometry] = None) -> dict[str, float]:
    """Max residuals of the tangential and mixed Hessian restriction identities.

    tangential: Hess f(E_i, E_j) = hat-Hess f_ij - A_ij e0 f
    mixed:      Hess f(E_i, e0)  = d_i (e0 f) + A_i^k d_k f
    """
    if geo is None or field_ is not None:
        geo = geometry(imm, t, level="full",
                       potential=field_ if field_ is not None else "background")
    if geo.fbar is None:
        from .errors import NoPotential
        raise NoPotential("restriction identities need a scalar field")
    Hf = geo.ambient_hess_f
    lhs_t = np.einsum("nia,nab,njb->nij", geo.E, Hf, geo.E)
    rhs_t = geo.derived["hess_fbar"] - geo.A * geo.e0f[:, None, None]
    lhs_m = np.einsum("nia,nab,nb->ni", geo.E, Hf, geo.normal)
    # A_i^k d_k f with A_i^k = g^{kl} A_il
    rhs_m = geo.derived["nabla_e0f"] + np.einsum("nkl,nil,nk->ni", geo.induced_inv, geo.A,
                                                 geo.grad_fbar)
    return {"tangential": float(np.max(np.abs(lhs_t - rhs_t))),
            "mixed": float(np.max(np.abs(lhs_m - rhs_m)))}


def codazzi_residuals(imm: Immersion, t: float,
                      geo: Optional[ExtrinsicGeometry] = None) -> tuple[float, float]:
    """Max residuals of the Codazzi equation and of its traced form.

    full:   R_0ijk = nabla_j A_ik - nabla_k A_ij
    traced: R_0j   = nabla_j H - nabla_i A^i_j
    """
    if geo is None:
        geo = geometry(imm, t, level="full", potential=None)
    R = geo.ambient["riemann"][:, 0, 1:, 1:, 1:]
    nA = geo.derived["nabla_A"]  # nA[n, l, i, j] = nabla_l A_ij
    rhs = np.einsum("njik->nijk", nA) - np.einsum("nkij->nijk", nA)
    r_full = float(np.max(np.abs(R - rhs))) if imm.dim > 1 else 0.0
    div_A = np.einsum("nil,nilj->nj", geo.induced_inv, nA)
    r_tr = geo.derived["grad_H"] - div_A - geo.derived["ric_0i"]
    return r_full, float(np.max(np.abs(r_tr)))


def simons_rhs(geo: ExtrinsicGeometry) -> np.ndarray:
    """Right side of the Simons-type identity for hat-Hess H (per node, k x k)."""
    gi = geo.induced_inv
    A = geo.A
    Am = np.einsum("nkl,nli->nki", gi, A)                 # A^k_i
    Au = np.einsum("nik,njl,nkl->nij", gi, gi, A)         # A^{kl}
    amb = geo.ambient
    Rf = amb["riemann"]
    R0k0j = Rf[:, 0, 1:, 0, 1:]
    Rkilj = Rf[:, 1:, 1:, 1:, 1:]
    Ric = amb["ricci"]
    d = geo.derived
    nR = d["nabla_ric_0i"]                                # nabla_i R_j0
    out = (d["lap_A"] + nR + np.swapaxes(nR, 1, 2)
           - amb["d_ricci"][:, 0, 1:, 1:]
           + np.einsum("nki,nkj->nij", Am, R0k0j) + np.einsum("nkj,nki->nij", Am, R0k0j)
           - A * Ric[:, 0, 0][:, None, None]
           + 2 * np.einsum("nkl,nkilj->nij", Au, Rkilj)
           - geo.H[:, None, None] * R0k0j
           - geo.H[:, None, None] * np.einsum("nki,njk->nij", Am, A)
           + geo.A_norm_sq[:, None, None] * A
           + amb["d_riemann"][:, 0, 0, 1:, 0, 1:])
    return out


def simons_residuals(imm: Immersion, t: float,
                     geo: Optional[ExtrinsicGeometry] = None) -> tuple[float, float]:
    """Max residual of the Simons-type identity and of its trace."""
    if geo is None:
        geo = geometry(imm, t, level="full", potential=None)
    diff = geo.derived["hess_H"] - simons_rhs(geo)
    tr = np.einsum("nij,nij->n", geo.induced_inv, diff)
    return float(np.max(np.abs(diff))), float(np.max(np.abs(tr)))


def dA_dt_rhs(geo: ExtrinsicGeometry) -> np.ndarray:
    """Right side of the evolution of A_ij under mean curvature flow."""
    gi = geo.induced_inv
    A = geo.A
    Am = np.einsum("nkl,nli->nki", gi, A)
    Au = np.einsum("nik,njl,nkl->nij", gi, gi, A)
    Rf = geo.ambient["riemann"]
    Rt = Rf[:, 1:, 1:, 1:, 1:]
    ric_t = np.einsum("nlm,nmklj->nkj", gi, Rt)           # R^l_{klj}, tangential trace
    return (geo.derived["lap_A"]
            - np.einsum("nki,nkj->nij", Am, ric_t) - np.einsum("nkj,nki->nij", Am, ric_t)
            + 2 * np.einsum("nkl,nkilj->nij", Au, Rt)
            - 2 * geo.H[:, None, None] * np.einsum("nki,njk->nij", Am, A)
            + geo.A_norm_sq[:, None, None] * A
            + geo.ambient["d_riemann"][:, 0, 0, 1:, 0, 1:])


def dH_dt_rhs(geo: ExtrinsicGeometry) -> np.ndarray:
    """Right side of the evolution of H under mean curvature flow."""
    Au = np.einsum("nik,njl,nkl->nij", geo.induced_inv, geo.induced_inv, geo.A)
    Ric = geo.ambient["ricci"]
    return (geo.derived["lap_H"] + 2 * np.einsum("nij,nij->n", Au, Ric[:, 1:, 1:])
            + geo.A_norm_sq * geo.H + geo.ambient["d_ricci"][:, 0, 0, 0])


def dg_dt_rhs(geo: ExtrinsicGeometry) -> np.ndarray:
    return -2 * geo.ambient["ricci"][:, 1:, 1:] - 2 * geo.H[:, None, None] * geo.A


def dump_nodes(imm: Immersion, geo: ExtrinsicGeometry, path) -> None:
    """Write sigma, coordinates, H, A components and fbar as CSV."""
    k = imm.dim
    comps = [(i, j) for i in range(k) for j in range(i, k)]
    header = (["sigma"] + [f"x{a}" for a in range(imm.nodes.shape[1])] + ["H"]
              + [f"A{i}{j}" for i, j in comps] + ["fbar"])
    fbar = geo.fbar if geo.fbar is not None else np.full(imm.N, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(imm.N):
            row = [imm.sigma[n], *imm.nodes[n], geo.H[n], *[geo.A[n, i, j] for i, j in comps],
                   fbar[n]]
            w.writerow([repr(float(v)) for v in row])
