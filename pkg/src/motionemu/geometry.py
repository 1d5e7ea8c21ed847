"""Riemannian primitives on the unit sphere and on products of spheres.

A posture is an array of shape (n-1, 3) whose rows are unit vectors, one
per bone of a skeleton with n landmarks.  The posture space is the product
of n-1 copies of the 2-sphere; all product-manifold operations act
bone-wise.  Distances between postures add the per-bone geodesic angles,
while tangent vectors carry the Euclidean (L2) norm of their stacked
coordinates, which is what transport, flattening and PCA use.

All sphere functions broadcast over leading axes, so a whole sequence of
postures (shape (T, n-1, 3)) can be pushed through one call.
"""

import numpy as np

from .errors import AntipodalPoints, DimensionMismatch, NoConvergence, NotTangent

# Angles or tangent norms below this are treated as exactly zero.
EPS_ZERO = 1e-12
# Dot products at or below -1 + this margin count as antipodal.
ANTIPODAL_MARGIN = 1e-9
# Maximum tolerated component of a "tangent" vector along its base point.
TANGENCY_TOL = 1e-8


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def sphere_dist(y, z):
    """Geodesic distance between unit vectors.

    Parameters
    ----------
    y, z : ndarray, shape (..., 3)
        Unit vectors; the operation broadcasts over leading axes.

    Returns
    -------
    ndarray, shape (...)
        Arc length in [0, pi].  Bitwise-equal points give exactly zero;
        arccos alone would report ~1e-8 there whenever the squared norm
        rounds below one.
    """
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    angle = np.arccos(np.clip(_dot(y, z), -1.0, 1.0))
    return np.where(np.all(y == z, axis=-1), 0.0, angle)


def sphere_log(y, z):
    """Inverse exponential map: the tangent vector at y pointing to z.

    Returns the zero vector when the two points coincide to within
    EPS_ZERO, and raises AntipodalPoints when they are (numerically)
    antipodal, since the minimizing geodesic is then not unique.
    """
    dot = np.clip(_dot(y, z), -1.0, 1.0)
    if np.any(dot <= -1.0 + ANTIPODAL_MARGIN):
        raise AntipodalPoints("log map undefined for antipodal points")
    theta = np.arccos(dot)
    perp = z - dot[..., None] * y
    # normalize by the perpendicular norm rather than sin(arccos(dot)),
    # which loses ~1e-10 to cancellation close to the antipodal margin;
    # a norm below EPS_ZERO is rounding noise from coincident points and
    # must not be rescaled to theta
    norm = np.linalg.norm(perp, axis=-1)
    small = norm < EPS_ZERO
    safe = np.where(small, 1.0, norm)
    scale = np.where(small, 0.0, theta / safe)
    return scale[..., None] * perp


def sphere_exp(y, v):
    """Exponential map: follow the geodesic from y with initial velocity v.

    Parameters
    ----------
    y : ndarray, shape (..., 3)
        Base points (unit vectors).
    v : ndarray, shape (..., 3)
        Tangent vectors at y.  A component along y larger than
        TANGENCY_TOL raises NotTangent.

    Returns
    -------
    ndarray, shape (..., 3)
        Unit vectors at geodesic distance ||v|| from y.
    """
    y = np.broadcast_arrays(y, v)[0]
    radial = _dot(y, v)
    if np.any(np.abs(radial) > TANGENCY_TOL):
        raise NotTangent("vector has a radial component at its base point")
    norm = np.linalg.norm(v, axis=-1)
    small = norm < EPS_ZERO
    safe = np.where(small, 1.0, norm)
    out = np.cos(norm)[..., None] * y + (np.sin(norm) / safe)[..., None] * v
    return np.where(small[..., None], y, out)


def sphere_transport(y, z, u):
    """Parallel transport of u along the minimizing geodesic from y to z.

    Uses the closed reflection form, which is an isometry of tangent
    spaces; the result is re-projected onto the tangent space at z to
    scrub floating-point drift.  Transporting from a point to itself is
    the identity.
    """
    dot = _dot(y, z)
    if np.any(dot <= -1.0 + ANTIPODAL_MARGIN):
        raise AntipodalPoints("transport undefined for antipodal points")
    w = y + z
    coef = 2.0 * _dot(u, z) / _dot(w, w)
    out = u - coef[..., None] * w
    return out - _dot(out, z)[..., None] * z


def _check_posture_pair(a, b):
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionMismatch(f"posture shapes differ: {a.shape} vs {b.shape}") from None
    if len(shape) < 2 or shape[-1] != 3:
        raise DimensionMismatch(f"not posture-shaped: {a.shape} vs {b.shape}")


def posture_dist(a, b):
    """Distance between postures: the sum of per-bone geodesic angles."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_posture_pair(a, b)
    return np.sum(sphere_dist(a, b), axis=-1)


def posture_log(a, b):
    """Bone-wise inverse exponential map between postures."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _check_posture_pair(a, b)
    return sphere_log(a, b)


def posture_exp(a, v):
    """Bone-wise exponential map from posture a along tangent field v."""
    a, v = np.asarray(a, dtype=float), np.asarray(v, dtype=float)
    _check_posture_pair(a, v)
    return sphere_exp(a, v)


def posture_transport(a, b, v):
    """Bone-wise parallel transport of a tangent field from a to b."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_posture_pair(a, b)
    return sphere_transport(a, b, v)


def tangent_norm(v):
    """Euclidean norm of a stacked tangent field, shape (..., n-1, 3)."""
    return np.sqrt(np.sum(v * v, axis=(-2, -1)))


def tangent_frame(base):
    """Deterministic orthonormal basis of the tangent plane at each bone.

    For every unit vector the two frame vectors come from Gram-Schmidt of
    the global coordinate axes against it: the axes are visited in order
    of increasing |dot| with the bone direction (ties broken by axis
    index) and the first two with a non-negligible residual are kept.

    Parameters
    ----------
    base : ndarray, shape (..., 3)

    Returns
    -------
    (b1, b2) : pair of ndarray, shape (..., 3)
    """
    base = np.asarray(base, dtype=float)
    absdot = np.abs(base)
    order = np.argsort(absdot, axis=-1, kind="stable")
    eye = np.eye(3)
    ax0 = eye[order[..., 0]]
    ax1 = eye[order[..., 1]]
    ax2 = eye[order[..., 2]]

    b1 = ax0 - _dot(ax0, base)[..., None] * base
    b1 = b1 / np.linalg.norm(b1, axis=-1, keepdims=True)

    def residual(ax):
        r = ax - _dot(ax, base)[..., None] * base - _dot(ax, b1)[..., None] * b1
        return r, np.linalg.norm(r, axis=-1)

    r1, n1 = residual(ax1)
    r2, _ = residual(ax2)
    use_next = n1 < 1e-6
    b2 = np.where(use_next[..., None], r2, r1)
    b2 = b2 / np.linalg.norm(b2, axis=-1, keepdims=True)
    return b1, b2


def tangent_coords(base, v):
    """Coordinates of tangent fields in the deterministic frame at base.

    Parameters
    ----------
    base : ndarray, shape (..., n-1, 3)
        Posture(s) whose tangent space the fields live in.
    v : ndarray, shape (..., n-1, 3)
        Tangent fields at base (leading axes broadcast).

    Returns
    -------
    ndarray, shape (..., 2*(n-1))
        Per-bone coordinate pairs, interleaved bone by bone.  The map is
        a linear isometry: Euclidean norms of coordinates equal tangent
        field norms.
    """
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float)
    if base.shape[-2:] != v.shape[-2:]:
        raise DimensionMismatch(f"tangent shape {v.shape} does not match base {base.shape}")
    lead = np.broadcast_shapes(base.shape[:-2], v.shape[:-2])
    b1, b2 = tangent_frame(base)
    c = np.stack([_dot(v, b1), _dot(v, b2)], axis=-1)
    c = np.broadcast_to(c, lead + c.shape[-2:])
    return c.reshape(lead + (2 * base.shape[-2],))


def coords_to_tangent(base, coords):
    """Inverse of tangent_coords: rebuild tangent fields from coordinates."""
    base = np.asarray(base, dtype=float)
    coords = np.asarray(coords, dtype=float)
    k = base.shape[-2]
    if coords.shape[-1] != 2 * k:
        raise DimensionMismatch(f"expected {2 * k} coordinates, got {coords.shape[-1]}")
    b1, b2 = tangent_frame(base)
    c = coords.reshape(coords.shape[:-1] + (k, 2))
    return c[..., 0, None] * b1 + c[..., 1, None] * b2


def karcher_mean(postures, tol=1e-9, max_iter=200):
    """Intrinsic mean of a set of postures by Riemannian gradient descent.

    Starts from the bone-wise normalized extrinsic mean and repeatedly
    shoots along the mean tangent vector (unit step) until the gradient
    norm drops below tol.

    Parameters
    ----------
    postures : ndarray, shape (M, n-1, 3)
    tol : float
        Convergence threshold on the norm of the mean log.
    max_iter : int
        Iteration budget; NoConvergence carries the last residual.

    Returns
    -------
    ndarray, shape (n-1, 3)
    """
    postures = np.asarray(postures, dtype=float)
    if postures.ndim != 3 or postures.shape[-1] != 3:
        raise DimensionMismatch(f"expected (M, n-1, 3), got {postures.shape}")
    chordal = postures.mean(axis=0)
    norms = np.linalg.norm(chordal, axis=-1, keepdims=True)
    # Renormalizing a row that is already unit length must not perturb it,
    # so the mean of identical postures is that posture bitwise.
    norms = np.where(np.abs(norms - 1.0) <= 4 * np.finfo(float).eps, 1.0, norms)
    # A collapsed extrinsic mean gives no usable direction; start from a sample.
    degenerate = norms[..., 0] < EPS_ZERO
    mu = np.where(degenerate[..., None], postures[0], chordal / np.where(norms < EPS_ZERO, 1.0, norms))
    residual = np.inf
    for _ in range(max_iter):
        grad = sphere_log(mu, postures).mean(axis=0)
        residual = tangent_norm(grad)
        if residual < tol:
            return mu
        mu = sphere_exp(mu, grad)
    raise NoConvergence("intrinsic mean did not converge", residual=float(residual))


def sequence_dist(a, b):
    """Mean posture distance between two sequences on a shared time grid."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"sequence shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(posture_dist(a, b)))
