"""Generative models over reduced motion representations.

Coefficient models treat the (d1, d2) coefficient matrix of each training
sequence as one draw of a zero-mean Gaussian vector: either with a full
covariance (MVG) or independent per-coefficient variances (IG).  A vector
autoregression models the spatial score rows directly as a lagged linear
system.  The posture-wise independent model (PWI) skips flattening
altogether: it keeps a per-frame intrinsic mean and tangent covariance
and samples every frame independently.

An EmulatorBundle packages one fitted route end to end (reference
posture, reduction stages, model, start-posture policy) so new sequences
can be simulated, and persisted, from a single object.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dimred, flatten
from . import geometry as geo
from .dimred import FPCABasis, SpatialPCA
from .errors import (BadTarget, DimensionMismatch, InsufficientData, KindMismatch,
                     SingularCovariance)
from .flatten import FlatField

# Relative diagonal jitter applied to covariances before factorization.
JITTER_SCALE = 1e-10

START_POLICIES = ("training-mean", "fixed", "sampled-from-training")


def _vec(a):
    return np.asarray(a, dtype=float).ravel()


@dataclass
class MVGModel:
    """Zero-mean Gaussian over vectorized (row-major) coefficient matrices."""

    covariance: np.ndarray
    jitter: float
    shape: tuple

    @property
    def dim(self) -> int:
        return int(self.covariance.shape[0])


@dataclass
class IGModel:
    """Independent zero-mean Gaussians, one variance per coefficient."""

    variances: np.ndarray
    jitter: float
    shape: tuple

    @property
    def dim(self) -> int:
        return int(self.variances.shape[0])


def fit_mvg(coeffs) -> MVGModel:
    """Sample covariance of vectorized coefficients about zero mean
    (denominator M-1), plus a relative jitter used only when sampling."""
    if len(coeffs) < 2:
        raise InsufficientData("need at least two coefficient matrices")
    shape = np.asarray(coeffs[0]).shape
    for a in coeffs:
        if np.asarray(a).shape != shape:
            raise DimensionMismatch("coefficient matrices must share their shape")
    v = np.stack([_vec(a) for a in coeffs])
    cov = v.T @ v / (len(coeffs) - 1)
    cov = (cov + cov.T) / 2.0
    d = cov.shape[0]
    return MVGModel(covariance=cov, jitter=JITTER_SCALE * float(np.trace(cov)) / d, shape=tuple(shape))


def fit_ig(coeffs) -> IGModel:
    """Diagonal of the MVG fit: per-coefficient variances."""
    full = fit_mvg(coeffs)
    return IGModel(variances=np.diag(full.covariance).copy(), jitter=full.jitter,
                   shape=full.shape)


def _gaussian_factor(cov):
    """Symmetric factor F with F F^T = cov (eigenvalues clamped at zero)."""
    w, q = np.linalg.eigh((cov + cov.T) / 2.0)
    return q * np.sqrt(np.clip(w, 0.0, None))


def sample_coeffs(model, count: int, seed=None):
    """Draw coefficient matrices from a fitted MVG or IG model.

    Deterministic for a given seed; the jitter recorded on the model is
    added to the covariance diagonal before factorization.
    """
    rng = np.random.default_rng(seed)
    if count < 0:
        raise BadTarget("count must be nonnegative")
    z = rng.standard_normal((count, _model_dim(model)))
    if isinstance(model, MVGModel):
        factor = _gaussian_factor(model.covariance + model.jitter * np.eye(model.dim))
        draws = z @ factor.T
    elif isinstance(model, IGModel):
        draws = z * np.sqrt(model.variances + model.jitter)
    else:
        raise KindMismatch(f"cannot sample coefficients from {type(model).__name__}")
    return [d.reshape(model.shape) for d in draws]


def _model_dim(model):
    return model.dim


def loglik(coeff, model) -> float:
    """Gaussian log-density of one coefficient matrix under the model.

    Uses the raw fitted covariance (no jitter); a covariance that cannot
    be factorized raises SingularCovariance.
    """
    x = _vec(coeff)
    if isinstance(model, IGModel):
        if x.shape[0] != model.dim:
            raise DimensionMismatch("coefficient size does not match the model")
        if np.any(model.variances <= 0.0):
            raise SingularCovariance("a coefficient variance is zero")
        quad = float(np.sum(x * x / model.variances))
        logdet = float(np.sum(np.log(model.variances)))
    elif isinstance(model, MVGModel):
        if x.shape[0] != model.dim:
            raise DimensionMismatch("coefficient size does not match the model")
        try:
            chol = np.linalg.cholesky(model.covariance)
        except np.linalg.LinAlgError:
            raise SingularCovariance("covariance is not positive definite") from None
        y = np.linalg.solve(chol, x)
        quad = float(y @ y)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    else:
        raise KindMismatch(f"no density for {type(model).__name__}")
    d = x.shape[0]
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)


@dataclass
class VARModel:
    """Vector autoregression of order p on spatial score rows: scores(t) =
    intercept + sum_i coef[i] @ scores(t-i) + noise."""

    order: int
    coef: np.ndarray        # (p, d1, d1)
    intercept: np.ndarray   # (d1,)
    noise_cov: np.ndarray   # (d1, d1)

    @property
    def dim(self) -> int:
        return int(self.intercept.shape[0])


def fit_var(scores, order: int = 4) -> VARModel:
    """Least-squares fit of a VAR(p) to one score matrix (d1, L) or a
    list of them (regressions pooled across sequences).

    Rank-deficient designs (for example a constant series, whose lags are
    collinear with the intercept) fall back to the minimum-norm solution.
    """
    if order < 1:
        raise BadTarget("order must be at least 1")
    matrices = [np.asarray(scores, dtype=float)] if not isinstance(scores, (list, tuple)) \
        else [np.asarray(s, dtype=float) for s in scores]
    d1 = matrices[0].shape[0]
    xs, ys = [], []
    for h in matrices:
        if h.ndim != 2 or h.shape[0] != d1:
            raise DimensionMismatch("score matrices must share their row count")
        length = h.shape[1]
        if length <= d1 * order + 1:
            raise InsufficientData(f"series length {length} too short for order {order}")
        cols = [np.ones(length - order)]
        for lag in range(1, order + 1):
            cols.append(h[:, order - lag:length - lag].T)
        xs.append(np.column_stack(cols))
        ys.append(h[:, order:].T)
    x = np.concatenate(xs, axis=0)
    y = np.concatenate(ys, axis=0)
    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    dof = max(x.shape[0] - x.shape[1], 1)
    noise = resid.T @ resid / dof
    coef = np.stack([beta[1 + i * d1: 1 + (i + 1) * d1, :].T for i in range(order)])
    return VARModel(order=order, coef=coef, intercept=beta[0, :].copy(),
                    noise_cov=(noise + noise.T) / 2.0)


def simulate_var(model: VARModel, length: int, init, seed=None):
    """Iterate the fitted recursion from observed initial lags.

    init has shape (d1, p): the first p columns of the output.  Noise is
    drawn from the fitted residual covariance; a zero covariance gives a
    deterministic trajectory.
    """
    init = np.asarray(init, dtype=float)
    p = model.order
    if init.shape != (model.dim, p):
        raise DimensionMismatch(f"init must be ({model.dim}, {p}), got {init.shape}")
    if length < p:
        raise BadTarget(f"length {length} shorter than the order {p}")
    rng = np.random.default_rng(seed)
    factor = _gaussian_factor(model.noise_cov)
    out = np.empty((model.dim, length))
    out[:, :p] = init
    for t in range(p, length):
        acc = model.intercept.copy()
        for i in range(1, p + 1):
            acc += model.coef[i - 1] @ out[:, t - i]
        out[:, t] = acc + factor @ rng.standard_normal(model.dim)
    return out


@dataclass
class PWIModel:
    """Per-frame intrinsic means with tangent-space covariances; frames
    are treated as independent."""

    means: np.ndarray       # (T, n-1, 3)
    covariances: np.ndarray  # (T, D, D) with D = 2*(n-1)
    diagonal: bool
    _factors: np.ndarray | None = dc_field(default=None, repr=False, compare=False)

    @property
    def length(self) -> int:
        return int(self.means.shape[0])


def fit_pwi(seqs, diagonal: bool = False) -> PWIModel:
    """Fit the posture-wise model: per frame, the intrinsic mean of the
    training postures and the covariance of their log coordinates
    (denominator M-1).  diagonal=True keeps only per-coordinate variances."""
    stack = np.stack([np.asarray(s, dtype=float) for s in seqs])
    m, t = stack.shape[0], stack.shape[1]
    if m < 2:
        raise InsufficientData("need at least two sequences")
    dim = 2 * stack.shape[2]
    means = np.empty((t, stack.shape[2], 3))
    covs = np.empty((t, dim, dim))
    for k in range(t):
        mu = geo.karcher_mean(stack[:, k])
        coords = geo.tangent_coords(mu, geo.sphere_log(mu, stack[:, k]))
        cov = coords.T @ coords / (m - 1)
        if diagonal:
            cov = np.diag(np.diag(cov))
        means[k] = mu
        covs[k] = (cov + cov.T) / 2.0
    return PWIModel(means=means, covariances=covs, diagonal=diagonal)


def sample_pwi(model: PWIModel, seed=None):
    """Draw one sequence: every frame is the exponential of independent
    zero-mean tangent noise at that frame's mean posture."""
    rng = np.random.default_rng(seed)
    if model._factors is None:
        model._factors = np.stack([_gaussian_factor(c) for c in model.covariances])
    t = model.length
    dim = model.covariances.shape[1]
    z = rng.standard_normal((t, dim))
    coords = np.einsum("tij,tj->ti", model._factors, z)
    vecs = np.stack([geo.coords_to_tangent(model.means[k], coords[k]) for k in range(t)])
    return geo.sphere_exp(model.means, vecs)


MODEL_TYPES = ("mvg", "ig", "var", "pwi")


@dataclass
class EmulatorBundle:
    """One fitted emulation route, ready to simulate new sequences.

    kind is the flattening ('istvf' or 'siem') for coefficient and VAR
    models, or 'intrinsic' for the posture-wise route.  start_postures
    backs the start policy for velocity flattenings: the training-mean
    policy stores the intrinsic mean of the training starts, the other
    policies store the training starts themselves.
    """

    kind: str
    model_type: str
    model: object
    length: int
    reference: np.ndarray | None = None
    spatial: SpatialPCA | None = None
    fpca: FPCABasis | None = None
    start_policy: str = "training-mean"
    start_postures: np.ndarray | None = None
    var_init: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)


def fit_emulator(seqs, kind: str = "istvf", model_type: str = "ig",
                 d1=None, d2=None, var1: float = 0.9, var2: float = 0.95,
                 reference=None, order: int = 4, var_index: int = 0,
                 start_policy: str = "training-mean", diagonal: bool = False) -> EmulatorBundle:
    """Fit a full emulation route on training sequences.

    Sequences are flattened at the reference posture (default: intrinsic
    mean of all training frames pooled), reduced by spatial then
    functional PCA (explicit d1/d2 or variance thresholds var1/var2), and
    capped per model_type:

    * 'mvg' / 'ig': Gaussian on the coefficient matrices.
    * 'var': autoregression of the spatial scores of one training
      sequence (var_index), simulated from its observed initial lags.
    * 'pwi': posture-wise intrinsic model; no flattening involved.
    """
    seqs = [np.asarray(s, dtype=float) for s in seqs]
    if not seqs:
        raise InsufficientData("no training sequences")
    t = seqs[0].shape[0]
    for s in seqs:
        if s.shape != seqs[0].shape:
            raise DimensionMismatch("training sequences must share their shape")
    if model_type not in MODEL_TYPES:
        raise KindMismatch(f"unknown model type {model_type!r}")
    if start_policy not in START_POLICIES:
        raise BadTarget(f"unknown start policy {start_policy!r}")

    if model_type == "pwi":
        model = fit_pwi(seqs, diagonal=diagonal)
        return EmulatorBundle(kind="intrinsic", model_type="pwi", model=model, length=t,
                              meta={"count": len(seqs)})

    if kind not in ("istvf", "siem"):
        raise KindMismatch(f"flattening kind {kind!r} cannot back an emulator")
    if reference is None:
        reference = geo.karcher_mean(np.concatenate(seqs, axis=0))
    reference = np.asarray(reference, dtype=float)
    fields = [flatten.flatten_sequence(s, reference, kind) for s in seqs]
    spatial = dimred.spatial_pca_fit(fields, n_components=d1, var_threshold=var1)
    scores = [dimred.spatial_project(f, spatial) for f in fields]

    starts = np.stack([s[0] for s in seqs])
    if start_policy == "training-mean":
        start_postures = geo.karcher_mean(starts)[None]
    else:
        start_postures = starts

    if model_type == "var":
        if not 0 <= var_index < len(seqs):
            raise BadTarget(f"var_index {var_index} out of range")
        model = fit_var(scores[var_index], order=order)
        return EmulatorBundle(kind=kind, model_type="var", model=model, length=t,
                              reference=reference, spatial=spatial,
                              start_policy=start_policy, start_postures=start_postures,
                              var_init=scores[var_index][:, :order].copy(),
                              meta={"count": len(seqs), "var_index": var_index})

    fbasis = dimred.fpca_fit(scores, dt=fields[0].dt, n_components=d2, var_threshold=var2)
    coeffs = [dimred.fpca_project(h, fbasis) for h in scores]
    model = fit_mvg(coeffs) if model_type == "mvg" else fit_ig(coeffs)
    return EmulatorBundle(kind=kind, model_type=model_type, model=model, length=t,
                          reference=reference, spatial=spatial, fpca=fbasis,
                          start_policy=start_policy, start_postures=start_postures,
                          meta={"count": len(seqs)})


def _template_field(bundle: EmulatorBundle, start) -> FlatField:
    cols = bundle.length - 1 if bundle.kind in flatten.VELOCITY_KINDS else bundle.length
    return FlatField(bundle.kind, bundle.reference, start,
                     np.zeros((bundle.reference.shape[0] * 2, cols)),
                     1.0 / (bundle.length - 1))


def _pick_start(bundle: EmulatorBundle, rng):
    if bundle.start_policy == "sampled-from-training":
        return bundle.start_postures[rng.integers(bundle.start_postures.shape[0])]
    return bundle.start_postures[0]


def _decode(bundle: EmulatorBundle, values, start):
    template = _template_field(bundle, start)
    field = FlatField(template.kind, template.reference, template.start, values, template.dt)
    return flatten.unflatten_field(field)


def simulate_sequence(bundle: EmulatorBundle, count: int, seed=None):
    """Simulate new sequences from a fitted bundle.

    Returns a list of count posture sequences.  All randomness flows from
    the seed; coefficient models run sample -> functional rebuild ->
    spatial rebuild -> unflatten, the VAR iterates its recursion, and the
    posture-wise model samples frames independently.
    """
    if count < 0:
        raise BadTarget("count must be nonnegative")
    rng = np.random.default_rng(seed)
    out = []
    if bundle.model_type == "pwi":
        for _ in range(count):
            out.append(sample_pwi(bundle.model, rng))
        return out
    if bundle.model_type == "var":
        for _ in range(count):
            template = _template_field(bundle, _pick_start(bundle, rng))
            scores = simulate_var(bundle.model, template.values.shape[1], bundle.var_init, rng)
            field = dimred.spatial_reconstruct(scores, bundle.spatial, template)
            out.append(flatten.unflatten_field(field))
        return out
    for coeff in sample_coeffs(bundle.model, count, rng):
        scores = dimred.fpca_reconstruct(coeff, bundle.fpca)
        field = dimred.spatial_reconstruct(scores, bundle.spatial,
                                           _template_field(bundle, _pick_start(bundle, rng)))
        out.append(flatten.unflatten_field(field))
    return out


def sequence_loglik(bundle: EmulatorBundle, seq) -> float:
    """Log-likelihood of a sequence under a coefficient-model bundle:
    flatten, project through both reductions, evaluate the Gaussian."""
    if bundle.model_type not in ("mvg", "ig"):
        raise KindMismatch("log-likelihood needs a coefficient-model bundle")
    field = flatten.flatten_sequence(np.asarray(seq, dtype=float), bundle.reference, bundle.kind)
    scores = dimred.spatial_project(field, bundle.spatial)
    coeff = dimred.fpca_project(scores, bundle.fpca)
    return loglik(coeff, bundle.model)
