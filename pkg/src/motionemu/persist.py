"""Serialization of fitted objects to tagged text documents.

Documents are versioned; readers reject unknown types.  Arrays with more
than two axes are stored flattened to matrices next to the integers
needed to reshape them.
"""

import json

import numpy as np

from .dimred import FPCABasis, MPCAModel, SpatialPCA
from .errors import DimensionMismatch, KindMismatch
from .io import read_doc, write_doc
from .models import EmulatorBundle, IGModel, MVGModel, PWIModel, VARModel

BUNDLE_DOC = "emulator-bundle"
REDUCTION_DOC = "reduction"
VERSION = 1


def _spatial_items(prefix, pca: SpatialPCA):
    return [(f"{prefix}.mean", pca.mean),
            (f"{prefix}.basis", pca.basis if pca.basis.size else np.zeros((pca.mean.shape[0], 0))),
            (f"{prefix}.eigenvalues", pca.eigenvalues),
            (f"{prefix}.total_variance", float(pca.total_variance))]


def _spatial_from(doc, prefix):
    basis = doc[f"{prefix}.basis"]
    return SpatialPCA(mean=doc[f"{prefix}.mean"], basis=basis,
                      eigenvalues=doc[f"{prefix}.eigenvalues"],
                      total_variance=doc[f"{prefix}.total_variance"])


def _fpca_items(prefix, basis: FPCABasis):
    d1, d2 = basis.dims
    items = [(f"{prefix}.means", basis.means),
             (f"{prefix}.eigenvalues", basis.eigenvalues),
             (f"{prefix}.dt", float(basis.dt)),
             (f"{prefix}.rows", d1)]
    for i in range(d1):
        items.append((f"{prefix}.basis.{i}", basis.bases[i]))
    return items


def _fpca_from(doc, prefix):
    d1 = doc[f"{prefix}.rows"]
    bases = np.stack([doc[f"{prefix}.basis.{i}"] for i in range(d1)])
    return FPCABasis(means=doc[f"{prefix}.means"], bases=bases,
                     eigenvalues=doc[f"{prefix}.eigenvalues"], dt=doc[f"{prefix}.dt"])


def _model_items(model):
    if isinstance(model, MVGModel):
        return [("model.family", "mvg"), ("model.covariance", model.covariance),
                ("model.jitter", model.jitter),
                ("model.rows", model.shape[0]), ("model.cols", model.shape[1])]
    if isinstance(model, IGModel):
        return [("model.family", "ig"), ("model.variances", model.variances),
                ("model.jitter", model.jitter),
                ("model.rows", model.shape[0]), ("model.cols", model.shape[1])]
    if isinstance(model, VARModel):
        items = [("model.family", "var"), ("model.order", model.order),
                 ("model.intercept", model.intercept), ("model.noise_cov", model.noise_cov)]
        for i in range(model.order):
            items.append((f"model.coef.{i}", model.coef[i]))
        return items
    if isinstance(model, PWIModel):
        t, k, _ = model.means.shape
        d = model.covariances.shape[1]
        return [("model.family", "pwi"), ("model.frames", t), ("model.bones", k),
                ("model.diagonal", int(model.diagonal)),
                ("model.means", model.means.reshape(t * k, 3)),
                ("model.covariances", model.covariances.reshape(t * d, d))]
    raise KindMismatch(f"cannot serialize model {type(model).__name__}")


def _model_from(doc):
    family = doc["model.family"]
    if family == "mvg":
        return MVGModel(covariance=doc["model.covariance"], jitter=doc["model.jitter"],
                        shape=(doc["model.rows"], doc["model.cols"]))
    if family == "ig":
        return IGModel(variances=doc["model.variances"], jitter=doc["model.jitter"],
                       shape=(doc["model.rows"], doc["model.cols"]))
    if family == "var":
        order = doc["model.order"]
        coef = np.stack([doc[f"model.coef.{i}"] for i in range(order)])
        return VARModel(order=order, coef=coef, intercept=doc["model.intercept"],
                        noise_cov=doc["model.noise_cov"])
    if family == "pwi":
        t, k = doc["model.frames"], doc["model.bones"]
        means = doc["model.means"].reshape(t, k, 3)
        d = 2 * k
        covs = doc["model.covariances"].reshape(t, d, d)
        return PWIModel(means=means, covariances=covs, diagonal=bool(doc["model.diagonal"]))
    raise KindMismatch(f"unknown model family {family!r}")


def save_bundle(path, bundle: EmulatorBundle):
    items = [("kind", bundle.kind), ("model_type", bundle.model_type),
             ("length", bundle.length), ("start_policy", bundle.start_policy),
             ("meta", json.dumps(bundle.meta, sort_keys=True))]
    items.append(("reference", bundle.reference))
    if bundle.start_postures is None:
        items.append(("start.count", 0))
    else:
        s, k, _ = bundle.start_postures.shape
        items.append(("start.count", s))
        items.append(("start.postures", bundle.start_postures.reshape(s * k, 3)))
    if bundle.spatial is not None:
        items.append(("has_spatial", 1))
        items.extend(_spatial_items("spatial", bundle.spatial))
    else:
        items.append(("has_spatial", 0))
    if bundle.fpca is not None:
        items.append(("has_fpca", 1))
        items.extend(_fpca_items("fpca", bundle.fpca))
    else:
        items.append(("has_fpca", 0))
    items.append(("var_init", bundle.var_init))
    items.extend(_model_items(bundle.model))
    write_doc(path, BUNDLE_DOC, VERSION, items)


def load_bundle(path) -> EmulatorBundle:
    doctype, version, doc = read_doc(path)
    if doctype != BUNDLE_DOC or version != VERSION:
        raise DimensionMismatch(f"{path}: not a version-{VERSION} bundle document")
    start = None
    if doc["start.count"]:
        s = doc["start.count"]
        start = doc["start.postures"].reshape(s, -1, 3)
    spatial = _spatial_from(doc, "spatial") if doc["has_spatial"] else None
    fpca = _fpca_from(doc, "fpca") if doc["has_fpca"] else None
    reference = doc["reference"]
    return EmulatorBundle(kind=doc["kind"], model_type=doc["model_type"],
                          model=_model_from(doc), length=doc["length"],
                          reference=reference, spatial=spatial, fpca=fpca,
                          start_policy=doc["start_policy"], start_postures=start,
                          var_init=doc["var_init"], meta=json.loads(doc["meta"]))


def save_reduction(path, spatial: SpatialPCA = None, fpca: FPCABasis = None,
                   mpca: MPCAModel = None):
    items = []
    items.append(("has_spatial", int(spatial is not None)))
    if spatial is not None:
        items.extend(_spatial_items("spatial", spatial))
    items.append(("has_fpca", int(fpca is not None)))
    if fpca is not None:
        items.extend(_fpca_items("fpca", fpca))
    items.append(("has_mpca", int(mpca is not None)))
    if mpca is not None:
        items.extend([("mpca.mean", mpca.mean), ("mpca.row_basis", mpca.row_basis),
                      ("mpca.col_basis", mpca.col_basis), ("mpca.captured", mpca.captured),
                      ("mpca.converged", int(mpca.converged)),
                      ("mpca.total_variance", float(mpca.total_variance))])
    write_doc(path, REDUCTION_DOC, VERSION, items)


def load_reduction(path):
    doctype, version, doc = read_doc(path)
    if doctype != REDUCTION_DOC or version != VERSION:
        raise DimensionMismatch(f"{path}: not a version-{VERSION} reduction document")
    spatial = _spatial_from(doc, "spatial") if doc["has_spatial"] else None
    fpca = _fpca_from(doc, "fpca") if doc["has_fpca"] else None
    mpca = None
    if doc["has_mpca"]:
        mpca = MPCAModel(mean=doc["mpca.mean"], row_basis=doc["mpca.row_basis"],
                         col_basis=doc["mpca.col_basis"], captured=doc["mpca.captured"],
                         converged=bool(doc["mpca.converged"]),
                         total_variance=doc["mpca.total_variance"])
    return spatial, fpca, mpca
