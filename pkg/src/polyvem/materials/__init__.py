"""Point-wise constitutive models with a common vectorized update interface."""

from polyvem.materials.base import (
    Material,
    MaterialError,
    MaterialState,
    UpdateResult,
    consistent_tangent_check,
    isotropic_moduli,
)
from polyvem.materials.elastic import LinearElastic
from polyvem.materials.plasticity import MisesPlasticity
from polyvem.materials.sma import SouzaSMA
from polyvem.materials.viscoelastic import MaxwellViscoelastic, relaxation_modulus

MODELS = {
    "elastic": LinearElastic,
    "maxwell": MaxwellViscoelastic,
    "mises": MisesPlasticity,
    "sma": SouzaSMA,
}


def make_material(spec: dict) -> Material:
    """Build a model from a parameter block ``{"model": name, **params}``."""
    params = dict(spec)
    model = params.pop("model")
    try:
        cls = MODELS[model]
    except KeyError:
        raise ValueError(f"unknown material model {model!r}; expected one of {sorted(MODELS)}") from None
    for key in ("mu", "lam"):
        if key in params:
            params[key] = tuple(params[key])
    return cls(**params)


__all__ = [
    "LinearElastic", "Material", "MaterialError", "MaterialState", "MaxwellViscoelastic",
    "MisesPlasticity", "MODELS", "SouzaSMA", "UpdateResult", "consistent_tangent_check",
    "isotropic_moduli", "make_material", "relaxation_modulus",
]
