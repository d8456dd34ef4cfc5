"""
Centered i.i.d. driving-noise laws: sampling and Gaussian integrability.
"""

import logging
import math

import numpy as np
from scipy import special

from .models import IntegrabilityCheck, NoiseKind, NoiseModel

logger = logging.getLogger(__name__)


def sample(model: NoiseModel, count: int, stream: np.random.Generator) -> np.ndarray:
    """
    Draw i.i.d. noise values.

    Args:
        model: Noise law
        count: Number of draws (>= 1)
        stream: Generator obtained from ``utils.stream_rng``

    Returns:
        Float64 array of length ``count``
    """
    if count < 1:
        raise ValueError(f'count must be positive, got {count}')
    if model.kind == NoiseKind.NORMAL:
        return stream.normal(0.0, model.sigma, count)
    if model.kind == NoiseKind.UNIFORM:
        return stream.uniform(-model.half_width, model.half_width, count)
    if model.kind == NoiseKind.RADEMACHER:
        return 2.0 * stream.integers(0, 2, count).astype(np.float64) - 1.0
    support, probabilities = model.exact_support()
    weights = np.array([float(p) for p in probabilities])
    return np.asarray(support, dtype=np.float64)[stream.choice(len(support), count, p=weights)]


def gaussian_integrability_radius(model: NoiseModel) -> float:
    """Supremum of alpha with E exp(alpha xi^2) finite (inf for bounded laws)."""
    if model.kind == NoiseKind.NORMAL:
        return 1.0 / (2.0 * model.sigma**2)
    return math.inf


def verify_integrability(model: NoiseModel, alpha: float) -> IntegrabilityCheck:
    """
    Check the Gaussian integrability condition E exp(alpha xi^2) < infinity.

    Bounded laws are evaluated exactly (the uniform law through the imaginary
    error function); the normal law uses the chi-square moment generating
    function.

    Raises:
        ValueError: If alpha is not positive
    """
    if alpha <= 0:
        raise ValueError(f'alpha must be positive, got {alpha}')

    if model.kind == NoiseKind.NORMAL:
        rate = 1.0 - 2.0 * alpha * model.sigma**2
        value = rate**-0.5 if rate > 0 else math.inf
    elif model.kind == NoiseKind.UNIFORM:
        scaled = model.half_width * math.sqrt(alpha)
        value = math.sqrt(math.pi) * float(special.erfi(scaled)) / (2.0 * scaled)
    else:
        support, probabilities = model.exact_support()
        value = sum(float(p) * math.exp(alpha * x * x) for x, p in zip(support, probabilities))

    finite = math.isfinite(value)
    if not finite:
        logger.debug(f'E exp({alpha} xi^2) diverges for {model.kind.value} noise')
    return IntegrabilityCheck(alpha=alpha, finite=finite, value=value)
