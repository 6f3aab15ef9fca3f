import logging

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from src.config import JITTER_MAX, JITTER_START
from src.errors import NumericalError

logger = logging.getLogger(__name__)


def jittered_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + jitter*I and the jitter actually used.

    Jitter starts at JITTER_START * mean(diag) and grows tenfold per failure
    up to JITTER_MAX * mean(diag).
    """
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    if not np.isfinite(scale):
        raise NumericalError("covariance matrix has non-finite diagonal")
    if scale <= 0:
        scale = 1.0
    jitter = JITTER_START * scale
    limit = JITTER_MAX * scale * (1 + 1e-12)
    eye = np.eye(K.shape[0])
    while jitter <= limit:
        try:
            L = cholesky(K + jitter * eye, lower=True, check_finite=True)
            return L, jitter
        except (LinAlgError, ValueError):
            logger.warning("Cholesky failed with jitter %.3e, escalating", jitter)
            jitter *= 10.0
    raise NumericalError("Cholesky factorization failed", jitter=jitter / 10.0)


def logdet_from_cholesky(L: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))
