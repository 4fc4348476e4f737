import numpy as np
import numpy.typing as npt
from sklearn.decomposition import PCA

from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result


def principal_components(embeddings: npt.ArrayLike, k: int) -> Result[npt.NDArray[np.float64], PsmError]:
    """Coordinates on the top ``k`` principal axes, each oriented so its largest-magnitude loading is positive.

    When the data support fewer than ``k`` axes, the missing coordinates are zero.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:  # noqa: PLR2004
        return fail(ErrorKind.TOO_FEW_POINTS, "projection needs at least 2 points", count=len(x))
    if not np.isfinite(x).all():
        return fail(ErrorKind.INVALID_INPUT, "cannot project non-finite embeddings")
    available = min(k, x.shape[0], x.shape[1])
    pca = PCA(n_components=available, svd_solver="full")
    coords = pca.fit_transform(x)
    pivots = np.abs(pca.components_).argmax(axis=1)
    signs = np.sign(pca.components_[np.arange(available), pivots])
    coords *= np.where(signs == 0, 1.0, signs)
    if available < k:
        coords = np.hstack([coords, np.zeros((len(x), k - available))])
    return Ok(coords)


def project_2d(embeddings: npt.ArrayLike) -> Result[npt.NDArray[np.float64], PsmError]:
    """Projection on the first two principal components, ``N x 2``."""
    return principal_components(embeddings, 2)
