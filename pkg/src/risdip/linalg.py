"""
Dense complex linear algebra helpers and seeded random streams.

Every random draw in the library goes through :class:`RngStream`, whose
sequence is fixed by ``(master_seed, stream_id)``. Stream ids are derived
from a tuple of keys (trial index, SNR index, purpose tag, ...) with
:func:`derive_stream_id`, so adding a new consumer never shifts the draws
of an existing one.
"""

import hashlib

import numpy as np

from .errors import IndefiniteMatrix, NotHermitian, SingularMatrix

__all__ = [
    "RngStream",
    "derive_stream_id",
    "hermitian_sqrt",
    "complex_gaussian",
    "solve_hermitian",
    "dft_matrix",
]

HERMITIAN_TOL = 1e-10
EIG_TOL = 1e-10


def derive_stream_id(*keys) -> int:
    """Map an arbitrary tuple of ints/strings to a stable 64-bit id."""
    text = "\x1f".join(f"{type(k).__name__}:{k}" for k in keys)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """
    Reproducible random stream identified by ``(master_seed, stream_id)``.

    Parameters
    ----------
    master_seed : int
        Experiment-wide seed (64-bit unsigned).
    stream_id : int
        Per-purpose stream identifier (64-bit unsigned).
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        seq = np.random.SeedSequence([self.master_seed, self.stream_id])
        self._gen = np.random.Generator(np.random.PCG64(seq))

    @classmethod
    def for_keys(cls, master_seed: int, *keys) -> "RngStream":
        return cls(master_seed, derive_stream_id(*keys))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low=0.0, high=1.0, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def complex_normal(self, shape) -> np.ndarray:
        """Circularly symmetric N_c(0, 1) draws of the given shape."""
        re = self._gen.standard_normal(shape)
        im = self._gen.standard_normal(shape)
        return (re + 1j * im) * np.sqrt(0.5)


def complex_gaussian(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    """
    Matrix of i.i.d. circularly symmetric complex Gaussian entries.

    Real and imaginary parts each have variance 1/2, so ``E|z|^2 = 1``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return rng.complex_normal((rows, cols))


def _check_hermitian(C: np.ndarray):
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise NotHermitian(f"expected a square matrix, got shape {C.shape}")
    dev = np.max(np.abs(C - C.conj().T)) if C.size else 0.0
    if dev > HERMITIAN_TOL:
        raise NotHermitian(f"max |C - C^H| = {dev:.3e} exceeds {HERMITIAN_TOL}")
    return C


def hermitian_sqrt(C: np.ndarray) -> np.ndarray:
    """
    Hermitian square root of a positive semidefinite matrix.

    Uses a full eigendecomposition; eigenvalues in ``[-1e-10, 0)`` are
    clamped to zero, anything more negative raises
    :class:`~risdip.errors.IndefiniteMatrix`.
    """
    C = _check_hermitian(C)
    herm = 0.5 * (C + C.conj().T)
    w, V = np.linalg.eigh(herm)
    if w.size and w.min() < -EIG_TOL:
        raise IndefiniteMatrix(f"smallest eigenvalue {w.min():.3e} < {-EIG_TOL}")
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.conj().T
    return 0.5 * (S + S.conj().T)


def solve_hermitian(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Solve ``A X = B`` for Hermitian positive definite ``A``.

    Works on stacks: ``A`` may be ``(..., n, n)`` and ``B`` ``(..., n, r)``
    or ``(..., n)``. Raises :class:`~risdip.errors.SingularMatrix` when a
    Cholesky pivot falls below ``1e-12 * trace(A) / n``.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    n = A.shape[-1]
    if A.shape[-2] != n:
        raise ValueError(f"A must be square, got {A.shape}")
    vector_rhs = B.ndim == A.ndim - 1
    if vector_rhs:
        B = B[..., None]
    if B.shape[-2] != n:
        raise ValueError(f"non-conformable shapes {A.shape} and {B.shape}")

    floor = 1e-12 * np.real(np.trace(A, axis1=-2, axis2=-1)) / n
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("matrix is not positive definite") from exc
    pivots = np.real(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
    if np.any(pivots < floor[..., None]) or np.any(floor <= 0):
        raise SingularMatrix("pivot below relative floor 1e-12 * trace/n")
    X = np.linalg.solve(A, B)
    return X[..., 0] if vector_rhs else X


def dft_matrix(size: int) -> np.ndarray:
    """Unnormalised DFT matrix, entry ``(m, t) = exp(-j 2 pi m t / size)``."""
    if size < 1:
        raise ValueError("size must be >= 1")
    idx = np.arange(size)
    # integer product mod size keeps the phases exact for large indices
    phase = np.outer(idx, idx) % size
    return np.exp(-2j * np.pi * phase / size)
