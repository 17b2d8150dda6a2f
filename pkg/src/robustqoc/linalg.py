"""
Dense matrix helpers and the row-stacking vectorization convention.

Operators, density matrices and superoperators are plain complex numpy
arrays. Vectorization is row-major, so that::

    vectorize(A @ rho @ B) == kron(A, B.T) @ vectorize(rho)

and the coherent generator of ``rho -> -i[H, rho]`` reads
``-i (H (x) 1 - 1 (x) H^T)``. Every other module relies on this.
"""

import numpy as np
import scipy.linalg

__all__ = [
    "PAULI_I",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "dagger",
    "is_hermitian",
    "is_unitary",
    "check_density_matrix",
    "vectorize",
    "devectorize",
    "kron",
    "expm",
    "frobenius_norm",
    "commutator_superop",
    "dissipator_superop",
    "unitary_superop",
    "ordered_products",
]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _square(m, name="matrix"):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def dagger(m):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(m, -1, -2))


def is_hermitian(m, atol=1e-12):
    m = _square(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) < atol)


def is_unitary(m, atol=1e-10):
    m = _square(m)
    eye = np.eye(m.shape[-1])
    return bool(np.max(np.abs(dagger(m) @ m - eye), initial=0.0) < atol)


def check_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8):
    """Raise ``ValueError`` unless `rho` is a valid density matrix.

    Returns the array unchanged so the call can be used inline.
    """
    rho = _square(rho, "density matrix")
    herm_err = np.max(np.abs(rho - dagger(rho)))
    if herm_err >= herm_tol:
        raise ValueError(f"density matrix not Hermitian (residual {herm_err:.3e})")
    tr_err = abs(np.trace(rho) - 1)
    if tr_err >= trace_tol:
        raise ValueError(f"density matrix trace deviates from 1 by {tr_err:.3e}")
    min_eig = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]
    if min_eig <= -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {min_eig:.3e}")
    return rho


def vectorize(rho):
    """Row-stack an N x N matrix into a length N**2 vector."""
    rho = _square(rho)
    n = rho.shape[-1]
    return np.reshape(rho, rho.shape[:-2] + (n * n,))


def devectorize(vec):
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    n = int(round(np.sqrt(vec.shape[-1])))
    if n * n != vec.shape[-1]:
        raise ValueError(f"vector length {vec.shape[-1]} is not a perfect square")
    return np.reshape(vec, vec.shape[:-1] + (n, n))


def kron(a, b):
    return np.kron(a, b)


def expm(m):
    """Matrix exponential of a square matrix (or a stack of them).

    Backed by scipy's Pade scaling-and-squaring.
    """
    m = _square(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("expm called with non-finite entries")
    return scipy.linalg.expm(m)


def frobenius_norm(m):
    m = np.asarray(m)
    return float(np.sqrt(np.sum(np.abs(m) ** 2)))


def commutator_superop(h):
    """Superoperator of ``rho -> -i[h, rho]``. Works on stacks of `h`."""
    h = _square(h)
    n = h.shape[-1]
    eye = np.eye(n)
    left = np.einsum("...ij,kl->...ikjl", h, eye)
    right = np.einsum("ij,...lk->...ikjl", eye, h)
    return -1j * (left - right).reshape(h.shape[:-2] + (n * n, n * n))


def dissipator_superop(f):
    """Superoperator of ``rho -> f rho f^+ - {f^+ f, rho}/2``."""
    f = _square(f)
    n = f.shape[-1]
    eye = np.eye(n)
    ff = dagger(f) @ f
    jump = np.einsum("...ij,...kl->...ikjl", f, np.conj(f))
    anti = np.einsum("...ij,kl->...ikjl", ff, eye) + np.einsum("ij,...lk->...ikjl", eye, ff)
    return (jump - 0.5 * anti).reshape(f.shape[:-2] + (n * n, n * n))


def unitary_superop(u):
    """Superoperator of ``rho -> u rho u^+`` (that is, ``u (x) u*``)."""
    u = _square(u)
    n = u.shape[-1]
    return np.einsum("...ij,...kl->...ikjl", u, np.conj(u)).reshape(u.shape[:-2] + (n * n, n * n))


def ordered_products(steps):
    """Time-ordered partial products.

    ``out[k] = steps[k-1] @ ... @ steps[0]``, with ``out[0]`` the identity.
    """
    n = steps.shape[-1]
    out = np.concatenate([np.eye(n, dtype=complex)[None], steps], axis=0)
    # Hillis-Steele scan: log2(K) batched matmuls instead of K small ones
    offset = 1
    while offset < out.shape[0]:
        out[offset:] = out[offset:] @ out[:-offset]
        offset *= 2
    return out
