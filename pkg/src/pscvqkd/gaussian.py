"""Covariance-matrix algebra for Gaussian states.

Conventions: quadratures are ordered mode-major ``(x1, p1, x2, p2, ...)`` and
the vacuum has unit variance. Transforms act as ``gamma -> M gamma M^T``.
Covariance matrices and symplectic transforms are plain ``numpy`` arrays.
"""

import math

import numpy as np

from .errors import UnphysicalStateError

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
# eigenvalues below 1 - REJECT_TOL are treated as a genuinely unphysical input
REJECT_TOL = 1e-6

SIGMA_Z = np.diag([1.0, -1.0])


def symplectic_form(n_modes):
    """Standard symplectic form Omega for ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_mode(index, n_modes):
    if not 0 <= index < n_modes:
        raise IndexError(f"mode {index} out of range for {n_modes} modes")


def symplectic_squeezer(r, target_mode, n_modes):
    """Single-mode squeezer ``diag(e^-r, e^r)`` on ``target_mode``."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    _check_mode(target_mode, n_modes)
    if not math.isfinite(r):
        raise ValueError(f"squeezing parameter must be finite, got {r}")
    m = np.eye(2 * n_modes)
    m[2 * target_mode, 2 * target_mode] = math.exp(-r)
    m[2 * target_mode + 1, 2 * target_mode + 1] = math.exp(r)
    return m


def symplectic_beamsplitter(T, mode_i, mode_j, n_modes):
    """Beamsplitter of transmissivity ``T`` mixing ``mode_i`` and ``mode_j``.

    The block acting on ``(mode_i, mode_j)`` is
    ``[[sqrt(T) I, sqrt(1-T) I], [-sqrt(1-T) I, sqrt(T) I]]``.
    """
    if not 0.0 <= T <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {T}")
    _check_mode(mode_i, n_modes)
    _check_mode(mode_j, n_modes)
    if mode_i == mode_j:
        raise ValueError("beamsplitter needs two distinct modes")
    t = math.sqrt(T)
    r = math.sqrt(1.0 - T)
    m = np.eye(2 * n_modes)
    i, j = 2 * mode_i, 2 * mode_j
    for q in range(2):
        m[i + q, i + q] = t
        m[i + q, j + q] = r
        m[j + q, i + q] = -r
        m[j + q, j + q] = t
    return m


def apply_symplectic(m, gamma):
    """Return ``M gamma M^T``."""
    m = np.asarray(m, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if m.shape != gamma.shape or m.shape[0] != m.shape[1]:
        raise ValueError(f"dimension mismatch: {m.shape} vs {gamma.shape}")
    out = m @ gamma @ m.T
    return 0.5 * (out + out.T)


def direct_sum(*blocks):
    """Block-diagonal covariance matrix of independent subsystems."""
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        d = b.shape[0]
        out[k:k + d, k:k + d] = b
        k += d
    return out


def vacuum_cm(n_modes=1):
    return np.eye(2 * n_modes)


def epr_cm(V):
    """Two-mode squeezed vacuum with arm variance ``V``."""
    if not V >= 1.0:
        raise ValueError(f"EPR arm variance must be >= 1, got {V}")
    c = math.sqrt(V * V - 1.0)
    gamma = np.zeros((4, 4))
    gamma[:2, :2] = V * np.eye(2)
    gamma[2:, 2:] = V * np.eye(2)
    gamma[:2, 2:] = c * SIGMA_Z
    gamma[2:, :2] = c * SIGMA_Z
    return gamma


def check_covariance(gamma):
    """Validate shape and symmetry; return the array as float."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
        raise ValueError(f"covariance matrix must be square with even size, got {gamma.shape}")
    if np.max(np.abs(gamma - gamma.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(gamma))):
        raise ValueError("covariance matrix is not symmetric")
    return gamma


def symplectic_eigenvalues(gamma):
    """Symplectic spectrum: moduli of the eigenvalues of ``i Omega gamma``.

    Returns the ``n`` values sorted in descending order. Raises
    :class:`UnphysicalStateError` if any value is below ``1 - 1e-6``.
    """
    gamma = check_covariance(gamma)
    n = gamma.shape[0] // 2
    # the moduli below are only a symplectic spectrum for gamma > 0
    low_eig = float(np.linalg.eigvalsh(gamma)[0])
    if low_eig <= 0.0:
        raise UnphysicalStateError(
            f"covariance matrix not positive definite (eigenvalue {low_eig:.12g})",
            value=low_eig)
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ gamma))
    # eigenvalues come in +/- pairs, keep one of each
    nu = np.sort(ev)[::2][::-1]
    low = float(nu[-1])
    if low < 1.0 - REJECT_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalue {low:.12g} < 1", value=low)
    return nu


def two_mode_symplectic_eigenvalues(gamma):
    """Closed-form symplectic spectrum of a two-mode covariance matrix.

    Uses ``nu^2 = (Delta -/+ sqrt(Delta^2 - 4 det gamma)) / 2`` with
    ``Delta = det A + det B + 2 det C``; returned in descending order.

    When the two eigenvalues nearly coincide (e.g. a pure state with large
    variances) the square root amplifies rounding in ``Delta`` to roughly
    ``sqrt(eps) * |gamma|``; :func:`symplectic_eigenvalues` is the accurate route there.
    """
    gamma = check_covariance(gamma)
    if gamma.shape != (4, 4):
        raise ValueError("closed form applies to two-mode states only")
    a, b, c = gamma[:2, :2], gamma[2:, 2:], gamma[:2, 2:]
    delta = np.linalg.det(a) + np.linalg.det(b) + 2.0 * np.linalg.det(c)
    det = np.linalg.det(gamma)
    root = math.sqrt(max(delta * delta - 4.0 * det, 0.0))
    nu_plus = math.sqrt(max((delta + root) / 2.0, 0.0))
    # (delta - root) / 2 rewritten as 2 det / (delta + root) to avoid cancellation
    nu_minus = math.sqrt(max(2.0 * det / (delta + root), 0.0)) if delta + root > 0.0 else 0.0
    if nu_minus < 1.0 - REJECT_TOL:
        raise UnphysicalStateError(f"symplectic eigenvalue {nu_minus:.12g} < 1", value=nu_minus)
    return np.array([nu_plus, nu_minus])


def entropy_g(nu):
    """Entropy in bits of a thermal mode with symplectic eigenvalue ``nu``."""
    if nu < 1.0 + 1e-12:
        return 0.0
    plus = (nu + 1.0) / 2.0
    minus = (nu - 1.0) / 2.0
    # log2(1 + u) via log1p keeps precision close to nu = 1
    return (plus * math.log1p(minus) - minus * math.log(minus)) / math.log(2.0)


def von_neumann_entropy(gamma):
    """Von Neumann entropy in bits of the Gaussian state ``gamma``."""
    return sum(entropy_g(float(nu)) for nu in symplectic_eigenvalues(gamma))


def conditional_cm_heterodyne(gamma_ab, measured_mode=0):
    """One-mode covariance matrix left after heterodyning one mode of two.

    ``gamma_B|a = B - C (A + I)^-1 C^T`` where ``A`` is the measured block.
    """
    gamma_ab = check_covariance(gamma_ab)
    if gamma_ab.shape != (4, 4):
        raise ValueError("heterodyne conditioning expects a two-mode state")
    if measured_mode not in (0, 1):
        raise IndexError(f"mode {measured_mode} out of range for 2 modes")
    m, k = (slice(0, 2), slice(2, 4)) if measured_mode == 0 else (slice(2, 4), slice(0, 2))
    a = gamma_ab[m, m]
    b = gamma_ab[k, k]
    c = gamma_ab[k, m]
    out = b - c @ np.linalg.solve(a + np.eye(2), c.T)
    return 0.5 * (out + out.T)
