"""Prime-field arithmetic and dense matrices for qudit Pauli/Fourier/XOR gates.

Multi-qudit kets are indexed in mixed radix with slot 0 most significant,
so ``|x0, x1, ..., x_{r-1}>`` sits at ``sum_j x_j * d**(r-1-j)``.
"""
from __future__ import annotations

import functools
import itertools
from typing import Literal

import numpy as np

from .errors import NotPrimeError, SizeLimitError

MAX_CHECK_DIM = 256


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_dim(d) -> int:
    """Validate and return a prime qudit dimension."""
    if isinstance(d, bool) or int(d) != d:
        raise NotPrimeError(f"dimension must be an integer, got {d!r}")
    d = int(d)
    if not is_prime(d):
        raise NotPrimeError(f"dimension {d} is not prime")
    return d


@functools.lru_cache(maxsize=None)
def _root_table(d: int) -> np.ndarray:
    x = np.arange(d)
    table = np.exp(2j * np.pi * x / d)
    # snap the exactly-known values
    table[0] = 1.0
    if d % 2 == 0:
        table[d // 2] = -1.0
    if d % 4 == 0:
        table[d // 4] = 1j
        table[3 * d // 4] = -1j
    table.setflags(write=False)
    return table


def roots_of_unity(d: int) -> np.ndarray:
    """Table ``[Phi(0), ..., Phi(d-1)]`` with ``Phi(x) = exp(2 pi i x / d)``."""
    return _root_table(int(d))


def phase(x, d: int):
    """Phi(x) looked up from the root table; ``x`` may be an integer array."""
    return roots_of_unity(d)[np.mod(x, d)]


def pauli_matrix(m: int, n: int, d: int) -> np.ndarray:
    """Generalized Pauli operator ``E_mn = sum_l Phi(l*n) |l-m><l|``."""
    d = prime_dim(d)
    if not (0 <= m < d and 0 <= n < d):
        raise ValueError(f"indices ({m}, {n}) out of range for d={d}")
    out = np.zeros((d, d), dtype=complex)
    cols = np.arange(d)
    out[(cols - m) % d, cols] = phase(cols * n, d)
    return out


def fourier_matrix(d: int) -> np.ndarray:
    """Discrete Fourier transform with entries ``Phi(i*j)/sqrt(d)``."""
    d = prime_dim(d)
    idx = np.arange(d)
    return phase(np.outer(idx, idx), d) / np.sqrt(d)


def _ket_index(digits, d: int) -> int:
    idx = 0
    for x in digits:
        idx = idx * d + x
    return idx


def xor_gate(
    d: int,
    r: int,
    control: int,
    target: int,
    variant: Literal["minus", "plus"] = "minus",
) -> np.ndarray:
    """Permutation matrix of an XOR between two slots of an ``r``-qudit register.

    ``minus`` maps the target value ``y`` to ``x - y``; ``plus`` maps it to ``x + y``.
    """
    d = prime_dim(d)
    if control == target or not (0 <= control < r and 0 <= target < r):
        raise ValueError("control and target must be distinct slots in range")
    if variant not in ("minus", "plus"):
        raise ValueError(f"unknown variant {variant!r}")
    size = d**r
    if size > MAX_CHECK_DIM * MAX_CHECK_DIM:
        raise SizeLimitError(f"register dimension {size} too large")
    sign = -1 if variant == "minus" else 1
    perm = np.empty(size, dtype=np.int64)
    for digits in itertools.product(range(d), repeat=r):
        out = list(digits)
        x, y = digits[control], digits[target]
        out[target] = (x + y) % d if sign > 0 else (x - y) % d
        perm[_ket_index(digits, d)] = _ket_index(out, d)
    mat = np.zeros((size, size))
    mat[perm, np.arange(size)] = 1.0
    return mat


def xor_matrix(
    d: int,
    variant: Literal["minus", "plus"] = "minus",
    direction: Literal["c_to_t", "t_to_c"] = "c_to_t",
) -> np.ndarray:
    """Two-qudit XOR on the ordered pair (c, t).

    The slot order is always (c, t); ``direction`` only picks which slot
    controls.  ``t_to_c`` with ``plus`` is ``|x>|y> -> |x+y>|y>``.
    """
    if direction == "c_to_t":
        return xor_gate(d, 2, 0, 1, variant)
    if direction == "t_to_c":
        return xor_gate(d, 2, 1, 0, variant)
    raise ValueError(f"unknown direction {direction!r}")


def embed(op: np.ndarray, slot: int, r: int) -> np.ndarray:
    """Tensor a single-qudit operator into slot ``slot`` of an ``r``-qudit register."""
    d = op.shape[0]
    left = np.eye(d**slot)
    right = np.eye(d ** (r - slot - 1))
    return np.kron(np.kron(left, op), right)


def is_unitary(mat: np.ndarray, tol: float = 1e-12) -> bool:
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])))) < tol


def _fourier_conjugation_residual(m: int, n: int, d: int, form: str) -> float:
    f = fourier_matrix(d)
    f_dag = f.conj().T
    if form == "holds":
        # F E_mn F^dag = Phi(mn) E_nm^*, valid for every prime d
        lhs = f @ pauli_matrix(m, n, d) @ f_dag
        rhs = phase(m * n, d) * pauli_matrix(n, m, d).conj()
    else:
        lhs = f_dag @ pauli_matrix(m, n, d) @ f
        e_nm = pauli_matrix(n, m, d)
        rhs = phase(-m * n, d) * (e_nm.conj() if form == "printed" else e_nm.T)
    return float(np.max(np.abs(lhs - rhs)))


def _pec_circuit_residual(r: int, d: int) -> float:
    f = fourier_matrix(d)
    f_inv = f.conj().T
    size = d**r
    # F_1^{-1} (XOR_{1->r} ... XOR_{1->2}) (F_1 x ... x F_r)
    fourier_all = functools.reduce(np.kron, [f] * r)
    lhs = fourier_all
    for t in range(1, r):
        lhs = xor_gate(d, r, 0, t, "minus") @ lhs
    lhs = embed(f_inv, 0, r) @ lhs
    # (F_2^{-1} x ... x F_r^{-1}) (XOR+_{r->1} ... XOR+_{2->1})
    rhs = np.eye(size)
    for c in range(1, r):
        rhs = xor_gate(d, r, c, 0, "plus") @ rhs
    rhs = functools.reduce(np.kron, [np.eye(d)] + [f_inv] * (r - 1)) @ rhs
    return float(np.max(np.abs(lhs - rhs)))


_CONJUGATION_FORMS = {
    "fourier_conjugation": "holds",
    "fourier_conjugation_printed": "printed",
    "fourier_conjugation_transpose": "transpose",
}


def identity_residual(
    kind: Literal["fourier_conjugation", "pec_circuit_equivalence"],
    params,
    d: int,
) -> float:
    """Max-entry residual between the two sides of a gate identity.

    Parameters
    ----------
    kind : str
        ``fourier_conjugation`` checks ``F E_mn F^dag = Phi(mn) E_nm^*`` with
        ``params = (m, n)``.  ``fourier_conjugation_printed`` evaluates
        ``F^dag E_mn F = Phi(-mn) E_nm^*``, which agrees only at ``d = 2``;
        ``fourier_conjugation_transpose`` swaps ``E_nm^*`` for ``E_nm^T`` and
        fails for every d.  Both are kept as diagnostics.
        ``pec_circuit_equivalence`` checks the r-qudit
        rewrite of the phase-correction circuit with ``params = r``; for
        ``r = 2`` this is the two-qudit identity the induction starts from.
    d : int
        Prime dimension.

    Raises
    ------
    SizeLimitError
        If ``d**r`` exceeds 256.
    """
    d = prime_dim(d)
    if kind in _CONJUGATION_FORMS:
        m, n = params
        return _fourier_conjugation_residual(int(m) % d, int(n) % d, d, _CONJUGATION_FORMS[kind])
    if kind == "pec_circuit_equivalence":
        r = int(params)
        if r < 2:
            raise ValueError("block length must be at least 2")
        if d**r > MAX_CHECK_DIM:
            raise SizeLimitError(
                f"refusing dense check of size {d}**{r} = {d**r} > {MAX_CHECK_DIM}"
            )
        return _pec_circuit_residual(r, d)
    raise ValueError(f"unknown identity {kind!r}")
