"""Small bosonic codes in a truncated Fock space.

``n_cut`` is the dimension of the single-mode space (levels 0..n_cut-1).
Two-mode operators are Kronecker products with mode a first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import NumericalError


def annihilation(n_cut):
    return np.diag(np.sqrt(np.arange(1, n_cut, dtype=float)), 1)


def creation(n_cut):
    return annihilation(n_cut).T.copy()


def number(n_cut):
    return np.diag(np.arange(n_cut, dtype=float))


def fock(n, n_cut):
    v = np.zeros(n_cut, dtype=complex)
    v[n] = 1.0
    return v


def two_mode(op_a=None, op_b=None, n_cut=20):
    eye = np.eye(n_cut)
    return np.kron(eye if op_a is None else op_a, eye if op_b is None else op_b)


def coherent(alpha, n_cut, normalize=True):
    """Coherent state |alpha> truncated to n_cut levels.

    With ``normalize`` the truncated vector is renormalized; otherwise it keeps
    the exact amplitudes, so its norm deficit measures the cutoff tail.
    """
    n = np.arange(n_cut)
    if alpha == 0:
        return fock(0, n_cut)
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(complex(alpha)) - 0.5 * gammaln(n + 1))
    return amp / np.linalg.norm(amp) if normalize else amp


def commutator_defect(n_cut):
    """max |[a, a^dag] - I| on the first n_cut - 2 levels (the top level is a truncation artifact)."""
    a = annihilation(n_cut)
    c = a @ a.T - a.T @ a - np.eye(n_cut)
    k = n_cut - 2
    return float(np.abs(c[:k, :k]).max())


@dataclass
class CodePair:
    """Two codewords and a labelled error set over the same truncated space."""

    codewords: tuple
    errors: list
    tail_tol: float = 1e-10

    def __post_init__(self):
        z, o = (np.asarray(v, dtype=complex) for v in self.codewords)
        self.codewords = (z, o)
        gram = np.array([[np.vdot(x, y) for y in (z, o)] for x in (z, o)])
        if np.abs(gram - np.eye(2)).max() > 1e-10:
            raise ValueError("codewords are not orthonormal")


@dataclass(frozen=True)
class QecReport:
    distinguish: float
    orthogonality: float
    passed: bool
    worst_pair: tuple


def qec_check(code, tol=1e-12):
    """Largest violations of the Knill-Laflamme conditions over all error pairs.

    ``distinguish`` is max |<0|Ei^dag Ej|0> - <1|Ei^dag Ej|1>| and
    ``orthogonality`` is max |<0|Ei^dag Ej|1>|, both over all (i, j).
    """
    z, o = code.codewords
    labels = [lab for lab, _ in code.errors]
    ops = [np.asarray(m) for _, m in code.errors]
    for op in ops:
        # weight an error pushes into the last level signals cutoff leakage
        if max(abs((op @ v)[-1]) ** 2 for v in (z, o)) > code.tail_tol:
            raise NumericalError("error operators leak into the cutoff level")
    d1 = d2 = 0.0
    worst = (None, None)
    for i, ei in enumerate(ops):
        for j, ej in enumerate(ops):
            m = ei.conj().T @ ej
            dev1 = abs(np.vdot(z, m @ z) - np.vdot(o, m @ o))
            dev2 = max(abs(np.vdot(z, m @ o)), abs(np.vdot(o, m @ z)))
            if max(dev1, dev2) > max(d1, d2):
                worst = (labels[i], labels[j])
            d1, d2 = max(d1, dev1), max(d2, dev2)
    return QecReport(float(d1), float(d2), bool(d1 < tol and d2 < tol), worst)


def kitten_codewords(n_cut=60):
    return (fock(0, n_cut) + fock(4, n_cut)) / math.sqrt(2), fock(2, n_cut)


def kitten_code(gamma, errors="ideal", n_cut=60):
    """Kitten code with either {I, sqrt(g) a} ("ideal") or the loss Kraus pair {exp(-g n/2), sqrt(g) a} ("kraus")."""
    a = annihilation(n_cut)
    e1 = ("sqrt(g) a", math.sqrt(gamma) * a)
    if errors == "ideal":
        e0 = ("I", np.eye(n_cut))
    elif errors == "kraus":
        e0 = ("exp(-g n/2)", np.diag(np.exp(-0.5 * gamma * np.arange(n_cut))))
    else:
        raise ValueError("errors must be 'ideal' or 'kraus'")
    return CodePair(kitten_codewords(n_cut), [e0, e1])


def two_mode_codewords(n_cut=20):
    f = lambda i, j: np.kron(fock(i, n_cut), fock(j, n_cut))
    return (f(4, 0) + f(0, 4)) / math.sqrt(2), f(2, 2)


def two_mode_code(gamma, n_cut=20):
    a = annihilation(n_cut)
    n = np.arange(n_cut)
    no_loss = np.exp(-0.5 * gamma * (n[:, None] + n[None, :])).ravel()
    return CodePair(
        two_mode_codewords(n_cut),
        [
            ("sqrt(g) a", math.sqrt(gamma) * two_mode(a, None, n_cut)),
            ("sqrt(g) b", math.sqrt(gamma) * two_mode(None, a, n_cut)),
            ("exp(-g(na+nb)/2)", np.diag(no_loss)),
        ],
    )


def four_cat_codewords(alpha, n_cut=60):
    """4-legged cat codewords for real alpha, built from truncated coherent states."""
    legs = [coherent(alpha * ph, n_cut, normalize=False) for ph in (1, -1, 1j, -1j)]
    z = legs[0] + legs[1] + legs[2] + legs[3]
    o = legs[0] + legs[1] - legs[2] - legs[3]
    return z / np.linalg.norm(z), o / np.linalg.norm(o)


def cat_norm(alpha, b):
    """N_b = 8 exp(-alpha^2)(cosh alpha^2 + (-1)^b cos alpha^2)."""
    x = alpha * alpha
    return 8 * math.exp(-x) * (math.cosh(x) + (-1) ** b * math.cos(x))


def cat_sweet_spots(count=1):
    """First ``count`` positive roots x = alpha^2 of tan x + tanh x = 0."""
    if not 1 <= count <= 10:
        raise ValueError("count must lie in 1..10")
    f = lambda x: math.tan(x) + math.tanh(x)
    eps = 1e-9
    return [brentq(f, (k - 0.5) * math.pi + eps, k * math.pi, xtol=1e-15) for k in range(1, count + 1)]


def mean_photon(v):
    n = np.arange(len(v))
    return float(np.sum(n * np.abs(v) ** 2))


def rotation_symmetry_check(v, S):
    """<exp(2 pi i n / (S+1))>; modulus one certifies the rotation symmetry."""
    v = np.asarray(v, dtype=complex)
    n = np.arange(len(v))
    return complex(np.sum(np.abs(v) ** 2 * np.exp(2j * math.pi * n / (S + 1))))


@dataclass(frozen=True)
class KerrCatReport:
    eigenvalues: np.ndarray
    splitting: float
    gap: float
    overlap: float


def kerr_cat_spectrum(K=1.0, E=6.25, n_cut=60):
    """Spectrum of H = -K a^dag^2 a^2 + E (a^dag^2 + a^2) for real E >= 0.

    ``overlap`` is the average weight of the top two eigenvectors inside span{|alpha>, |-alpha>}.
    """
    if E / K > n_cut / 4:
        raise ValueError("alpha^2 = E/K must not exceed n_cut/4")
    a = annihilation(n_cut)
    a2 = a @ a
    H = -K * a2.T @ a2 + E * (a2.T + a2)
    w, v = np.linalg.eigh(H)
    w, v = w[::-1], v[:, ::-1]
    top = v[:, :2]
    hi = int(math.ceil(0.9 * n_cut))
    if np.sum(np.abs(top[hi:]) ** 2) > 1e-8:
        raise NumericalError("cutoff too small: top eigenvectors reach the last levels")
    alpha = math.sqrt(E / K)
    basis, _ = np.linalg.qr(np.column_stack([coherent(alpha, n_cut), coherent(-alpha, n_cut)]))
    overlap = float(np.sum(np.abs(basis.conj().T @ top) ** 2) / 2) if alpha > 0 else float("nan")
    return KerrCatReport(w, float(w[0] - w[1]), float(w[1] - w[2]), overlap)


def dissipative_fixed_point_check(alpha, n_cut=60):
    """||(a^2 - alpha^2)|alpha>|| with |alpha> truncated and renormalized in n_cut levels."""
    a = annihilation(n_cut)
    v = coherent(alpha, n_cut)
    return float(np.linalg.norm(a @ a @ v - alpha**2 * v))


@dataclass(frozen=True)
class BlochMessiahReport:
    A: np.ndarray
    B: np.ndarray
    U: np.ndarray
    V: np.ndarray
    error_A: float
    error_B: float
    bogoliubov_defect: float
    xi: float


def cnot_mode_matrices():
    A = np.array([[1.0, -0.5], [0.5, 1.0]])
    B = np.array([[0.0, 0.5], [0.5, 0.0]])
    return A, B


def bloch_messiah_cnot():
    """Rebuild the CNOT mode matrices from 50:50 beam splitters and equal single-mode squeezers."""
    A, B = cnot_mode_matrices()
    th = 0.5 * math.asin(2 / math.sqrt(5))
    e = np.exp(1j * th)
    U = np.array([[1j * e, 1j / e], [-e, 1 / e]]) / math.sqrt(2)
    V = np.array([[0, 1], [1, 0]]) @ U.conj()
    DA = np.diag([math.sqrt(5) / 2] * 2)
    DB = np.diag([0.5] * 2)
    A_r = U @ DA @ V.conj().T
    B_r = U @ DB @ V.T
    bog = np.abs(A @ A.T - B @ B.T - np.eye(2)).max()
    return BlochMessiahReport(
        A_r, B_r, U, V, float(np.abs(A_r - A).max()), float(np.abs(B_r - B).max()), float(bog), -math.acosh(math.sqrt(5) / 2)
    )
