"""Structured KKT solver plugged into cvxopt's cone LP interior-point method.

Every scenario block has the form ``[[I, W Phi + C], [*, gamma I + D]]`` so a
free policy entry ``(a, b)`` enters through ``w_a e_b' + e_b w_a'`` (off
diagonal) and ``gamma`` through the identity on the lower block.  After the
Nesterov-Todd scaling ``Y -> rti' Y rti`` those columns stay rank two,
``u_a v_b' + v_b u_a'`` with ``U = R1' W`` and ``V = R2'`` (``R1``/``R2`` the
top/bottom row blocks of ``rti``).  The solver below never materializes the
``s^2``-long scaled columns; it works with ``U`` and ``V`` for the Schur
complement and for both products with the scaled constraint matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve


# form the Hessian directly in parameter space when entries outnumber parameters by this factor
REDUCED_RATIO = 4
# largest (mT * nw)^2 product table summed over scenarios before gathering (about 128 MB)
TABLE_LIMIT = 16_000_000


@dataclass(frozen=True)
class SchurPattern:
    """Metadata attached to a PSD cone built by ``schur_block``."""

    W: np.ndarray  # (r, mT) left factor of the off-diagonal block
    basis: sp.csr_matrix  # row-major vec(Phi_u) = basis @ phi
    phi_start: int
    gamma_index: int
    r: int
    nw: int
    # derived: entries of Phi_u touched by some parameter, and the basis restricted to them
    rows: np.ndarray = field(init=False, repr=False)
    cols: np.ndarray = field(init=False, repr=False)
    local: np.ndarray | None = field(init=False, repr=False)
    # dense (n_free, mT, nw) parameter matrices, kept when they make the Hessian cheaper
    dense_basis: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        B = sp.csr_matrix(self.basis)
        support = np.flatnonzero(np.diff(B.indptr))
        object.__setattr__(self, "rows", support // self.nw)
        object.__setattr__(self, "cols", support % self.nw)
        sub = B[support]
        if sub.shape[0] == sub.shape[1] and (sub != sp.identity(sub.shape[0])).nnz == 0:
            local = None  # every parameter is its own entry
        else:
            local = sub.toarray()
        object.__setattr__(self, "local", local)
        dense = None
        if local is not None and REDUCED_RATIO * self.n_free <= support.size:
            mT = self.W.shape[1]
            dense = B.T.toarray().reshape(self.n_free, mT, self.nw)
        object.__setattr__(self, "dense_basis", dense)

    @property
    def n_free(self) -> int:
        return self.basis.shape[1]

    def compatible(self, other: "SchurPattern") -> bool:
        return (self.r == other.r and self.nw == other.nw and self.W.shape == other.W.shape
                and self.phi_start == other.phi_start and self.gamma_index == other.gamma_index
                and self.basis.shape == other.basis.shape
                and np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)
                and (self.local is None) == (other.local is None)
                and (self.local is None or np.array_equal(self.local, other.local)))


def hessian_blocks(pattern: SchurPattern, U: np.ndarray, V: np.ndarray):
    """Schur-complement contributions ``(H_phiphi, h_gammaphi, h_gammagamma)``.

    ``U``/``V`` may carry a leading batch axis; contributions are summed over it.
    Entry ``((a,b),(c,d))`` equals ``2 ((U'U)[a,c] (V'V)[b,d] + (V'U)[b,c] (V'U)[d,a])``.
    """
    U = U.reshape((-1,) + U.shape[-2:])
    V = V.reshape((-1,) + V.shape[-2:])
    UtU = np.matmul(U.transpose(0, 2, 1), U)
    VtV = np.matmul(V.transpose(0, 2, 1), V)
    VtU = np.matmul(V.transpose(0, 2, 1), U)
    g_full = np.matmul(VtV, VtU).sum(axis=0)  # (nw, mT)
    hgg = float(np.sum(VtV * VtV))
    mT, nw = UtU.shape[1], VtV.shape[1]
    if (mT * nw) ** 2 <= TABLE_LIMIT:
        K, g = _table_hessian(pattern, UtU, VtV, VtU, g_full)
    else:
        K, g = _looped_hessian(pattern, UtU, VtV, VtU, g_full)
    return K, g, hgg


def _table_hessian(pattern, X, Y, Z, g_full):
    """Sum the products over scenarios first: one GEMM per term, then gather or contract."""
    nb, mT, nw = X.shape[0], X.shape[1], Y.shape[1]
    # M[a, c, b, d] = sum_i X_i[a, c] Y_i[b, d];  N[b, c, d, a] = sum_i Z_i[b, c] Z_i[d, a]
    M = (X.reshape(nb, -1).T @ Y.reshape(nb, -1)).reshape(mT, mT, nw, nw)
    Zf = Z.reshape(nb, -1)
    N = (Zf.T @ Zf).reshape(nw, mT, nw, mT)
    if pattern.dense_basis is not None:
        # rows and columns indexed by row-major (a, b) to match vec(P_j)
        T4 = M.transpose(0, 2, 1, 3) + N.transpose(3, 0, 1, 2)
        P = pattern.dense_basis.reshape(pattern.n_free, -1)
        K = P @ T4.reshape(mT * nw, mT * nw) @ P.T
        g = P @ g_full.T.reshape(-1)
        return 2.0 * K, 2.0 * g
    a, b = pattern.rows, pattern.cols
    ac, ar = a[:, None], a[None, :]
    bc, br = b[:, None], b[None, :]
    K = 2.0 * (M[ac, ar, bc, br] + N[bc, ar, br, ac])
    g = 2.0 * g_full[b, a]
    if pattern.local is not None:
        L = pattern.local
        K = L.T @ K @ L
        g = L.T @ g
    return K, g


def _looped_hessian(pattern, X, Y, Z, g_full):
    """Per-scenario accumulation for blocks too large for the product table."""
    a, b = pattern.rows, pattern.cols
    k = a.size
    K = np.zeros((k, k))
    for i in range(X.shape[0]):
        Mba = Z[i][np.ix_(b, a)]
        K += X[i][np.ix_(a, a)] * Y[i][np.ix_(b, b)]
        K += Mba * Mba.T
    K *= 2.0
    g = 2.0 * g_full[b, a]
    if pattern.local is not None:
        L = pattern.local
        K = L.T @ K @ L
        g = L.T @ g
    return K, g


def psd_hessian(pattern: SchurPattern, S: np.ndarray, n_vars: int) -> np.ndarray:
    """``[tr(A_i S A_j S)]_{ij}`` for one block given ``S = rti rti'`` (reference form)."""
    # any factor with R R' = S gives the same result
    w, Q = np.linalg.eigh((S + S.T) / 2)
    R = Q * np.sqrt(np.clip(w, 0.0, None))
    U = R[:pattern.r].T @ pattern.W
    V = R[pattern.r:].T
    hpp, hg, hgg = hessian_blocks(pattern, U, V)
    H = np.zeros((n_vars, n_vars))
    sl = slice(pattern.phi_start, pattern.phi_start + hpp.shape[0])
    H[sl, sl] = hpp
    H[pattern.gamma_index, sl] = hg
    H[sl, pattern.gamma_index] = hg
    H[pattern.gamma_index, pattern.gamma_index] = hgg
    return H


def dense_psd_hessian(coeffs: sp.spmatrix, s: int, S: np.ndarray) -> np.ndarray:
    """Reference computation of the same quantity for an arbitrary PSD cone."""
    n_vars = coeffs.shape[1]
    # rows of coeffs are column-major vec; transpose each slice back
    A = np.asarray(coeffs.todense()).T.reshape(n_vars, s, s).transpose(0, 2, 1)
    AS = A @ S
    return np.einsum("ipq,jqp->ij", AS, AS)


def structured_cones(cones) -> bool:
    """True when every PSD cone carries a mutually compatible Schur pattern."""
    psds = [c for c in cones if c.kind == "psd"]
    if not psds or any(c.schur is None for c in psds):
        return False
    first = psds[0].schur
    return all(c.schur is first or first.compatible(c.schur) for c in psds[1:])


def make_kktsolver(cones, n_vars: int):
    """Return a ``kktsolver(W)`` callable for :func:`cvxopt.solvers.conelp`.

    ``cones`` must be in the order nonneg, soc, psd (the stacking order of
    the constraint matrix handed to cvxopt) and satisfy :func:`structured_cones`.
    """
    from cvxopt import matrix, misc

    if not structured_cones(cones):
        raise ValueError("structured KKT solver needs compatible Schur patterns on all PSD cones")
    lin = [c for c in cones if c.kind == "nonneg"]
    socs = [c for c in cones if c.kind == "soc"]
    psds = [c for c in cones if c.kind == "psd"]
    pat = psds[0].schur
    r, nw, s = pat.r, pat.nw, psds[0].dim
    Wstack = np.stack([c.schur.W for c in psds])  # (K, r, mT)
    n_psd = len(psds)
    # cone blocks carry G = -coeffs; the minus sign is applied at the edges
    G_lin = -sp.vstack([c.coeffs for c in lin]).toarray() if lin else np.zeros((0, n_vars))
    G_soc = [-c.coeffs.toarray() for c in socs]
    n_l = G_lin.shape[0]
    s_start = n_l + sum(c.dim for c in socs)
    phi = slice(pat.phi_start, pat.phi_start + pat.n_free)
    gi = pat.gamma_index
    a_idx, b_idx = pat.rows, pat.cols
    mT = Wstack.shape[2]

    def kktsolver(W):
        rti = np.stack([np.array(W["rti"][k]) for k in range(n_psd)])
        # scaled column of entry (a, b) is -(u_a v_b' + v_b u_a'); of gamma, -V V'
        U = np.matmul(rti[:, :r, :].transpose(0, 2, 1), Wstack)  # (K, s, mT)
        V = rti[:, r:, :].transpose(0, 2, 1)  # (K, s, nw)
        H = np.zeros((n_vars, n_vars))
        hpp, hg, hgg = hessian_blocks(pat, U, V)
        H[phi, phi] += hpp
        H[gi, phi] += hg
        H[phi, gi] += hg
        H[gi, gi] += hgg
        parts = [G_lin / np.array(W["d"]).reshape(-1, 1)] if n_l else []
        for k, Gq in enumerate(G_soc):
            v = np.array(W["v"][k]).reshape(-1)
            J = np.ones(v.size)
            J[1:] = -1.0
            Jv = J * v
            parts.append((2.0 * np.outer(Jv, Jv @ Gq) - J[:, None] * Gq) / W["beta"][k])
        Gs_small = np.vstack(parts) if parts else np.zeros((0, n_vars))
        H += Gs_small.T @ Gs_small
        try:
            factor = cho_factor(H, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise ArithmeticError(str(exc)) from exc

        def gs_t(Y):
            """``Gs' y`` restricted to the PSD rows; ``Y`` is (K, s, s) symmetric."""
            out = np.zeros(n_vars)
            P = np.matmul(np.matmul(U.transpose(0, 2, 1), Y), V).sum(axis=0)  # (mT, nw)
            vals = -2.0 * P[a_idx, b_idx]
            out[phi] = vals if pat.local is None else pat.local.T @ vals
            out[gi] = -np.einsum("kij,kij->", np.matmul(Y, V), V)
            return out

        def gs(x):
            """``Gs x`` on the PSD rows as a (K, s, s) stack."""
            Phi = np.zeros((mT, nw))
            Phi[a_idx, b_idx] = x[phi] if pat.local is None else pat.local @ x[phi]
            Z = np.matmul(np.matmul(U, Phi), V.transpose(0, 2, 1))
            return -(Z + Z.transpose(0, 2, 1) + x[gi] * np.matmul(V, V.transpose(0, 2, 1)))

        def solve(x, y, z):
            misc.scale(z, W, trans="T", inverse="I")
            zt = np.array(z).reshape(-1)
            Y = zt[s_start:].reshape(n_psd, s, s).transpose(0, 2, 1)  # column-major blocks
            Y = np.tril(Y) + np.swapaxes(np.tril(Y, -1), 1, 2)
            rhs = np.array(x).reshape(-1) + gs_t(Y)
            if s_start:
                rhs += Gs_small.T @ zt[:s_start]
            ux = cho_solve(factor, rhs)
            out = np.empty_like(zt)
            out[:s_start] = Gs_small @ ux - zt[:s_start]
            out[s_start:] = (gs(ux) - Y).transpose(0, 2, 1).reshape(-1)
            x[:] = matrix(ux)
            z[:] = matrix(out)

        return solve

    return kktsolver
