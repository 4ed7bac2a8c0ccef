"""Mapped-coordinate collocation solver for the Dirichlet-Neumann operator.

The fluid domain under the graph of eta is flattened by the vertical change
of variable

    y = -b + (sigma + 1) * h(x) / 2,     h(x) = eta(x) + b,   sigma in [-1, 1],

so sigma = 1 is the free surface and sigma = -1 the flat bottom.  The Laplace
problem is collocated with Fourier modes in x and Chebyshev-Lobatto points in
sigma; the no-flux bottom condition becomes u_sigma = 0 on the bottom row.
The resulting linear system is solved matrix-free by GMRES, preconditioned
with the x-averaged vertical-profile operator, which is block-diagonal over
Fourier modes and reduces to the exact flat-strip solver at eta = 0.

Infinite depth is handled by the same solver with b set to the configured
truncation depth.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import SolverStalled
from .fluid import EllipticSolveReport, FluidConfig, MappedElliptic
from .spectral import PeriodicGrid, SurfaceField, derivative, project_mean_zero


@lru_cache(maxsize=16)
def chebyshev_lobatto(nv: int):
    """Chebyshev-Lobatto nodes (descending, sigma_0 = 1) and the first-order
    differentiation matrix on them (Trefethen's construction)."""
    n = nv - 1
    sigma = np.cos(np.pi * np.arange(nv) / n)
    c = np.ones(nv)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(nv)
    X = np.tile(sigma, (nv, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(nv))
    D -= np.diag(D.sum(axis=1))
    sigma.flags.writeable = False
    D.flags.writeable = False
    return sigma, D


@lru_cache(maxsize=32)
def _strip_factors(grid: PeriodicGrid, nv: int, css_bytes: bytes,
                   cs_bytes: bytes):
    """Batched x-averaged collocation matrices

        diag(css_profile) D^2 + diag(cs_profile) D - |k|^2 I

    stacked over the distinct |k|^2 on the grid, plus padded gather/scatter
    indices mapping Fourier columns to their |k|^2 group.  The
    sigma-profiles are the horizontal averages of the mapped-Laplacian
    coefficients, quantized so nearby surfaces share matrices."""
    _, D = chebyshev_lobatto(nv)
    D2 = D @ D
    css = np.frombuffer(css_bytes).reshape(nv, 1)
    cs = np.frombuffer(cs_bytes).reshape(nv, 1)
    base = css * D2 + cs * D
    absk2 = (grid.abs_k() ** 2).reshape(-1)
    groups = {}
    for col, k2 in enumerate(absk2):
        groups.setdefault(round(float(k2), 8), []).append(col)
    k2vals = sorted(groups)
    ngroup = len(k2vals)
    maxc = max(len(c) for c in groups.values())
    stack = np.empty((ngroup, nv, nv))
    cols = np.zeros((ngroup, maxc), dtype=np.int64)
    mask = np.zeros((ngroup, maxc), dtype=bool)
    for gi, k2 in enumerate(k2vals):
        A = base - k2 * np.eye(nv)
        A[0, :] = 0.0
        A[0, 0] = 1.0
        A[-1, :] = D[-1, :]
        stack[gi] = A
        cs_cols = groups[k2]
        cols[gi, :len(cs_cols)] = cs_cols
        mask[gi, :len(cs_cols)] = True
    # explicit inverses make every preconditioner application a batched
    # matmul; GMRES polishes away their O(cond*eps) forward error
    inv_stack = np.linalg.inv(stack)
    return inv_stack, cols, mask


class MappedEllipticDN:
    """DN operator for one fixed surface eta; reusable across many g.

    Pure evaluation: apply() never mutates the context, so one instance can
    serve concurrent callers.
    """

    def __init__(self, eta: SurfaceField, cfg: FluidConfig,
                 backend: MappedElliptic | None = None):
        self.backend = backend if backend is not None else MappedElliptic()
        cfg.check_admissible(eta)
        self.cfg = cfg
        self.grid = eta.grid
        self.eta = eta
        nv = self.backend.vertical_points
        self.nv = nv
        self.sigma, self.D = chebyshev_lobatto(nv)
        self.D2 = self.D @ self.D
        self._sp_axes = tuple(range(1, self.grid.d + 1))

        b = cfg.effective_depth(eta)
        h = eta.values + b
        self.h = h

        ks = self.grid.wavenumbers()
        self.ik = [1j * k[None, ...] for k in ks]
        self.absk2 = (self.grid.abs_k() ** 2)[None, ...]

        # geometry coefficients of the mapped Laplacian:
        #   lap psi = lap_x u + 2 sum_i sgx_i d_i(u_s) + css u_ss + cs u_s
        sp1 = (self.sigma + 1.0).reshape((nv,) + (1,) * self.grid.d)
        deta = []
        d2eta = []
        for ax in range(self.grid.d):
            e1 = tuple(1 if i == ax else 0 for i in range(self.grid.d))
            e2 = tuple(2 if i == ax else 0 for i in range(self.grid.d))
            deta.append(derivative(eta, e1).values)
            d2eta.append(derivative(eta, e2).values)
        self.deta = deta
        self._curved = any(np.any(dh) for dh in deta)
        self.sgx = [-sp1 * dh[None] / h[None] for dh in deta]
        self.css = sum(s**2 for s in self.sgx) + 4.0 / h[None] ** 2
        self.cs = sum(
            -sp1 * (d2[None] / h[None] - 2.0 * dh[None] ** 2 / h[None] ** 2)
            for dh, d2 in zip(deta, d2eta))
        self.gradsq_top = sum(dh**2 for dh in deta)
        # coarse quantization keeps the matrix stack shared across the
        # slowly drifting surfaces of a time integration
        css_prof = np.round(self.css.mean(axis=self._sp_axes), 3)
        cs_prof = np.round(self.cs.mean(axis=self._sp_axes), 3)
        self._factors = _strip_factors(self.grid, nv, css_prof.tobytes(),
                                       cs_prof.tobytes())
        # split the coefficients into the x-averaged profile (kept full-band,
        # matching the preconditioner) and the variation, whose products are
        # dealiased: the preconditioned operator is then exactly the identity
        # on the upper third of the spectrum, where no smooth solution lives,
        # which keeps the Krylov iteration in the resolved band
        shape1 = (nv,) + (1,) * self.grid.d
        self.css_prof = css_prof.reshape(shape1)
        self.cs_prof = cs_prof.reshape(shape1)
        self.css_var = self.css - self.css_prof
        self.cs_var = self.cs - self.cs_prof
        keep = np.ones(self.grid.shape, dtype=bool)
        for k in ks:
            keep &= np.abs(k) <= self.grid.n / 3.0
        self.band = keep[None, ...]

    # -- linear algebra pieces ------------------------------------------------

    def _dx(self, uhat, ax):
        return np.fft.ifftn(uhat * self.ik[ax], axes=self._sp_axes).real

    def _operator(self, u):
        us = np.tensordot(self.D, u, axes=(1, 0))
        uss = np.tensordot(self.D2, u, axes=(1, 0))
        uhat = np.fft.fftn(u, axes=self._sp_axes)
        acc = uhat * (-self.absk2)
        acc += np.fft.fftn(self.css_prof * uss + self.cs_prof * us,
                           axes=self._sp_axes)
        var = self.css_var * uss + self.cs_var * us
        if self._curved:
            us_hat = np.fft.fftn(us, axes=self._sp_axes)
            for ax in range(self.grid.d):
                var += 2.0 * self.sgx[ax] * self._dx(us_hat, ax)
        acc += np.fft.fftn(var, axes=self._sp_axes) * self.band
        out = np.fft.ifftn(acc, axes=self._sp_axes).real
        out[0] = u[0]
        out[-1] = us[-1]
        return out

    def _precondition(self, r):
        rhat = np.fft.fftn(r, axes=self._sp_axes).reshape(self.nv, -1)
        inv_stack, cols, mask = self._factors
        # gather columns per |k|^2 group, batched matmul, scatter back
        b = rhat[:, cols]                      # (nv, ngroup, maxc) complex
        b = np.moveaxis(b, 0, 1)               # (ngroup, nv, maxc)
        rhs = np.concatenate([b.real, b.imag], axis=2)
        x = inv_stack @ rhs
        maxc = cols.shape[1]
        xc = x[:, :, :maxc] + 1j * x[:, :, maxc:]
        out = np.empty_like(rhat)
        out[:, cols[mask]] = np.moveaxis(xc, 1, 0)[:, mask]
        out = out.reshape((self.nv,) + self.grid.shape)
        return np.fft.ifftn(out, axes=self._sp_axes).real

    def _solve(self, rhs, guess=None):
        """Solve the collocation system; convergence is measured on the
        flat-strip-preconditioned residual (solution-space units), which is
        also GMRES's left-preconditioned stopping criterion."""
        shape = rhs.shape

        def matvec(v):
            return self._operator(v.reshape(shape)).reshape(-1)

        def psolve(v):
            return self._precondition(v.reshape(shape)).reshape(-1)

        rhs_flat = rhs.reshape(-1)
        x0 = psolve(rhs_flat)
        pb_norm = float(np.linalg.norm(x0))

        def presid(xv):
            return float(np.linalg.norm(psolve(matvec(xv) - rhs_flat))) / pb_norm

        x = guess.reshape(-1).copy() if guess is not None else x0
        resid = presid(x)
        iters = 0
        tol = self.backend.solver_tol
        if resid > tol:
            nunk = rhs_flat.size
            A = LinearOperator((nunk, nunk), matvec=matvec)
            M = LinearOperator((nunk, nunk), matvec=psolve)
            count = [0]

            def cb(_):
                count[0] += 1

            # the preconditioned operator is non-normal; restarts stall it,
            # so run with a restart window covering the whole budget
            window = min(self.backend.max_iter, 300)
            rtol = tol
            for _ in range(2):
                x, _ = gmres(A, rhs_flat, x0=x, rtol=rtol, atol=0.0, M=M,
                             restart=window,
                             maxiter=max(1, self.backend.max_iter // window),
                             callback=cb, callback_type="pr_norm")
                resid = presid(x)
                iters = count[0]
                if resid <= tol:
                    break
                rtol *= 1e-2
            if resid > tol:
                raise SolverStalled(
                    f"elliptic solve stalled at residual {resid:.3e} "
                    f"(tol {tol:.1e}) after {iters} iterations")
        return x.reshape(shape), iters, resid

    # -- public surface ---------------------------------------------------------

    def extension(self, g: SurfaceField, guess_u=None):
        """Solve for the harmonic extension in mapped coordinates;
        `guess_u` warm-starts the Krylov iteration (time steppers pass the
        previous stage's extension)."""
        rhs = np.zeros((self.nv,) + self.grid.shape)
        rhs[0] = g.values
        return self._solve(rhs, guess=guess_u)

    def apply(self, g: SurfaceField, guess_u=None, return_extension=False):
        """Evaluate G[eta] g; returns (mean-zero field, solve report), plus
        the mapped extension when return_extension is set."""
        if g.grid != self.grid:
            raise ValueError("grid mismatch")
        if g.l2_norm() == 0.0:
            report = EllipticSolveReport(0, 0.0, self.backend)
            zero = SurfaceField.zero(self.grid)
            if return_extension:
                return zero, report, np.zeros((self.nv,) + self.grid.shape)
            return zero, report
        u, iters, resid = self.extension(g, guess_u)
        us_top = np.tensordot(self.D[0], u, axes=(0, 0))
        vals = (2.0 / self.h) * (1.0 + self.gradsq_top) * us_top
        for ax in range(self.grid.d):
            e1 = tuple(1 if i == ax else 0 for i in range(self.grid.d))
            vals -= self.deta[ax] * derivative(g, e1).values
        raw = SurfaceField(self.grid, values=vals)
        defect = abs(raw.mean)
        report = EllipticSolveReport(iters, resid, self.backend,
                                     mean_defect=defect)
        out = project_mean_zero(raw)
        if return_extension:
            return out, report, u
        return out, report


# Small LRU of operator contexts keyed by surface content; the expensive
# per-depth preconditioner factorizations are cached separately above.
_CONTEXTS: OrderedDict = OrderedDict()
_CONTEXT_CAP = 8


def _context_key(eta, cfg, backend):
    digest = hashlib.sha256(np.ascontiguousarray(eta.values).tobytes())
    return (digest.hexdigest(), eta.grid, cfg, backend)


def elliptic_context(eta: SurfaceField, cfg: FluidConfig,
                     backend: MappedElliptic | None = None):
    """Shared MappedEllipticDN instance for this exact surface."""
    backend = backend if backend is not None else MappedElliptic()
    key = _context_key(eta, cfg, backend)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = MappedEllipticDN(eta, cfg, backend)
        _CONTEXTS[key] = ctx
        while len(_CONTEXTS) > _CONTEXT_CAP:
            _CONTEXTS.popitem(last=False)
    else:
        _CONTEXTS.move_to_end(key)
    return ctx


def dn_elliptic(eta: SurfaceField, g: SurfaceField, cfg: FluidConfig,
                backend: MappedElliptic | None = None):
    """One evaluation of G[eta] g by the mapped collocation solver."""
    return elliptic_context(eta, cfg, backend).apply(g)
