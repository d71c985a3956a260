"""Gauss-Lobatto-Legendre rules and tensor-product Lagrange bases.

1D nodes are the endpoints of [-1, 1] plus the roots of the Lobatto
polynomial (the derivative of the Legendre polynomial of the element
order). 2D quadrilateral bases are plain tensor products, with node k
mapped to the index pair (i, j) through k = j*(p+1) + i.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_ORDER = 12

_NEWTON_TOL = 1e-14
_NEWTON_MAXIT = 100


def legendre_with_derivs(p, x):
    """P_p(x), P'_p(x), P''_p(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    pk_m1 = np.ones_like(x)
    pk = x.copy()
    if p == 0:
        pk = pk_m1
    for k in range(1, p):
        pk, pk_m1 = ((2 * k + 1) * x * pk - k * pk_m1) / (k + 1), pk
    # derivatives from the standard identities; guard the endpoints where
    # (1 - x^2) vanishes by the closed forms there
    dp = np.empty_like(x)
    ddp = np.empty_like(x)
    interior = np.abs(x) < 1.0
    xi = x[interior]
    pi = pk[interior] if p > 0 else pk_m1[interior]
    pim1 = pk_m1[interior]
    one_m_x2 = 1.0 - xi * xi
    dpi = p * (pim1 - xi * pi) / one_m_x2 if p > 0 else np.zeros_like(xi)
    dp[interior] = dpi
    # Legendre ODE: (1-x^2) P'' - 2x P' + p(p+1) P = 0
    ddp[interior] = (2 * xi * dpi - p * (p + 1) * pi) / one_m_x2
    ends = ~interior
    if np.any(ends):
        s = np.sign(x[ends])
        dp[ends] = s ** (p + 1) * p * (p + 1) / 2.0
        ddp[ends] = s**p * (p - 1) * p * (p + 1) * (p + 2) / 8.0
    return pk, dp, ddp


def _lobatto_interior_nodes(p):
    """Roots of P'_p via Newton from Chebyshev-Lobatto seeds, bisection fallback."""
    if p < 2:
        return np.empty(0)
    seeds = np.cos(np.pi * np.arange(1, p) / p)[::-1]
    roots = []
    for x0 in seeds:
        x = x0
        ok = False
        for _ in range(_NEWTON_MAXIT):
            _, dp, ddp = legendre_with_derivs(p, np.array([x]))
            step = dp[0] / ddp[0]
            x -= step
            if abs(step) < _NEWTON_TOL:
                ok = True
                break
        if not ok or abs(x - x0) > 2.0 * np.pi / p:
            x = _bisect_dlegendre(p, x0)
        roots.append(x)
    roots = np.array(sorted(roots))
    # enforce exact antisymmetry
    roots = 0.5 * (roots - roots[::-1])
    return roots


def _bisect_dlegendre(p, seed):
    half = 0.45 * np.pi / p
    a, b = seed - half, seed + half
    fa = legendre_with_derivs(p, np.array([a]))[1][0]
    fb = legendre_with_derivs(p, np.array([b]))[1][0]
    if fa * fb > 0:
        raise ConfigError(f"bisection bracket failed for order {p}")
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = legendre_with_derivs(p, np.array([m]))[1][0]
        if fa * fm <= 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
        if b - a < 1e-16:
            break
    return 0.5 * (a + b)


@dataclass(frozen=True)
class GllBasis1d:
    """GLL nodes/weights of one direction plus Lagrange evaluators."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def shape_eval(self, i, xi):
        """N_{p,i}(xi) by the Lagrange product formula."""
        xs = self.nodes
        val = 1.0
        for j in range(self.order + 1):
            if j != i:
                val *= (xi - xs[j]) / (xs[i] - xs[j])
        return val

    def shape_deriv(self, i, xi):
        """dN_{p,i}/dxi from the derivative of the product."""
        xs = self.nodes
        total = 0.0
        for j in range(self.order + 1):
            if j == i:
                continue
            term = 1.0 / (xs[i] - xs[j])
            for k in range(self.order + 1):
                if k != i and k != j:
                    term *= (xi - xs[k]) / (xs[i] - xs[k])
            total += term
        return total

    def eval_all(self, xi):
        """Vector of all shape functions at xi."""
        return np.array([self.shape_eval(i, xi) for i in range(self.order + 1)])

    def eval_all_deriv(self, xi):
        return np.array([self.shape_deriv(i, xi) for i in range(self.order + 1)])

    def eval_matrix(self, x):
        """Shape-function values at many points: (npts, p+1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xs = self.nodes
        n = self.order + 1
        diff = x[:, None] - xs[None, :]
        out = np.empty((x.size, n))
        for i in range(n):
            denom = xs[i] - xs
            denom[i] = 1.0
            ratio = diff / denom
            ratio[:, i] = 1.0
            out[:, i] = np.prod(ratio, axis=1)
        return out

    def deriv_matrix(self, x):
        """Shape-function derivatives at many points: (npts, p+1).

        Uses prefix/suffix products of the Lagrange factors so the
        leave-one-out products need no divisions by possibly-zero terms.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xs = self.nodes
        n = self.order + 1
        diff = x[:, None] - xs[None, :]
        out = np.empty((x.size, n))
        pref = np.empty((x.size, n))
        suf = np.empty((x.size, n))
        for i in range(n):
            denom = xs[i] - xs
            denom[i] = 1.0
            ratio = diff / denom
            ratio[:, i] = 1.0
            pref[:, 0] = 1.0
            np.cumprod(ratio[:, :-1], axis=1, out=pref[:, 1:])
            suf[:, -1] = 1.0
            np.cumprod(ratio[:, :0:-1], axis=1, out=suf[:, -2::-1])
            coef = 1.0 / denom
            coef[i] = 0.0
            out[:, i] = (pref * suf) @ coef
        return out


def gll_rule(p):
    """GLL nodes and weights of order p (p+1 points)."""
    if p < 1:
        raise ConfigError("GLL rule needs order p >= 1 (p = 0 is degenerate)")
    if p > MAX_ORDER:
        raise ConfigError(f"order {p} exceeds the supported maximum {MAX_ORDER}")
    nodes = np.concatenate(([-1.0], _lobatto_interior_nodes(p), [1.0]))
    pk, _, _ = legendre_with_derivs(p, nodes)
    weights = 2.0 / (p * (p + 1) * pk**2)
    # symmetrize weights exactly
    weights = 0.5 * (weights + weights[::-1])
    return GllBasis1d(order=p, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class TensorBasis2d:
    """Tensor-product basis on [-1,1]^2, lexicographic node order (xi fastest)."""

    basis_xi: GllBasis1d
    basis_eta: GllBasis1d
    node_count: int = field(init=False)

    def __post_init__(self):
        n = (self.basis_xi.order + 1) * (self.basis_eta.order + 1)
        object.__setattr__(self, "node_count", n)

    @property
    def p(self):
        return self.basis_xi.order

    @property
    def q(self):
        return self.basis_eta.order

    def node_coords(self):
        """(n, 2) array of tensor node reference coordinates."""
        xi = self.basis_xi.nodes
        eta = self.basis_eta.nodes
        XI, ETA = np.meshgrid(xi, eta)  # rows vary eta, cols vary xi
        return np.column_stack([XI.ravel(), ETA.ravel()])

    def node_weights(self):
        """Tensor GLL quadrature weights in node order."""
        return np.outer(self.basis_eta.weights, self.basis_xi.weights).ravel()

    def shape_eval_2d(self, xi, eta):
        """Values (n,) and reference gradients (n, 2) of all shape functions."""
        nx = self.basis_xi.eval_all(xi)
        ny = self.basis_eta.eval_all(eta)
        dnx = self.basis_xi.eval_all_deriv(xi)
        dny = self.basis_eta.eval_all_deriv(eta)
        values = np.outer(ny, nx).ravel()
        grads = np.column_stack(
            [np.outer(ny, dnx).ravel(), np.outer(dny, nx).ravel()]
        )
        return values, grads

    def shape_eval_2d_batch(self, points):
        """Values (m, n) and reference gradients (m, n, 2) at m points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        nx = self.basis_xi.eval_matrix(pts[:, 0])
        dnx = self.basis_xi.deriv_matrix(pts[:, 0])
        ny = self.basis_eta.eval_matrix(pts[:, 1])
        dny = self.basis_eta.deriv_matrix(pts[:, 1])
        m = pts.shape[0]
        values = (ny[:, :, None] * nx[:, None, :]).reshape(m, -1)
        gx = (ny[:, :, None] * dnx[:, None, :]).reshape(m, -1)
        gy = (dny[:, :, None] * nx[:, None, :]).reshape(m, -1)
        return values, np.stack([gx, gy], axis=2)


def tensor_basis(p, q=None):
    if q is None:
        q = p
    bx = gll_rule(p)
    by = bx if q == p else gll_rule(q)
    return TensorBasis2d(basis_xi=bx, basis_eta=by)
