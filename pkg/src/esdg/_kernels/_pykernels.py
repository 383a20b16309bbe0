"""NumPy implementation of the hot kernels.

Array conventions: modal coefficients are (n_cells, k+1), values at
quadrature nodes are (n_cells, Q).  ``tabs`` is a :class:`KernelTables`.
"""
from __future__ import annotations

import numpy as np

FALLBACK_ERROR = 0
FALLBACK_FLATTEN = 1
# keeps squeezed minima on the safe side of the floor under rounding
SQUEEZE_MARGIN = 1.0 - 1e-12
# below this mean the squeeze has no precision left; flatten to the mean
TINY_MEAN = 1e-290


def compute_q(u, tabs, phi_q, hprime, needs_positivity=False):
    """Cell-wise L2 projection of Phi + H'(u).  Returns (q, bad_cell)."""
    uq = u @ tabs.V.T
    if needs_positivity:
        bad = np.nonzero((uq <= 0.0).any(axis=1))[0]
        if bad.size:
            return None, int(bad[0])
    vals = phi_q + hprime(uq)
    if not np.all(np.isfinite(vals)):
        bad = np.nonzero(~np.isfinite(vals).all(axis=1))[0]
        return None, int(bad[0])
    return vals @ tabs.P.T, -1


def rhs(u, q, tabs, mobility, h, dirichlet=None):
    """Time derivative of the modal coefficients.

    ``dirichlet`` is None for zero-flux boundaries, otherwise
    (mob_a, mob_b, q_a, q_b): the mobility and q evaluated at the boundary data.
    """
    beta0 = tabs.beta0
    uq = u @ tabs.V.T
    qxi = q @ tabs.Vd.T
    fq = mobility(uq)
    r1 = -((fq * qxi) * tabs.w) @ tabs.Vd

    u_right = u @ tabs.Lp1  # trace at xi = +1 of every cell
    u_left = u @ tabs.Lm1
    f_right = mobility(u_right)
    f_left = mobility(u_left)

    fsum = f_right[:-1] + f_left[1:]
    g = -(q[:-1] @ tabs.Dvec) + q[1:] @ tabs.Evec
    jump = q[:-1] @ tabs.Lp1 - q[1:] @ tabs.Lm1
    fg = (fsum * g)[:, None]
    fj = (fsum * jump)[:, None]

    r23 = np.zeros_like(u)
    r23[:-1] += fg * tabs.Lp1 + fj * tabs.Dp1
    r23[1:] += -fg * tabs.Lm1 + fj * tabs.Dm1

    if dirichlet is not None:
        mob_a, mob_b, q_a, q_b = dirichlet
        q0 = q[0]
        fs = mob_a + f_left[0]
        ql = q0 @ tabs.Lm1
        r23[0] += -fs * (beta0 * (ql - q_a) + 2.0 * (q0 @ tabs.Dm1)) * tabs.Lm1
        r23[0] += fs * (q_a - ql) * tabs.Dm1
        qn = q[-1]
        fs = f_right[-1] + mob_b
        qr = qn @ tabs.Lp1
        r23[-1] += fs * (-beta0 * (qr - q_b) + 2.0 * (qn @ tabs.Dp1)) * tabs.Lp1
        r23[-1] += fs * (qr - q_b) * tabs.Dp1

    return tabs.minv * ((2.0 / h) * r1 + (0.5 / h) * r23)


def cell_min_monomial(u):
    """Exact minimum over [-1, 1] of each cell polynomial (k <= 3)."""
    n, nm = u.shape
    c = np.zeros((n, 4))
    c[:, :nm] = u
    a0 = c[:, 0] - 0.5 * c[:, 2]
    a1 = c[:, 1] - 1.5 * c[:, 3]
    a2 = 1.5 * c[:, 2]
    a3 = 2.5 * c[:, 3]

    def p(x):
        return a0 + x * (a1 + x * (a2 + x * a3))

    best = np.minimum(p(-1.0), p(1.0))
    # stationary points of a1 + 2 a2 x + 3 a3 x^2
    A, B, C = 3.0 * a3, 2.0 * a2, a1
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = A != 0.0
        disc = B * B - 4.0 * A * C
        sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
        qq = -0.5 * (B + np.copysign(sq, B))
        r1 = np.where(quad, qq / A, np.where(B != 0.0, -C / B, 2.0))
        r2 = np.where(quad & (qq != 0.0), C / qq, 2.0)
        ok = (~quad) | (disc >= 0.0)
    for r in (r1, r2):
        inside = ok & (r > -1.0) & (r < 1.0)
        best = np.where(inside, np.minimum(best, p(np.where(inside, r, 0.0))), best)
    return best


def cell_min_general(u):
    """Exact minimum via derivative roots for any degree (slow path)."""
    from numpy.polynomial import legendre as leg

    out = np.empty(u.shape[0])
    for j, c in enumerate(u):
        cand = [-1.0, 1.0]
        if c.size > 2:
            roots = leg.legroots(leg.legder(c))
            cand.extend(r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and -1 < r.real < 1)
        out[j] = min(leg.legval(x, c) for x in cand)
    return out


def cell_min(u):
    if u.shape[1] <= 4:
        return cell_min_monomial(u)
    return cell_min_general(u)


def limit(u, delta, skip_zero, fallback):
    """Average-preserving squeeze so every cell minimum is >= delta.

    Returns (new_u, n_limited, failed_cells).  With FALLBACK_ERROR the
    returned array is the partially processed input and ``failed_cells`` is
    non-empty; with FALLBACK_FLATTEN failed cells become constant
    max(avg, delta).
    """
    avg = u[:, 0]
    mins = cell_min(u)
    need = mins < delta
    if skip_zero:
        need &= np.any(u != 0.0, axis=1)
    if not need.any():
        return u, 0, np.empty(0, dtype=int)
    fail = need & (avg <= delta)
    squeeze = need & ~fail
    out = u.copy()
    if squeeze.any():
        theta = SQUEEZE_MARGIN * (avg[squeeze] - delta) / (avg[squeeze] - mins[squeeze])
        theta[avg[squeeze] < TINY_MEAN] = 0.0
        out[squeeze, 1:] *= theta[:, None]
    failed = np.nonzero(fail)[0]
    if failed.size and fallback == FALLBACK_FLATTEN:
        out[failed, 0] = np.maximum(avg[failed], delta)
        out[failed, 1:] = 0.0
    return out, int(squeeze.sum()), failed
