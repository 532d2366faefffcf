"""Numpy implementations of the hot loops.

Same signatures and array conventions as the compiled ``_ext`` module; used
when the extension is not built or when ``DAMPWAVE_BACKEND=pure``.  Results
agree with the compiled kernels to roundoff, not bit for bit (reduction order
differs).
"""
import numpy as np


def _elastic_box(u, a2, c2, dx, i0, i1, j0, j1):
    idx2 = 1.0 / (dx * dx)
    iq = 0.25 / (dx * dx)
    c = u[:, i0:i1, j0:j1]
    d11 = (u[:, i0 + 1:i1 + 1, j0:j1] - 2.0 * c + u[:, i0 - 1:i1 - 1, j0:j1]) * idx2
    d22 = (u[:, i0:i1, j0 + 1:j1 + 1] - 2.0 * c + u[:, i0:i1, j0 - 1:j1 - 1]) * idx2
    d12 = (u[:, i0 + 1:i1 + 1, j0 + 1:j1 + 1] - u[:, i0 + 1:i1 + 1, j0 - 1:j1 - 1]
           - u[:, i0 - 1:i1 - 1, j0 + 1:j1 + 1] + u[:, i0 - 1:i1 - 1, j0 - 1:j1 - 1]) * iq
    L1 = a2 * (d11[0] + d22[0]) + c2 * (d11[0] + d12[1])
    L2 = a2 * (d11[1] + d22[1]) + c2 * (d12[0] + d22[1])
    return L1, L2


def leapfrog_step(up, uc, un, V, inv_den, v, a2, c2, dx, dt, i0, i1, j0, j1):
    L1, L2 = _elastic_box(uc, a2, c2, dx, i0, i1, j0, j1)
    box = (slice(i0, i1), slice(j0, j1))
    vv = V[box]
    pp = up[(slice(None),) + box]
    cc = uc[(slice(None),) + box]
    Lu = np.stack((L1, L2))
    new = (2.0 * cc - pp + dt * dt * Lu + 0.5 * dt * vv * pp) * inv_den[box]
    un[(slice(None),) + box] = new
    v[(slice(None),) + box] += 0.5 * dt * (pp + cc)
    w = (new - pp) * (0.5 / dt)
    wsq = w[0] ** 2 + w[1] ** 2
    usq = cc[0] ** 2 + cc[1] ** 2
    cell = dx * dx
    return (
        float(wsq.sum()) * cell,
        float((vv * wsq).sum()) * cell,
        -float((cc * Lu).sum()) * cell,
        float(usq.sum()) * cell,
        float((vv * usq).sum()) * cell,
        float((cc * w).sum()) * cell,
    )


def elastic_apply(u, out, a2, c2, dx, i0, i1, j0, j1):
    L1, L2 = _elastic_box(u, a2, c2, dx, i0, i1, j0, j1)
    out[0, i0:i1, j0:j1] = L1
    out[1, i0:i1, j0:j1] = L2


def _log_corner(x, y):
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        s = x * y * (np.log(np.where(r2 > 0, r2, 1.0)) - 3.0)
        s = s + np.where(x != 0, x * x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
        s = s + np.where(y != 0, y * y * np.arctan(x / np.where(y != 0, y, 1.0)), 0.0)
    return np.where(r2 > 0, 0.5 * s, 0.0)


def _grad_corner(x, y):
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        s = 0.5 * y * np.log(np.where(r2 > 0, r2, 1.0))
        s = s + np.where(x != 0, x * np.arctan(y / np.where(x != 0, x, 1.0)), 0.0)
    return np.where(r2 > 0, s, 0.0)


def cell_integrals(X, Y, dx):
    """Exact integrals of log|x-y| and grad_x log|x-y| over the source cell,
    for offsets ``X, Y = x - y_center`` (arrays)."""
    hd = 0.5 * dx
    a1, b1, a2, b2 = -X - hd, -X + hd, -Y - hd, -Y + hd
    k = _log_corner(b1, b2) - _log_corner(a1, b2) - _log_corner(b1, a2) + _log_corner(a1, a2)
    gx = -(_grad_corner(b1, b2) - _grad_corner(a1, b2) - _grad_corner(b1, a2) + _grad_corner(a1, a2))
    gy = -(_grad_corner(b2, b1) - _grad_corner(a2, b1) - _grad_corner(b2, a1) + _grad_corner(a2, a1))
    return k, gx, gy


def potential_direct(sx, sy, rho, ex, ey, dx, near, chunk=256):
    P = ex.shape[0]
    h = np.zeros((2, P))
    g = np.zeros((2, 2, P))
    cell = dx * dx
    # lattice pairs at exactly ``near`` must land on the far side under round-off
    near2 = near * near * (1.0 - 1e-9)
    for start in range(0, P, chunk):
        sl = slice(start, min(start + chunk, P))
        X = ex[sl, None] - sx[None, :]
        Y = ey[sl, None] - sy[None, :]
        r2 = X * X + Y * Y
        far = r2 >= near2
        safe = np.where(far, r2, 1.0)
        k = 0.5 * cell * np.log(safe)
        gx = cell * X / safe
        gy = cell * Y / safe
        if not far.all():
            idx = np.nonzero(~far)
            kn, gxn, gyn = cell_integrals(X[idx], Y[idx], dx)
            k[idx] = kn
            gx[idx] = gxn
            gy[idx] = gyn
        h[:, sl] = (k @ rho.T).T
        g[:, 0, sl] = (gx @ rho.T).T
        g[:, 1, sl] = (gy @ rho.T).T
    scale = -1.0 / (2.0 * np.pi)
    return scale * h, scale * g
