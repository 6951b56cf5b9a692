"""Element loops for the von Karman internal force, its tangent and energy.

Two interchangeable implementations live here: numba-compiled loops and a
vectorised numpy path.  ``TRANSBEAM_NUMBA=0`` (or numba being absent) selects
numpy.  Both take the same arrays:

    z       full DOF vector (constrained entries zero)
    tdofs   (ne, 4) transverse element map     ldofs  (ne, 3) longitudinal map
    t1, t2  (ne, nq, 4) Hermite x-derivatives  l1     (ne, nq, 3) Lagrange x-derivative
    wq      (ne, nq) physical weights          lam    (ne,) bending stiffness
    seg     (ne,) segment id                   coupling  1.0 full model, 0.0 linear

``coupling`` multiplies the quadratic part of the membrane strain
``omega_x + coupling * phi_x**2 / 2``.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_wants_numba() -> bool:
    flag = os.environ.get("TRANSBEAM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def _np_fields(z, tdofs, ldofs, t1, t2, l1):
    a = z[tdofs]
    c = z[ldofs]
    px = np.einsum("eqk,ek->eq", t1, a)
    pxx = np.einsum("eqk,ek->eq", t2, a)
    wx = np.einsum("eqj,ej->eq", l1, c)
    return px, pxx, wx


def force_numpy(z, tdofs, ldofs, t1, t2, l1, wq, lam, coupling):
    px, pxx, wx = _np_fields(z, tdofs, ldofs, t1, t2, l1)
    strain = wx + 0.5 * coupling * px * px
    ft = (np.einsum("eq,eqk->ek", wq * lam[:, None] * pxx, t2)
          + np.einsum("eq,eqk->ek", wq * coupling * strain * px, t1))
    fl = np.einsum("eq,eqj->ej", wq * strain, l1)
    out = np.zeros(z.shape[0])
    np.add.at(out, tdofs, ft)
    np.add.at(out, ldofs, fl)
    return out


def tangent_numpy(z, tdofs, ldofs, t1, t2, l1, wq, lam, coupling):
    px, _, wx = _np_fields(z, tdofs, ldofs, t1, t2, l1)
    strain = wx + 0.5 * coupling * px * px
    ne = tdofs.shape[0]
    ke = np.zeros((ne, 7, 7))
    ke[:, :4, :4] = (np.einsum("eq,eqk,eql->ekl", wq * lam[:, None], t2, t2)
                     + np.einsum("eq,eqk,eql->ekl",
                                 wq * coupling * (strain + coupling * px * px), t1, t1))
    tl = np.einsum("eq,eqk,eqj->ekj", wq * coupling * px, t1, l1)
    ke[:, :4, 4:] = tl
    ke[:, 4:, :4] = np.transpose(tl, (0, 2, 1))
    ke[:, 4:, 4:] = np.einsum("eq,eqj,eqm->ejm", wq, l1, l1)
    return ke


def energy_numpy(z, tdofs, ldofs, t1, t2, l1, wq, lam, seg, coupling):
    """Returns [bending_left, bending_right, q_left, q_right] (lambda-weighted bending)."""
    px, pxx, wx = _np_fields(z, tdofs, ldofs, t1, t2, l1)
    strain = wx + 0.5 * coupling * px * px
    bend = (wq * lam[:, None] * pxx * pxx).sum(axis=1)
    q = (wq * strain * strain).sum(axis=1)
    out = np.zeros(4)
    for s in (0, 1):
        mask = seg == s
        out[s] = bend[mask].sum()
        out[2 + s] = q[mask].sum()
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

def _force_loop(z, tdofs, ldofs, t1, t2, l1, wq, lam, coupling):
    ne, nq = wq.shape
    out = np.zeros(z.shape[0])
    for e in range(ne):
        a = np.empty(4)
        c = np.empty(3)
        for k in range(4):
            a[k] = z[tdofs[e, k]]
        for j in range(3):
            c[j] = z[ldofs[e, j]]
        for q in range(nq):
            px = 0.0
            pxx = 0.0
            wx = 0.0
            for k in range(4):
                px += t1[e, q, k] * a[k]
                pxx += t2[e, q, k] * a[k]
            for j in range(3):
                wx += l1[e, q, j] * c[j]
            strain = wx + 0.5 * coupling * px * px
            w = wq[e, q]
            bend = w * lam[e] * pxx
            memb = w * coupling * strain * px
            for k in range(4):
                out[tdofs[e, k]] += bend * t2[e, q, k] + memb * t1[e, q, k]
            for j in range(3):
                out[ldofs[e, j]] += w * strain * l1[e, q, j]
    return out


def _tangent_loop(z, tdofs, ldofs, t1, t2, l1, wq, lam, coupling):
    ne, nq = wq.shape
    ke = np.zeros((ne, 7, 7))
    for e in range(ne):
        a = np.empty(4)
        c = np.empty(3)
        for k in range(4):
            a[k] = z[tdofs[e, k]]
        for j in range(3):
            c[j] = z[ldofs[e, j]]
        for q in range(nq):
            px = 0.0
            wx = 0.0
            for k in range(4):
                px += t1[e, q, k] * a[k]
            for j in range(3):
                wx += l1[e, q, j] * c[j]
            strain = wx + 0.5 * coupling * px * px
            w = wq[e, q]
            geo = w * coupling * (strain + coupling * px * px)
            cross = w * coupling * px
            for k in range(4):
                for m in range(4):
                    ke[e, k, m] += (w * lam[e] * t2[e, q, k] * t2[e, q, m]
                                    + geo * t1[e, q, k] * t1[e, q, m])
                for j in range(3):
                    val = cross * t1[e, q, k] * l1[e, q, j]
                    ke[e, k, 4 + j] += val
                    ke[e, 4 + j, k] += val
            for j in range(3):
                for m in range(3):
                    ke[e, 4 + j, 4 + m] += w * l1[e, q, j] * l1[e, q, m]
    return ke


def _energy_loop(z, tdofs, ldofs, t1, t2, l1, wq, lam, seg, coupling):
    ne, nq = wq.shape
    out = np.zeros(4)
    for e in range(ne):
        s = seg[e]
        for q in range(nq):
            px = 0.0
            pxx = 0.0
            wx = 0.0
            for k in range(4):
                zk = z[tdofs[e, k]]
                px += t1[e, q, k] * zk
                pxx += t2[e, q, k] * zk
            for j in range(3):
                wx += l1[e, q, j] * z[ldofs[e, j]]
            strain = wx + 0.5 * coupling * px * px
            out[s] += wq[e, q] * lam[e] * pxx * pxx
            out[2 + s] += wq[e, q] * strain * strain
    return out


if numba is not None:
    force_numba = numba.njit(cache=True)(_force_loop)
    tangent_numba = numba.njit(cache=True)(_tangent_loop)
    energy_numba = numba.njit(cache=True)(_energy_loop)
else:  # pragma: no cover
    force_numba = tangent_numba = energy_numba = None

USE_NUMBA = numba is not None and _env_wants_numba()

if USE_NUMBA:
    internal_force = force_numba
    element_tangents = tangent_numba
    energy_parts = energy_numba
else:
    internal_force = force_numpy
    element_tangents = tangent_numpy
    energy_parts = energy_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
