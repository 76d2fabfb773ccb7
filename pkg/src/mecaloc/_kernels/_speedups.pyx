# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors _reference.py operation for operation.

Keep the two files in sync: any change here must land in _reference.py
as well, in the same order of floating-point operations.
"""

from libc.math cimport ceil, cos, sin, sqrt, NAN, pi


cdef inline double _wrap(double theta) noexcept nogil:
    return theta - 2.0 * pi * ceil((theta - pi) / (2.0 * pi))


cdef inline bint _posdef(double p00, double p01, double p02,
                         double p11, double p12, double p22) noexcept nogil:
    cdef double det
    if p00 <= 0.0:
        return 0
    if p00 * p11 - p01 * p01 <= 0.0:
        return 0
    det = (p00 * (p11 * p22 - p12 * p12)
           - p01 * (p01 * p22 - p12 * p02)
           + p02 * (p01 * p12 - p11 * p02))
    return det > 0.0


def accumulate_poses(double x0, double y0, double th0,
                     double[:, ::1] twists, double[::1] dts,
                     double[:, ::1] out):
    """Fold Euler pose steps over twists (n,3) for durations dts (n,) into out (n,3)."""
    cdef Py_ssize_t n = dts.shape[0]
    cdef Py_ssize_t i
    cdef double x = x0, y = y0, th = th0
    cdef double vx, vy, om, dt, c, s
    with nogil:
        for i in range(n):
            vx = twists[i, 0]
            vy = twists[i, 1]
            om = twists[i, 2]
            dt = dts[i]
            c = cos(th)
            s = sin(th)
            x = x + dt * (vx * c - vy * s)
            y = y + dt * (vx * s + vy * c)
            th = _wrap(th + dt * om)
            out[i, 0] = x
            out[i, 1] = y
            out[i, 2] = th


cdef inline void _store(double[:, ::1] out_pose, double[:, ::1] out_cov,
                        double[::1] out_nis, signed char[::1] out_applied,
                        Py_ssize_t i, double x, double y, double th,
                        double p00, double p01, double p02,
                        double p11, double p12, double p22,
                        double nis, signed char applied) noexcept nogil:
    out_pose[i, 0] = x
    out_pose[i, 1] = y
    out_pose[i, 2] = th
    out_cov[i, 0] = p00
    out_cov[i, 1] = p01
    out_cov[i, 2] = p02
    out_cov[i, 3] = p01
    out_cov[i, 4] = p11
    out_cov[i, 5] = p12
    out_cov[i, 6] = p02
    out_cov[i, 7] = p12
    out_cov[i, 8] = p22
    out_nis[i] = nis
    out_applied[i] = applied


def run_filter_events(double x0, double y0, double th0,
                      double[:, ::1] p0,
                      double[::1] ev_t, signed char[::1] ev_kind,
                      double[::1] ev_a, double[::1] ev_b, double[::1] ev_c,
                      double q_vx, double q_vy, double q_om,
                      double r_ips, double gate,
                      double[:, ::1] out_pose, double[:, ::1] out_cov,
                      double[::1] out_nis, signed char[::1] out_applied):
    """Run the full predict/update event loop; see _reference.run_filter_events."""
    cdef Py_ssize_t n = ev_t.shape[0]
    cdef Py_ssize_t i
    cdef double x = x0, y = y0, th = th0
    cdef double p00 = p0[0, 0], p01 = p0[0, 1], p02 = p0[0, 2]
    cdef double p11 = p0[1, 1], p12 = p0[1, 2], p22 = p0[2, 2]
    cdef double qvx2 = q_vx * q_vx, qvy2 = q_vy * q_vy, qom2 = q_om * q_om
    cdef double r2 = r_ips * r_ips
    cdef double last_vx = 0.0, last_vy = 0.0, last_om = 0.0
    cdef double t_prev = ev_t[0] if n > 0 else 0.0
    cdef int status = 0
    cdef Py_ssize_t fail = -1
    cdef signed char kind, applied
    cdef double t, dt, nis, uvx, uvy, uom, c, s, a02, a12, dt2
    cdef double fp00, fp01, fp02, fp10, fp11, fp12, n00, n01, n11
    cdef double zx, zy, s00, s01, s11, det_s, tr, disc, lmin, lmax
    cdef double i00, i01, i11, yx, yy
    cdef double k00, k01, k10, k11, k20, k21, m00, m11
    cdef double n01a, n02a, n01b, n12a, n02b, n12b, n02, n12, n22

    with nogil:
        for i in range(n):
            t = ev_t[i]
            dt = t - t_prev
            if dt < 0.0:
                status = 1
                fail = i
                break
            kind = ev_kind[i]
            nis = NAN
            applied = 0

            if kind == 0:
                uvx = ev_a[i]
                uvy = ev_b[i]
                uom = ev_c[i]
            else:
                uvx = last_vx
                uvy = last_vy
                uom = last_om

            if dt > 0.0:
                c = cos(th)
                s = sin(th)
                a02 = -dt * (uvx * s + uvy * c)
                a12 = dt * (uvx * c - uvy * s)
                x = x + dt * (uvx * c - uvy * s)
                y = y + dt * (uvx * s + uvy * c)
                th = _wrap(th + dt * uom)
                fp00 = p00 + a02 * p02
                fp01 = p01 + a02 * p12
                fp02 = p02 + a02 * p22
                fp10 = p01 + a12 * p02
                fp11 = p11 + a12 * p12
                fp12 = p12 + a12 * p22
                n00 = fp00 + a02 * fp02
                n01 = 0.5 * ((fp01 + a12 * fp02) + (fp10 + a02 * fp12))
                n11 = fp11 + a12 * fp12
                p00 = n00
                p01 = n01
                p02 = fp02
                p11 = n11
                p12 = fp12
                dt2 = dt * dt
                p00 = p00 + dt2 * (c * c * qvx2 + s * s * qvy2)
                p01 = p01 + dt2 * (c * s * (qvx2 - qvy2))
                p11 = p11 + dt2 * (s * s * qvx2 + c * c * qvy2)
                p22 = p22 + dt2 * qom2
                if not _posdef(p00, p01, p02, p11, p12, p22):
                    status = 2
                    fail = i
            if status != 0:
                _store(out_pose, out_cov, out_nis, out_applied, i,
                       x, y, th, p00, p01, p02, p11, p12, p22, nis, applied)
                break

            if kind == 0:
                last_vx = uvx
                last_vy = uvy
                last_om = uom
            else:
                zx = ev_a[i]
                zy = ev_b[i]
                s00 = p00 + r2
                s01 = p01
                s11 = p11 + r2
                det_s = s00 * s11 - s01 * s01
                tr = s00 + s11
                disc = sqrt((s00 - s11) * (s00 - s11) + 4.0 * s01 * s01)
                lmin = 0.5 * (tr - disc)
                lmax = 0.5 * (tr + disc)
                if lmin <= lmax * 1e-12 or det_s <= 0.0:
                    applied = 0
                else:
                    i00 = s11 / det_s
                    i01 = -s01 / det_s
                    i11 = s00 / det_s
                    yx = zx - x
                    yy = zy - y
                    nis = yx * (i00 * yx + i01 * yy) + yy * (i01 * yx + i11 * yy)
                    if nis <= gate:
                        k00 = p00 * i00 + p01 * i01
                        k01 = p00 * i01 + p01 * i11
                        k10 = p01 * i00 + p11 * i01
                        k11 = p01 * i01 + p11 * i11
                        k20 = p02 * i00 + p12 * i01
                        k21 = p02 * i01 + p12 * i11
                        x = x + (k00 * yx + k01 * yy)
                        y = y + (k10 * yx + k11 * yy)
                        th = _wrap(th + (k20 * yx + k21 * yy))
                        m00 = 1.0 - k00
                        m11 = 1.0 - k11
                        n00 = m00 * p00 - k01 * p01
                        n01a = m00 * p01 - k01 * p11
                        n02a = m00 * p02 - k01 * p12
                        n01b = -k10 * p00 + m11 * p01
                        n11 = -k10 * p01 + m11 * p11
                        n12a = -k10 * p02 + m11 * p12
                        n02b = -k20 * p00 - k21 * p01 + p02
                        n12b = -k20 * p01 - k21 * p11 + p12
                        n22 = -k20 * p02 - k21 * p12 + p22
                        p00 = n00
                        p01 = 0.5 * (n01a + n01b)
                        p02 = 0.5 * (n02a + n02b)
                        p11 = n11
                        p12 = 0.5 * (n12a + n12b)
                        p22 = n22
                        applied = 1
                        if not _posdef(p00, p01, p02, p11, p12, p22):
                            status = 2
                            fail = i
                    else:
                        applied = 0

            t_prev = t
            _store(out_pose, out_cov, out_nis, out_applied, i,
                   x, y, th, p00, p01, p02, p11, p12, p22, nis, applied)
            if status != 0:
                break

    return status, fail


cdef inline double _range_cost(double[::1] bx, double[::1] by, double[::1] bz,
                               double[::1] ranges, Py_ssize_t m,
                               double mobile_z, double x, double y) noexcept nogil:
    cdef double cost = 0.0
    cdef double dx, dy, dz, res
    cdef Py_ssize_t j
    for j in range(m):
        dx = x - bx[j]
        dy = y - by[j]
        dz = mobile_z - bz[j]
        res = sqrt(dx * dx + dy * dy + dz * dz) - ranges[j]
        cost += res * res
    return cost


def gauss_newton_solve(double[::1] bx, double[::1] by, double[::1] bz,
                       double[::1] ranges, double mobile_z,
                       double x0, double y0, double step_tol, int max_iter):
    """Damped Gauss-Newton solve; see _reference.gauss_newton_solve."""
    cdef Py_ssize_t m = ranges.shape[0]
    cdef double x = x0, y = y0
    cdef double cost = _range_cost(bx, by, bz, ranges, m, mobile_z, x, y)
    cdef double lam = 1e-6
    cdef int it, tries, accepted
    cdef Py_ssize_t j
    cdef double a00, a01, a11, g0, g1, dx, dy, dz, d, res, jx, jy
    cdef double det, ddx, ddy, ncost, gn_dx, gn_dy, gn_step

    for it in range(1, max_iter + 1):
        a00 = 0.0
        a01 = 0.0
        a11 = 0.0
        g0 = 0.0
        g1 = 0.0
        for j in range(m):
            dx = x - bx[j]
            dy = y - by[j]
            dz = mobile_z - bz[j]
            d = sqrt(dx * dx + dy * dy + dz * dz)
            if d < 1e-12:
                d = 1e-12
            res = d - ranges[j]
            jx = dx / d
            jy = dy / d
            a00 += jx * jx
            a01 += jx * jy
            a11 += jy * jy
            g0 += jx * res
            g1 += jy * res
        # convergence test on the undamped Gauss-Newton step; once that
        # step is far below the fix scale, cost comparisons are lost in
        # rounding, so the endgame takes pure Gauss-Newton steps
        det = a00 * a11 - a01 * a01
        if det > 1e-300:
            gn_dx = -(a11 * g0 - a01 * g1) / det
            gn_dy = -(a00 * g1 - a01 * g0) / det
            gn_step = sqrt(gn_dx * gn_dx + gn_dy * gn_dy)
            if gn_step < step_tol:
                return x, y, it, 1, sqrt(cost)
            if gn_step < 1e-6:
                x = x + gn_dx
                y = y + gn_dy
                cost = _range_cost(bx, by, bz, ranges, m, mobile_z, x, y)
                continue
        accepted = 0
        ddx = 0.0
        ddy = 0.0
        ncost = cost
        for tries in range(16):
            det = (a00 + lam) * (a11 + lam) - a01 * a01
            if det > 1e-300:
                ddx = -((a11 + lam) * g0 - a01 * g1) / det
                ddy = -((a00 + lam) * g1 - a01 * g0) / det
                ncost = _range_cost(bx, by, bz, ranges, m, mobile_z, x + ddx, y + ddy)
                if ncost <= cost:
                    accepted = 1
                    break
            lam *= 10.0
        if not accepted:
            return x, y, it, 0, sqrt(cost)
        x = x + ddx
        y = y + ddy
        cost = ncost
        lam = lam * 0.1 if lam > 1e-12 else 1e-12
    return x, y, max_iter, 0, sqrt(cost)
