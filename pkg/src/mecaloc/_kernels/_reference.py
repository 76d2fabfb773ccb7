"""Pure-Python kernels; mirrors _speedups.pyx operation for operation.

Scalar math on C doubles (Python floats), no numpy inside the loops, so
the compiled backend produces the same sequence of roundings.  Keep the
two files in sync: any change here must land in _speedups.pyx as well.
"""

import math


def _wrap(theta):
    # wrap to (-pi, pi]
    return theta - 2.0 * math.pi * math.ceil((theta - math.pi) / (2.0 * math.pi))


def accumulate_poses(x0, y0, th0, twists, dts, out):
    """Fold Euler pose steps over twists (n,3) for durations dts (n,) into out (n,3)."""
    n = len(dts)
    tw = twists.tolist()
    dt_list = dts.tolist()
    x = x0
    y = y0
    th = th0
    for i in range(n):
        vx, vy, om = tw[i]
        dt = dt_list[i]
        c = math.cos(th)
        s = math.sin(th)
        x = x + dt * (vx * c - vy * s)
        y = y + dt * (vx * s + vy * c)
        th = _wrap(th + dt * om)
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = th


def run_filter_events(
    x0,
    y0,
    th0,
    p0,
    ev_t,
    ev_kind,
    ev_a,
    ev_b,
    ev_c,
    q_vx,
    q_vy,
    q_om,
    r_ips,
    gate,
    out_pose,
    out_cov,
    out_nis,
    out_applied,
):
    """Run the full predict/update event loop.

    Events are (t, kind, a, b, c) rows: kind 0 = twist sample (a,b,c) =
    (vx,vy,omega) measured over the elapsed interval, kind 1 = position
    fix (a,b) = (x,y).  A fix first predicts to its timestamp holding the
    last twist, then updates; updates whose NIS exceeds `gate` are skipped.
    Writes pose (n,3), covariance (n,9), NIS (n,) and applied flags (n,);
    returns (status, fail_index) with status 0 = ok, 1 = out-of-order
    timestamp, 2 = covariance lost positive definiteness.
    """
    n = len(ev_t)
    t_list = ev_t.tolist()
    kind_list = ev_kind.tolist()
    a_list = ev_a.tolist()
    b_list = ev_b.tolist()
    c_list = ev_c.tolist()

    x = x0
    y = y0
    th = th0
    p00 = p0[0, 0]
    p01 = p0[0, 1]
    p02 = p0[0, 2]
    p11 = p0[1, 1]
    p12 = p0[1, 2]
    p22 = p0[2, 2]

    qvx2 = q_vx * q_vx
    qvy2 = q_vy * q_vy
    qom2 = q_om * q_om
    r2 = r_ips * r_ips

    last_vx = 0.0
    last_vy = 0.0
    last_om = 0.0
    t_prev = t_list[0] if n > 0 else 0.0
    status = 0
    fail = -1

    for i in range(n):
        t = t_list[i]
        dt = t - t_prev
        if dt < 0.0:
            status = 1
            fail = i
            break
        kind = kind_list[i]
        nis = math.nan
        applied = 0

        if kind == 0:
            uvx = a_list[i]
            uvy = b_list[i]
            uom = c_list[i]
        else:
            uvx = last_vx
            uvy = last_vy
            uom = last_om

        if dt > 0.0:
            # prediction step
            c = math.cos(th)
            s = math.sin(th)
            a02 = -dt * (uvx * s + uvy * c)
            a12 = dt * (uvx * c - uvy * s)
            x = x + dt * (uvx * c - uvy * s)
            y = y + dt * (uvx * s + uvy * c)
            th = _wrap(th + dt * uom)
            # P <- F P F^T with F = [[1,0,a02],[0,1,a12],[0,0,1]]
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
            # P += B diag(q) B^T with B = dt*R(theta_prior)
            dt2 = dt * dt
            p00 = p00 + dt2 * (c * c * qvx2 + s * s * qvy2)
            p01 = p01 + dt2 * (c * s * (qvx2 - qvy2))
            p11 = p11 + dt2 * (s * s * qvx2 + c * c * qvy2)
            p22 = p22 + dt2 * qom2
            if not _posdef(p00, p01, p02, p11, p12, p22):
                status = 2
                fail = i
        if status != 0:
            _store(out_pose, out_cov, out_nis, out_applied, i, x, y, th, p00, p01, p02, p11, p12, p22, nis, applied)
            break

        if kind == 0:
            last_vx = uvx
            last_vy = uvy
            last_om = uom
        else:
            # update step against the position fix
            zx = a_list[i]
            zy = b_list[i]
            s00 = p00 + r2
            s01 = p01
            s11 = p11 + r2
            det_s = s00 * s11 - s01 * s01
            tr = s00 + s11
            disc = math.sqrt((s00 - s11) * (s00 - s11) + 4.0 * s01 * s01)
            lmin = 0.5 * (tr - disc)
            lmax = 0.5 * (tr + disc)
            if lmin <= lmax * 1e-12 or det_s <= 0.0:
                applied = 0  # singular innovation covariance: keep the prior
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
                    # P <- (I - K H) P, re-symmetrized
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
        _store(out_pose, out_cov, out_nis, out_applied, i, x, y, th, p00, p01, p02, p11, p12, p22, nis, applied)
        if status != 0:
            break

    return status, fail


def _posdef(p00, p01, p02, p11, p12, p22):
    # Sylvester's criterion for the symmetric 3x3
    if p00 <= 0.0:
        return False
    if p00 * p11 - p01 * p01 <= 0.0:
        return False
    det = (
        p00 * (p11 * p22 - p12 * p12)
        - p01 * (p01 * p22 - p12 * p02)
        + p02 * (p01 * p12 - p11 * p02)
    )
    return det > 0.0


def _store(out_pose, out_cov, out_nis, out_applied, i, x, y, th, p00, p01, p02, p11, p12, p22, nis, applied):
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


def gauss_newton_solve(bx, by, bz, ranges, mobile_z, x0, y0, step_tol, max_iter):
    """Damped Gauss-Newton solve of the 2-D range least-squares problem.

    Minimizes sum_i (||(x, y, mobile_z) - beacon_i|| - range_i)^2 over
    (x, y).  Damping is an adaptive Levenberg lambda: grown until a step
    lowers the cost, shrunk after each accepted step.  Returns
    (x, y, iterations, converged, residual_norm).
    """
    bx_l = bx.tolist()
    by_l = by.tolist()
    bz_l = bz.tolist()
    rg_l = ranges.tolist()
    m = len(rg_l)

    x = x0
    y = y0
    cost = _range_cost(bx_l, by_l, bz_l, rg_l, m, mobile_z, x, y)
    lam = 1e-6

    for it in range(1, max_iter + 1):
        a00 = 0.0
        a01 = 0.0
        a11 = 0.0
        g0 = 0.0
        g1 = 0.0
        for j in range(m):
            dx = x - bx_l[j]
            dy = y - by_l[j]
            dz = mobile_z - bz_l[j]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d < 1e-12:
                d = 1e-12
            res = d - rg_l[j]
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
            gn_step = math.sqrt(gn_dx * gn_dx + gn_dy * gn_dy)
            if gn_step < step_tol:
                return x, y, it, 1, math.sqrt(cost)
            if gn_step < 1e-6:
                x = x + gn_dx
                y = y + gn_dy
                cost = _range_cost(bx_l, by_l, bz_l, rg_l, m, mobile_z, x, y)
                continue
        accepted = 0
        ddx = 0.0
        ddy = 0.0
        ncost = cost
        for _ in range(16):
            det = (a00 + lam) * (a11 + lam) - a01 * a01
            if det > 1e-300:
                ddx = -((a11 + lam) * g0 - a01 * g1) / det
                ddy = -((a00 + lam) * g1 - a01 * g0) / det
                ncost = _range_cost(bx_l, by_l, bz_l, rg_l, m, mobile_z, x + ddx, y + ddy)
                if ncost <= cost:
                    accepted = 1
                    break
            lam *= 10.0
        if not accepted:
            return x, y, it, 0, math.sqrt(cost)
        x = x + ddx
        y = y + ddy
        cost = ncost
        lam = lam * 0.1 if lam > 1e-12 else 1e-12
    return x, y, max_iter, 0, math.sqrt(cost)


def _range_cost(bx_l, by_l, bz_l, rg_l, m, mobile_z, x, y):
    cost = 0.0
    for j in range(m):
        dx = x - bx_l[j]
        dy = y - by_l[j]
        dz = mobile_z - bz_l[j]
        res = math.sqrt(dx * dx + dy * dy + dz * dz) - rg_l[j]
        cost += res * res
    return cost
