# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event-driven simulation kernels.

Line-for-line transcription of flexcap._sim_py with C-typed state. The
floating-point operation order is identical, so both backends return
bit-identical results; tests assert this. See _sim_py for the algorithm
documentation.
"""

from libc.stdlib cimport malloc, free

INF = float("inf")
cdef double C_INF = INF


cdef list _expand_c(double *values, Py_ssize_t *cend, Py_ssize_t ncl, Py_ssize_t width):
    cdef list row = [0.0] * width
    cdef Py_ssize_t c, g, start = 0
    for c in range(ncl):
        for g in range(start, cend[c]):
            row[g] = values[c]
        start = cend[c]
    return row


def op_simulate(x0, w0, seg_start, seg_value, double horizon,
                bint halt_on_failure=False, bint record=True):
    """Optimal policy on time-to-go groups; see _sim_py.op_simulate."""
    cdef Py_ssize_t q = len(x0)
    cdef Py_ssize_t m = len(seg_start)
    cdef Py_ssize_t cap = q if q > 0 else 1
    cdef Py_ssize_t mcap = m if m > 0 else 1
    cdef double *cx = <double *> malloc(cap * sizeof(double))
    cdef double *cw = <double *> malloc(cap * sizeof(double))
    cdef double *r = <double *> malloc(cap * sizeof(double))
    cdef Py_ssize_t *cend = <Py_ssize_t *> malloc(cap * sizeof(Py_ssize_t))
    cdef double *sstart = <double *> malloc(mcap * sizeof(double))
    cdef double *svalue = <double *> malloc(mcap * sizeof(double))
    if cx == NULL or cw == NULL or r == NULL or cend == NULL or sstart == NULL or svalue == NULL:
        free(cx); free(cw); free(r); free(cend); free(sstart); free(svalue)
        raise MemoryError()

    cdef Py_ssize_t ncl = q
    cdef Py_ssize_t c, g, i, j, mi, merge_at
    cdef double P, seg_end, avail, acc, rm, dt, dtc, t, t_next
    cdef double delivered_now, deficit_now
    cdef double ttf = C_INF
    cdef bint failed = False
    cdef int kind

    try:
        for c in range(q):
            cx[c] = x0[c]
            cw[c] = w0[c]
            cend[c] = c + 1
        for i in range(m):
            sstart[i] = seg_start[i]
            svalue[i] = seg_value[i]

        times = [0.0]
        delivered = []
        deficits = []
        snaps = [_expand_c(cx, cend, ncl, q)] if record else None
        rates = [] if record else None
        rates_row = None

        t = 0.0
        i = 0
        while t < horizon:
            while i + 1 < m and sstart[i + 1] <= t:
                i += 1
            P = svalue[i]
            seg_end = sstart[i + 1] if i + 1 < m else horizon

            avail = 0.0
            for c in range(ncl):
                if cx[c] > 0.0:
                    avail += cw[c]

            for c in range(ncl):
                r[c] = 0.0
            mi = -1
            if halt_on_failure and failed:
                delivered_now = 0.0
                deficit_now = P
            elif P > avail:
                for c in range(ncl):
                    if cx[c] > 0.0:
                        r[c] = 1.0
                        mi = c
                delivered_now = avail
                deficit_now = P - avail
            else:
                acc = 0.0
                for c in range(ncl):
                    if cx[c] <= 0.0:
                        continue
                    if acc + cw[c] <= P:
                        r[c] = 1.0
                        acc += cw[c]
                        mi = c
                    elif acc < P:
                        r[c] = (P - acc) / cw[c]
                        acc = P
                        mi = c
                delivered_now = P
                deficit_now = 0.0
            if deficit_now > 0.0:
                if not failed:
                    failed = True
                    ttf = t
                if halt_on_failure:
                    # freeze from the failure instant, not the next event
                    for c in range(ncl):
                        r[c] = 0.0
                    mi = -1
                    delivered_now = 0.0
                    deficit_now = P

            dt = seg_end - t
            kind = 0
            if mi >= 0:
                rm = r[mi]
                if rm < 1.0 and mi > 0:
                    dtc = (cx[mi - 1] - cx[mi]) / (1.0 - rm)
                    if dtc < 0.0:
                        dtc = 0.0
                    if dtc < dt:
                        dt = dtc
                        kind = 1
                if mi + 1 < ncl:
                    dtc = (cx[mi] - cx[mi + 1]) / rm
                    if dtc < 0.0:
                        dtc = 0.0
                    if dtc < dt:
                        dt = dtc
                        kind = 2
                else:
                    dtc = cx[mi] / rm
                    if dtc < 0.0:
                        dtc = 0.0
                    if dtc < dt:
                        dt = dtc
                        kind = 3

            if record:
                rates_row = _expand_c(r, cend, ncl, q)
            t_next = seg_end if kind == 0 else t + dt

            for c in range(ncl):
                if r[c] == 1.0:
                    cx[c] -= dt
                elif r[c] > 0.0:
                    cx[c] -= r[c] * dt
                # an event chosen 1 ulp late must not leave negative time-to-go
                if r[c] > 0.0 and cx[c] < 0.0:
                    cx[c] = 0.0
            if kind == 1:
                cx[mi - 1] = cx[mi]
                merge_at = mi - 1
            elif kind == 2:
                cx[mi] = cx[mi + 1]
                merge_at = mi
            else:
                merge_at = -1
                if kind == 3:
                    cx[mi] = 0.0
            if merge_at >= 0:
                cw[merge_at] += cw[merge_at + 1]
                cend[merge_at] = cend[merge_at + 1]
                for j in range(merge_at + 1, ncl - 1):
                    cx[j] = cx[j + 1]
                    cw[j] = cw[j + 1]
                    cend[j] = cend[j + 1]
                ncl -= 1

            if t_next > t:
                times.append(t_next)
                delivered.append(delivered_now)
                deficits.append(deficit_now)
                if record:
                    rates.append(rates_row)
                    snaps.append(_expand_c(cx, cend, ncl, q))
            elif record:
                snaps[len(snaps) - 1] = _expand_c(cx, cend, ncl, q)
            t = t_next

        return {
            "times": times,
            "delivered": delivered,
            "deficit": deficits,
            "ttf": ttf,
            "snaps": snaps,
            "rates": rates,
            "final": _expand_c(cx, cend, ncl, q),
        }
    finally:
        free(cx)
        free(cw)
        free(r)
        free(cend)
        free(sstart)
        free(svalue)


def lpf_simulate(e0, pmax, order, seg_start, seg_value, double horizon,
                 bint halt_on_failure=False, bint record=True):
    """Least-power-first policy; see _sim_py.lpf_simulate."""
    cdef Py_ssize_t n = len(e0)
    cdef Py_ssize_t m = len(seg_start)
    cdef Py_ssize_t cap = n if n > 0 else 1
    cdef Py_ssize_t mcap = m if m > 0 else 1
    cdef double *e = <double *> malloc(cap * sizeof(double))
    cdef double *pm = <double *> malloc(cap * sizeof(double))
    cdef double *u = <double *> malloc(cap * sizeof(double))
    cdef Py_ssize_t *ordc = <Py_ssize_t *> malloc(cap * sizeof(Py_ssize_t))
    cdef double *sstart = <double *> malloc(mcap * sizeof(double))
    cdef double *svalue = <double *> malloc(mcap * sizeof(double))
    if e == NULL or pm == NULL or u == NULL or ordc == NULL or sstart == NULL or svalue == NULL:
        free(e); free(pm); free(u); free(ordc); free(sstart); free(svalue)
        raise MemoryError()

    cdef Py_ssize_t k, j, i
    cdef double P, seg_end, remaining, take, dt, dk, t, t_next
    cdef double delivered_now, deficit_now
    cdef double ttf = C_INF
    cdef bint failed = False
    cdef bint hit

    try:
        for k in range(n):
            e[k] = e0[k]
            pm[k] = pmax[k]
            ordc[k] = order[k]
        for i in range(m):
            sstart[i] = seg_start[i]
            svalue[i] = seg_value[i]

        times = [0.0]
        delivered = []
        deficits = []
        snaps = [_tolist(e, n)] if record else None
        allocs = [] if record else None

        t = 0.0
        i = 0
        while t < horizon:
            while i + 1 < m and sstart[i + 1] <= t:
                i += 1
            P = svalue[i]
            seg_end = sstart[i + 1] if i + 1 < m else horizon

            for k in range(n):
                u[k] = 0.0
            if halt_on_failure and failed:
                delivered_now = 0.0
                deficit_now = P
            else:
                remaining = P
                for j in range(n):
                    k = ordc[j]
                    if e[k] > 0.0 and remaining > 0.0:
                        take = pm[k] if pm[k] <= remaining else remaining
                        u[k] = take
                        remaining -= take
                if remaining > 0.0:
                    delivered_now = P - remaining
                    deficit_now = remaining
                    if not failed:
                        failed = True
                        ttf = t
                    if halt_on_failure:
                        for k in range(n):
                            u[k] = 0.0
                        delivered_now = 0.0
                        deficit_now = P
                else:
                    delivered_now = P
                    deficit_now = 0.0

            dt = seg_end - t
            hit = False
            for k in range(n):
                if u[k] > 0.0:
                    dk = e[k] / u[k]
                    if dk < dt:
                        dt = dk
                        hit = True

            t_next = t + dt if hit else seg_end
            for k in range(n):
                if u[k] > 0.0:
                    if hit and e[k] / u[k] == dt:
                        e[k] = 0.0
                    else:
                        e[k] -= u[k] * dt
                        if e[k] <= 0.0:
                            e[k] = 0.0

            if t_next > t:
                times.append(t_next)
                delivered.append(delivered_now)
                deficits.append(deficit_now)
                if record:
                    allocs.append(_tolist(u, n))
                    snaps.append(_tolist(e, n))
            elif record:
                snaps[len(snaps) - 1] = _tolist(e, n)
            t = t_next

        return {
            "times": times,
            "delivered": delivered,
            "deficit": deficits,
            "ttf": ttf,
            "snaps": snaps,
            "rates": allocs,
            "final": _tolist(e, n),
        }
    finally:
        free(e)
        free(pm)
        free(u)
        free(ordc)
        free(sstart)
        free(svalue)


def pop_simulate(e0, pmax, seg_start, seg_value, double horizon,
                 bint halt_on_failure=False, bint record=True):
    """Proportional-to-power policy; see _sim_py.pop_simulate."""
    cdef Py_ssize_t n = len(e0)
    cdef Py_ssize_t m = len(seg_start)
    cdef Py_ssize_t cap = n if n > 0 else 1
    cdef Py_ssize_t mcap = m if m > 0 else 1
    cdef double *e = <double *> malloc(cap * sizeof(double))
    cdef double *pm = <double *> malloc(cap * sizeof(double))
    cdef double *u = <double *> malloc(cap * sizeof(double))
    cdef double *sstart = <double *> malloc(mcap * sizeof(double))
    cdef double *svalue = <double *> malloc(mcap * sizeof(double))
    if e == NULL or pm == NULL or u == NULL or sstart == NULL or svalue == NULL:
        free(e); free(pm); free(u); free(sstart); free(svalue)
        raise MemoryError()

    cdef Py_ssize_t k, i
    cdef double P, seg_end, avail, f, dt, dk, t, t_next
    cdef double delivered_now, deficit_now
    cdef double ttf = C_INF
    cdef bint failed = False
    cdef bint hit

    try:
        for k in range(n):
            e[k] = e0[k]
            pm[k] = pmax[k]
        for i in range(m):
            sstart[i] = seg_start[i]
            svalue[i] = seg_value[i]

        times = [0.0]
        delivered = []
        deficits = []
        snaps = [_tolist(e, n)] if record else None
        allocs = [] if record else None

        t = 0.0
        i = 0
        while t < horizon:
            while i + 1 < m and sstart[i + 1] <= t:
                i += 1
            P = svalue[i]
            seg_end = sstart[i + 1] if i + 1 < m else horizon

            for k in range(n):
                u[k] = 0.0
            if halt_on_failure and failed:
                delivered_now = 0.0
                deficit_now = P
            else:
                avail = 0.0
                for k in range(n):
                    if e[k] > 0.0:
                        avail += pm[k]
                if avail <= 0.0:
                    delivered_now = 0.0
                    deficit_now = P
                elif P >= avail:
                    for k in range(n):
                        if e[k] > 0.0:
                            u[k] = pm[k]
                    delivered_now = avail
                    deficit_now = P - avail
                else:
                    f = P / avail
                    for k in range(n):
                        if e[k] > 0.0:
                            u[k] = f * pm[k]
                    delivered_now = P
                    deficit_now = 0.0
                if deficit_now > 0.0:
                    if not failed:
                        failed = True
                        ttf = t
                    if halt_on_failure:
                        for k in range(n):
                            u[k] = 0.0
                        delivered_now = 0.0
                        deficit_now = P

            dt = seg_end - t
            hit = False
            for k in range(n):
                if u[k] > 0.0:
                    dk = e[k] / u[k]
                    if dk < dt:
                        dt = dk
                        hit = True

            t_next = t + dt if hit else seg_end
            for k in range(n):
                if u[k] > 0.0:
                    if hit and e[k] / u[k] == dt:
                        e[k] = 0.0
                    else:
                        e[k] -= u[k] * dt
                        if e[k] <= 0.0:
                            e[k] = 0.0

            if t_next > t:
                times.append(t_next)
                delivered.append(delivered_now)
                deficits.append(deficit_now)
                if record:
                    allocs.append(_tolist(u, n))
                    snaps.append(_tolist(e, n))
            elif record:
                snaps[len(snaps) - 1] = _tolist(e, n)
            t = t_next

        return {
            "times": times,
            "delivered": delivered,
            "deficit": deficits,
            "ttf": ttf,
            "snaps": snaps,
            "rates": allocs,
            "final": _tolist(e, n),
        }
    finally:
        free(e)
        free(pm)
        free(u)
        free(sstart)
        free(svalue)


cdef list _tolist(double *values, Py_ssize_t n):
    cdef list out = [0.0] * n
    cdef Py_ssize_t k
    for k in range(n):
        out[k] = values[k]
    return out
