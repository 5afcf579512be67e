"""Pure-Python event-driven simulation kernels.

Reference implementation of the three dispatch policies on piecewise
constant request signals. flexcap._sim_cy mirrors this module line for
line in Cython; both must produce bit-identical floats, so every update
here is written as plain scalar IEEE-754 arithmetic in a fixed order.

Shared conventions:
- Event times are closed-form (gap / closing-rate), never accumulated
  through repeated tiny steps, and contact values are assigned exactly
  (merged clusters share one float, depleted stores are set to 0.0).
- `delivered` and `deficit` are structural: deficit is request minus
  available power when the request exceeds it, else exactly 0.0, so a
  rounding wiggle in a sum can never fabricate a failure.
- Kernels know nothing about devices or units: the optimal-policy kernel
  works on time-to-go groups, the other two on per-device energies.

Every kernel returns a dict with:
  times      event times, starting at 0.0 and ending at the horizon
  delivered  watts delivered on each inter-event interval
  deficit    watts short on each inter-event interval
  ttf        first instant with positive deficit (inf when none)
  snaps      per-event state rows (None unless record)
  rates      per-interval allocation rows (None unless record)
  final      state row at the horizon
"""

INF = float("inf")


def _expand(values, cend, ncl, width):
    """Spread per-cluster values onto the original group columns."""
    row = [0.0] * width
    start = 0
    for c in range(ncl):
        v = values[c]
        for g in range(start, cend[c]):
            row[g] = v
        start = cend[c]
    return row


def op_simulate(x0, w0, seg_start, seg_value, horizon,
                halt_on_failure=False, record=True):
    """Optimal policy on time-to-go groups.

    x0: group time-to-go in seconds, strictly decreasing, all > 0.
    w0: group power in watts (sum of nonempty member ratings), all > 0.
    seg_start/seg_value: request segments; seg_start[0] == 0.0.

    Groups above the marginal one run at full rate, the marginal group
    runs fractionally, groups below idle. Events: segment boundaries,
    the full group above reaching the marginal one, the marginal group
    reaching the group below, and depletion. Merged groups stay merged,
    so state rows carry one shared float per merged run.
    """
    q = len(x0)
    m = len(seg_start)
    cx = [float(v) for v in x0]
    cw = [float(v) for v in w0]
    cend = list(range(1, q + 1))
    ncl = q

    times = [0.0]
    delivered = []
    deficits = []
    snaps = [_expand(cx, cend, ncl, q)] if record else None
    rates = [] if record else None
    ttf = INF
    failed = False

    t = 0.0
    i = 0
    while t < horizon:
        while i + 1 < m and seg_start[i + 1] <= t:
            i += 1
        P = seg_value[i]
        seg_end = seg_start[i + 1] if i + 1 < m else horizon

        avail = 0.0
        for c in range(ncl):
            if cx[c] > 0.0:
                avail += cw[c]

        r = [0.0] * ncl
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
        kind = 0  # 0 segment end, 1 merge from above, 2 catch below, 3 deplete
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

        rates_row = _expand(r, cend, ncl, q) if record else None
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
            del cx[merge_at + 1]
            del cw[merge_at + 1]
            del cend[merge_at + 1]
            ncl -= 1

        if t_next > t:
            times.append(t_next)
            delivered.append(delivered_now)
            deficits.append(deficit_now)
            if record:
                rates.append(rates_row)
                snaps.append(_expand(cx, cend, ncl, q))
        elif record:
            # coincident event: state changed at the same instant
            snaps[-1] = _expand(cx, cend, ncl, q)
        t = t_next

    return {
        "times": times,
        "delivered": delivered,
        "deficit": deficits,
        "ttf": ttf,
        "snaps": snaps,
        "rates": rates,
        "final": _expand(cx, cend, ncl, q),
    }


def lpf_simulate(e0, pmax, order, seg_start, seg_value, horizon,
                 halt_on_failure=False, record=True):
    """Least-power-first policy on per-device energies.

    order: device indices in fill priority (ascending rating, ties by id);
    each nonempty device takes min(p_max, remaining request). Events are
    segment boundaries and individual depletions.
    """
    n = len(e0)
    m = len(seg_start)
    e = [float(v) for v in e0]

    times = [0.0]
    delivered = []
    deficits = []
    snaps = [list(e)] if record else None
    allocs = [] if record else None
    ttf = INF
    failed = False
    u = [0.0] * n

    t = 0.0
    i = 0
    while t < horizon:
        while i + 1 < m and seg_start[i + 1] <= t:
            i += 1
        P = seg_value[i]
        seg_end = seg_start[i + 1] if i + 1 < m else horizon

        for k in range(n):
            u[k] = 0.0
        if halt_on_failure and failed:
            delivered_now = 0.0
            deficit_now = P
        else:
            remaining = P
            for j in range(n):
                k = order[j]
                if e[k] > 0.0 and remaining > 0.0:
                    take = pmax[k] if pmax[k] <= remaining else remaining
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
                allocs.append(list(u))
                snaps.append(list(e))
        elif record:
            snaps[-1] = list(e)
        t = t_next

    return {
        "times": times,
        "delivered": delivered,
        "deficit": deficits,
        "ttf": ttf,
        "snaps": snaps,
        "rates": allocs,
        "final": list(e),
    }


def pop_simulate(e0, pmax, seg_start, seg_value, horizon,
                 halt_on_failure=False, record=True):
    """Proportional-to-power policy on per-device energies.

    Every nonempty device runs at the common fraction min(1, P / available),
    so nonempty time-to-go decays uniformly; events are segment boundaries
    and depletions of the shortest stores.
    """
    n = len(e0)
    m = len(seg_start)
    e = [float(v) for v in e0]

    times = [0.0]
    delivered = []
    deficits = []
    snaps = [list(e)] if record else None
    allocs = [] if record else None
    ttf = INF
    failed = False
    u = [0.0] * n

    t = 0.0
    i = 0
    while t < horizon:
        while i + 1 < m and seg_start[i + 1] <= t:
            i += 1
        P = seg_value[i]
        seg_end = seg_start[i + 1] if i + 1 < m else horizon

        for k in range(n):
            u[k] = 0.0
        if halt_on_failure and failed:
            delivered_now = 0.0
            deficit_now = P
        else:
            avail = 0.0
            for k in range(n):
                if e[k] > 0.0:
                    avail += pmax[k]
            if avail <= 0.0:
                delivered_now = 0.0
                deficit_now = P
            elif P >= avail:
                for k in range(n):
                    if e[k] > 0.0:
                        u[k] = pmax[k]
                delivered_now = avail
                deficit_now = P - avail
            else:
                f = P / avail
                for k in range(n):
                    if e[k] > 0.0:
                        u[k] = f * pmax[k]
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
                allocs.append(list(u))
                snaps.append(list(e))
        elif record:
            snaps[-1] = list(e)
        t = t_next

    return {
        "times": times,
        "delivered": delivered,
        "deficit": deficits,
        "ttf": ttf,
        "snaps": snaps,
        "rates": allocs,
        "final": list(e),
    }
