"""Compiled inner loops.

A *worker* owns a subset of nodes (its block). Per-node scores live in a
global ``key`` array and each worker keeps an indexed binary max-heap over
its own block (``heap``, with global ``pos``). Ties break toward the
lowest node index so selections are reproducible.

Worker counters (int64 array ``ctr``) are laid out as::

    [diffusions, link_ops, cursor, n_eligible, heap_size, outbox_count]

and the shared float accumulator ``acc`` as ``[est_f, est_outbox]``, the
incrementally maintained L1 masses used for cheap termination tests.
"""

import numpy as np
from numba import njit

CYC, MAX, COST, EXPLICIT = 0, 1, 2, 3
ALL, NEGATIVE_ONLY, POSITIVE_ONLY = 0, 1, 2

C_DIFF, C_LINKS, C_CURSOR, C_ELIG, C_HSIZE, C_OBCOUNT = range(6)
A_EST_F, A_EST_OB = 0, 1

INF = np.inf


@njit(cache=True, inline="always")
def score(fi, outi, kind, mode):
    if fi == 0.0:
        return -1.0
    if mode == NEGATIVE_ONLY and fi > 0.0:
        return -1.0
    if mode == POSITIVE_ONLY and fi < 0.0:
        return -1.0
    a = abs(fi)
    if kind == COST:
        if outi == 0:
            return INF
        return a / outi
    return a


@njit(cache=True, inline="always")
def _better(key, a, b):
    ka = key[a]
    kb = key[b]
    return ka > kb or (ka == kb and a < b)


@njit(cache=True)
def _sift_up(heap, pos, key, k):
    node = heap[k]
    while k > 0:
        parent = (k - 1) >> 1
        pn = heap[parent]
        if _better(key, node, pn):
            heap[k] = pn
            pos[pn] = k
            k = parent
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def _sift_down(heap, pos, key, k, size):
    node = heap[k]
    while True:
        c = 2 * k + 1
        if c >= size:
            break
        if c + 1 < size and _better(key, heap[c + 1], heap[c]):
            c += 1
        cn = heap[c]
        if _better(key, cn, node):
            heap[k] = cn
            pos[cn] = k
            k = c
        else:
            break
    heap[k] = node
    pos[node] = k


@njit(cache=True)
def rebuild(block, f, out, key, heap, pos, ctr, kind, mode):
    """(Re)initialise scores, eligibility count and heap for one worker."""
    nb = block.shape[0]
    elig = 0
    for k in range(nb):
        i = block[k]
        s = score(f[i], out[i], kind, mode)
        key[i] = s
        if s > 0.0:
            elig += 1
        heap[k] = i
        pos[i] = k
    ctr[C_ELIG] = elig
    if kind == MAX or kind == COST:
        ctr[C_HSIZE] = nb
        for k in range(nb // 2 - 1, -1, -1):
            _sift_down(heap, pos, key, k, nb)
    else:
        ctr[C_HSIZE] = 0


@njit(cache=True, inline="always")
def _rescore(i, f, out, key, heap, pos, ctr, kind, mode):
    old = key[i]
    new = score(f[i], out[i], kind, mode)
    if (old > 0.0) != (new > 0.0):
        if new > 0.0:
            ctr[C_ELIG] += 1
        else:
            ctr[C_ELIG] -= 1
    key[i] = new
    if ctr[C_HSIZE] > 0:
        k = pos[i]
        if new > old:
            _sift_up(heap, pos, key, k)
        elif new < old:
            _sift_down(heap, pos, key, k, ctr[C_HSIZE])


@njit(cache=True)
def add_local(i, amount, f, out, key, heap, pos, ctr, acc, kind, mode):
    """Inject ``amount`` of fluid into a node owned by this worker."""
    old = f[i]
    f[i] = old + amount
    acc[A_EST_F] += abs(f[i]) - abs(old)
    _rescore(i, f, out, key, heap, pos, ctr, kind, mode)


@njit(cache=True)
def add_outbox(r, amount, outbox, ob_mark, ob_list, ctr, acc):
    old = outbox[r]
    outbox[r] = old + amount
    acc[A_EST_OB] += abs(outbox[r]) - abs(old)
    if not ob_mark[r]:
        ob_mark[r] = True
        ob_list[ctr[C_OBCOUNT]] = r
        ctr[C_OBCOUNT] += 1


@njit(cache=True)
def deliver_batch(nodes, values, wid, owner, f, out, key, heap, pos, ctr, acc,
                  outbox, ob_mark, ob_list, kind, mode):
    """Inject received fluid; entries for nodes owned elsewhere are
    forwarded through the outbox."""
    for t in range(nodes.shape[0]):
        r = nodes[t]
        if owner[r] == wid:
            add_local(r, values[t], f, out, key, heap, pos, ctr, acc, kind, mode)
        else:
            add_outbox(r, values[t], outbox, ob_mark, ob_list, ctr, acc)


@njit(cache=True)
def _advance(col_ptr, row_idx, values, out, f, h, owner, wid,
             block, seq, key, heap, pos, ctr, acc,
             outbox, ob_mark, ob_list, kind, mode,
             n_steps, threshold, max_links, max_diffusions,
             sync_every, sync_ctr, diverge_limit,
             trace_res, trace_diff, trace_links, info):
    """Select-and-diffuse up to ``n_steps`` times for worker ``wid``.

    Returns 0 (steps done), 1 (converged), 2 (nothing eligible), 3 (budget
    exhausted) or 4 (divergence). ``info`` holds ``[node, diffused,
    n_local, n_remote]`` of the last step, ``node = -1`` when nothing was
    eligible. With ``threshold >= 0`` the exact L1 norm of ``f`` is
    re-synchronised into ``acc[0]`` every ``sync_every`` steps and whenever
    the estimate drops to the threshold; a negative threshold disables all
    termination tests. When ``trace_res`` is non-empty the exact residual
    is written there after every step.

    Selection, diffusion, rescoring and the heap sifts all live in this one
    loop: numba reference-counts array arguments on every non-inlined call,
    which costs several times the arithmetic of a link.
    """
    tracing = trace_res.shape[0] > 0
    checking = threshold >= 0.0
    nb = block.shape[0]
    ns = seq.shape[0]
    for s in range(n_steps):
        info[0] = -1
        info[1] = 0
        info[2] = 0
        info[3] = 0
        if ctr[C_LINKS] >= max_links or ctr[C_DIFF] >= max_diffusions:
            return 3
        # selection: heap top for MAX/COST, cursor otherwise (select-then-test)
        if ctr[C_ELIG] == 0:
            if checking:
                exact = l1(f)
                acc[A_EST_F] = exact
                if exact <= threshold:
                    return 1
            return 2
        if kind == MAX or kind == COST:
            i = heap[0]
        elif kind == CYC:
            c = ctr[C_CURSOR]
            ctr[C_CURSOR] = (c + 1) % nb
            i = block[c]
        else:
            c = ctr[C_CURSOR]
            ctr[C_CURSOR] = (c + 1) % ns
            i = seq[c]
        info[0] = i
        ctr[C_DIFF] += 1
        if key[i] > 0.0:
            phi = f[i]
            h[i] += phi
            f[i] = 0.0
            acc[A_EST_F] -= abs(phi)
            lo = col_ptr[i]
            hi = col_ptr[i + 1]
            n_local = 0
            size = ctr[C_HSIZE]
            # one extra pass (kk == hi) rescores the diffused node itself
            for kk in range(lo, hi + 1):
                if kk < hi:
                    r = row_idx[kk]
                    amt = values[kk] * phi
                    if owner[r] != wid:
                        ob = outbox[r]
                        outbox[r] = ob + amt
                        acc[A_EST_OB] += abs(ob + amt) - abs(ob)
                        if not ob_mark[r]:
                            ob_mark[r] = True
                            ob_list[ctr[C_OBCOUNT]] = r
                            ctr[C_OBCOUNT] += 1
                        continue
                    n_local += 1
                    old = f[r]
                    fr = old + amt
                    f[r] = fr
                    acc[A_EST_F] += abs(fr) - abs(old)
                    if r == i:
                        continue
                else:
                    r = i
                    fr = f[i]
                ko = key[r]
                kn = score(fr, out[r], kind, mode)
                if (ko > 0.0) != (kn > 0.0):
                    if kn > 0.0:
                        ctr[C_ELIG] += 1
                    else:
                        ctr[C_ELIG] -= 1
                key[r] = kn
                if size == 0 or kn == ko:
                    continue
                k = pos[r]
                if kn > ko:
                    while k > 0:
                        par = (k - 1) >> 1
                        pn = heap[par]
                        kp = key[pn]
                        if kn > kp or (kn == kp and r < pn):
                            heap[k] = pn
                            pos[pn] = k
                            k = par
                        else:
                            break
                else:
                    while True:
                        c = 2 * k + 1
                        if c >= size:
                            break
                        cn = heap[c]
                        if c + 1 < size:
                            c2 = heap[c + 1]
                            if key[c2] > key[cn] or (key[c2] == key[cn] and c2 < cn):
                                c += 1
                                cn = c2
                        kc = key[cn]
                        if kc > kn or (kc == kn and cn < r):
                            heap[k] = cn
                            pos[cn] = k
                            k = c
                        else:
                            break
                heap[k] = r
                pos[r] = k
            ctr[C_LINKS] += hi - lo
            info[1] = 1
            info[2] = n_local
            info[3] = hi - lo - n_local
        if tracing:
            trace_res[s] = l1(f)
            trace_diff[s] = ctr[C_DIFF]
            trace_links[s] = ctr[C_LINKS]
        if checking:
            sync_ctr[0] += 1
            if acc[A_EST_F] <= threshold or sync_ctr[0] >= sync_every:
                sync_ctr[0] = 0
                exact = l1(f)
                acc[A_EST_F] = exact
                if exact <= threshold:
                    return 1
                if exact > diverge_limit:
                    return 4
    return 0


@njit(cache=True)
def step(col_ptr, row_idx, values, out, f, h, owner, wid,
         block, seq, key, heap, pos, ctr, acc,
         outbox, ob_mark, ob_list, kind, mode, info):
    """One select-and-diffuse step of worker ``wid``.

    ``info`` receives ``[node, diffused, n_local, n_remote]``; ``node`` is -1
    when nothing is eligible (no state change, counters untouched).
    """
    _advance(col_ptr, row_idx, values, out, f, h, owner, wid,
             block, seq, key, heap, pos, ctr, acc,
             outbox, ob_mark, ob_list, kind, mode,
             1, -1.0, 2**62, 2**62, 2**62, np.zeros(1, dtype=np.int64), INF,
             np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), info)


@njit(cache=True)
def l1(x):
    s = 0.0
    for k in range(x.shape[0]):
        s += abs(x[k])
    return s


@njit(cache=True)
def run_sequential(col_ptr, row_idx, values, out, f, h, owner,
                   block, seq, key, heap, pos, ctr, acc,
                   outbox, ob_mark, ob_list, kind, mode,
                   n_steps, threshold, max_links, max_diffusions,
                   sync_every, sync_ctr, diverge_limit,
                   trace_res, trace_diff, trace_links):
    """:func:`_advance` for a single worker (id 0) owning every node."""
    info = np.zeros(4, dtype=np.int64)
    return _advance(col_ptr, row_idx, values, out, f, h, owner, 0,
                    block, seq, key, heap, pos, ctr, acc,
                    outbox, ob_mark, ob_list, kind, mode,
                    n_steps, threshold, max_links, max_diffusions,
                    sync_every, sync_ctr, diverge_limit,
                    trace_res, trace_diff, trace_links, info)


@njit(cache=True)
def run_sampled(col_ptr, row_idx, values, out, f, h, owner,
                block, seq, key, heap, pos, ctr, acc,
                outbox, ob_mark, ob_list, kind, mode,
                every, threshold, max_links, max_diffusions,
                sync_every, sync_ctr, diverge_limit,
                hist_diff, hist_links, hist_res, hist_count):
    """Run :func:`run_sequential` in chunks of ``every`` steps, recording
    ``(diffusions, link_ops, |F|_1)`` after each chunk.

    Stops when a chunk ends with a non-zero status (returned) or when the
    history buffers are full (returns 0; the caller drains and resumes).
    """
    empty_f = np.zeros(0)
    empty_i = np.zeros(0, dtype=np.int64)
    while hist_count[0] < hist_res.shape[0]:
        code = run_sequential(col_ptr, row_idx, values, out, f, h, owner,
                              block, seq, key, heap, pos, ctr, acc,
                              outbox, ob_mark, ob_list, kind, mode,
                              every, threshold, max_links, max_diffusions,
                              sync_every, sync_ctr, diverge_limit,
                              empty_f, empty_i, empty_i)
        k = hist_count[0]
        hist_diff[k] = ctr[C_DIFF]
        hist_links[k] = ctr[C_LINKS]
        hist_res[k] = l1(f)
        hist_count[0] = k + 1
        if code != 0:
            return code
    return 0
