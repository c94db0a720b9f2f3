"""Compiled graph traversal over implicitly stored transition graphs.

Edges are never materialized for the large runs.  Each source box keeps its
list of sampled arrivals ``(point, radius, containing box)``; the successors
of a node are

* the box containing each arrival (or the sink when it left the domain), and
* every box whose axis-aligned hull lies within the arrival's radius
  (sup-norm, strict inequality).

Geometry ``kind`` 0 is a uniform grid on a window, ``kind`` 1 the cube-sphere
grid on the faces of ``[-1, 1]^d``; for the sphere ``gh[0]`` holds the largest
hull extent.  ``_scan`` walks the successors of one
node with resumable per-frame state and handles every successor in place
according to ``mode``; it only returns early when Tarjan's algorithm has to
descend into an unvisited node.  The per-candidate path avoids calls that
take array arguments, which dominate the cost otherwise.
"""

import numpy as np
from numba import njit

EXHAUSTED = -2
TARJAN = 0
REACH = 1
COLLECT = 2


@njit(cache=True, nogil=True)
def _euclid_rect(P, k, rho, glo, gh, N, lo, hi, depth):
    n = P.shape[1]
    for i in range(n):
        a = int(np.floor((P[k, i] - rho - glo[i]) / gh[i]))
        b = int(np.ceil((P[k, i] + rho - glo[i]) / gh[i])) - 1
        if a < 0:
            a = 0
        if b > N - 1:
            b = N - 1
        if a > b:
            return False
        lo[depth, i] = a
        hi[depth, i] = b
    return True


@njit(cache=True, nogil=True)
def _sphere_rect(P, r, rho, face, N, lo, hi, depth):
    d = P.shape[1]
    k = face // 2
    sg = 1.0 if face % 2 == 0 else -1.0
    L = sg * P[r, k] - rho
    U = sg * P[r, k] + rho
    floor_k = 1.0 / np.sqrt(d)
    if L < floor_k:
        L = floor_k
    if U > 1.0:
        U = 1.0
    if L > U:
        return False
    j = 0
    for ax in range(d):
        if ax == k:
            continue
        plo = P[r, ax] - rho
        phi = P[r, ax] + rho
        if plo < -1.0:
            plo = -1.0
        if phi > 1.0:
            phi = 1.0
        amin = plo / U if plo >= 0.0 else plo / L
        amax = phi / L if phi >= 0.0 else phi / U
        if amin < -1.0:
            amin = -1.0
        if amax > 1.0:
            amax = 1.0
        if amin > amax:
            return False
        a = int(np.floor((amin + 1.0) * 0.5 * N))
        b = int(np.floor((amax + 1.0) * 0.5 * N))
        if a < 0:
            a = 0
        if b > N - 1:
            b = N - 1
        if a > b:
            return False
        lo[depth, j] = a
        hi[depth, j] = b
        j += 1
    return True


@njit(cache=True, nogil=True)
def _scan(
    mode, depth, I0, I1, B0, B1, B2, C,
    fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active, fr_lo, fr_hi, fr_idx,
    kind, N, glo, gh, box_lo, box_hi, grid_to_box,
    arr_start, arr_contain, arr_point, arr_rho,
    box_to_node, node_start, node_boxes, sink,
):
    """Handle successors of the frame's node until exhausted or a descent is needed.

    Scratch arrays per mode:
    TARJAN  I0 index, I1 low, B0 on stack, B1 reaches sink, B2 self-loop
    REACH   I0 queue, B0 seen, B1 forbidden, C[0] queue tail
    COLLECT I0 stamp, I1 output, C[0] row, C[1] row offset, C[2] count, C[3] count only
    """
    v = fr_node[depth]
    n = fr_lo.shape[1]
    d = arr_point.shape[1]
    nfaces = 1 if kind == 0 else 2 * (n + 1)
    per_face = 1
    for i in range(n):
        per_face *= N
    mem = fr_mem[depth]
    k = fr_k[depth]
    kend = fr_kend[depth]
    phase = fr_phase[depth]
    face = fr_face[depth]
    active = fr_active[depth]
    mend = node_start[v + 1]
    idx = fr_idx[depth]
    rlo = fr_lo[depth]
    rhi = fr_hi[depth]
    result = EXHAUSTED
    while True:
        w = -1
        if k >= kend:
            mem += 1
            if mem >= mend:
                break
            b = node_boxes[mem]
            k = arr_start[b]
            kend = arr_start[b + 1]
            phase = 0
            continue
        if phase == 0:
            phase = 1
            face = -1
            active = 0
            c = arr_contain[k]
            w = sink if c < 0 else box_to_node[c]
        elif active == 0:
            face += 1
            rho = arr_rho[k]
            if face >= nfaces or not rho > 0.0:
                k += 1
                phase = 0
                continue
            if kind == 0:
                ok = _euclid_rect(arr_point, k, rho, glo, gh, N, fr_lo, fr_hi, depth)
            else:
                # cells are bounded by their patch, the test below by their hull
                ok = _sphere_rect(arr_point, k, rho + gh[0], face, N, fr_lo, fr_hi, depth)
            if ok:
                for i in range(n):
                    idx[i] = rlo[i]
                active = 1
            continue
        else:
            rho = arr_rho[k]
            gid = face * per_face if kind == 1 else 0
            base = 0
            for i in range(n):
                base = base * N + idx[i]
            gid += base
            # advance first so a suspended scan resumes after this cell
            i = n - 1
            while i >= 0:
                idx[i] += 1
                if idx[i] <= rhi[i]:
                    break
                idx[i] = rlo[i]
                i -= 1
            if i < 0:
                active = 0
            b2 = grid_to_box[gid]
            if b2 < 0:
                continue
            if kind == 1:
                far = False
                for j in range(d):
                    x = arr_point[k, j]
                    if box_lo[b2, j] - x >= rho or x - box_hi[b2, j] >= rho:
                        far = True
                        break
                if far:
                    continue
            w = box_to_node[b2]
        if w < 0:
            continue
        if mode == TARJAN:
            if w == sink:
                B1[v] = True
            elif w == v:
                B2[v] = True
            elif I0[w] == -1:
                result = w
                break
            elif B0[w] and I0[w] < I1[v]:
                I1[v] = I0[w]
        elif mode == REACH:
            if (w == sink or not B1[w]) and not B0[w]:
                B0[w] = True
                I0[C[0]] = w
                C[0] += 1
        else:
            if I0[w] != C[0]:
                I0[w] = C[0]
                if C[3] == 0:
                    I1[C[1] + C[2]] = w
                C[2] += 1
    fr_mem[depth] = mem
    fr_k[depth] = k
    fr_kend[depth] = kend
    fr_phase[depth] = phase
    fr_face[depth] = face
    fr_active[depth] = active
    return result


@njit(cache=True, nogil=True)
def _reset(depth, v, fr_node, fr_mem, fr_k, fr_kend, node_start):
    fr_node[depth] = v
    fr_mem[depth] = node_start[v] - 1
    fr_k[depth] = 0
    fr_kend[depth] = 0


def _frames(V, n):
    D = V + 1
    return (
        np.zeros(D, np.int64),
        np.zeros(D, np.int64),
        np.zeros(D, np.int64),
        np.zeros(D, np.int64),
        np.zeros(D, np.int8),
        np.zeros(D, np.int64),
        np.zeros(D, np.int8),
        np.zeros((D, n), np.int64),
        np.zeros((D, n), np.int64),
        np.zeros((D, n), np.int64),
    )


@njit(cache=True, nogil=True)
def _tarjan(
    roots, V,
    fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active, fr_lo, fr_hi, fr_idx,
    kind, N, glo, gh, box_lo, box_hi, grid_to_box,
    arr_start, arr_contain, arr_point, arr_rho,
    box_to_node, node_start, node_boxes,
):
    sink = V
    index = np.full(V, -1, np.int64)
    low = np.zeros(V, np.int64)
    onstack = np.zeros(V, np.bool_)
    stack = np.zeros(V, np.int64)
    comp = np.full(V, -1, np.int64)
    selfloop = np.zeros(V, np.bool_)
    to_sink = np.zeros(V, np.bool_)
    C = np.zeros(1, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for r in range(roots.shape[0]):
        root = roots[r]
        if index[root] != -1:
            continue
        depth = 0
        _reset(0, root, fr_node, fr_mem, fr_k, fr_kend, node_start)
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        onstack[root] = True
        while depth >= 0:
            v = fr_node[depth]
            w = _scan(
                TARJAN, depth, index, low, onstack, to_sink, selfloop, C,
                fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active,
                fr_lo, fr_hi, fr_idx, kind, N, glo, gh, box_lo, box_hi, grid_to_box,
                arr_start, arr_contain, arr_point, arr_rho, box_to_node, node_start,
                node_boxes, sink,
            )
            if w == EXHAUSTED:
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        x = stack[sp]
                        onstack[x] = False
                        comp[x] = ncomp
                        if x == v:
                            break
                    ncomp += 1
                depth -= 1
                if depth >= 0:
                    u = fr_node[depth]
                    if low[v] < low[u]:
                        low[u] = low[v]
                continue
            depth += 1
            _reset(depth, w, fr_node, fr_mem, fr_k, fr_kend, node_start)
            index[w] = counter
            low[w] = counter
            counter += 1
            stack[sp] = w
            sp += 1
            onstack[w] = True
    return comp, ncomp, selfloop, to_sink


@njit(cache=True, nogil=True)
def _reach(
    starts, V, forbid,
    fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active, fr_lo, fr_hi, fr_idx,
    kind, N, glo, gh, box_lo, box_hi, grid_to_box,
    arr_start, arr_contain, arr_point, arr_rho,
    box_to_node, node_start, node_boxes,
):
    sink = V
    seen = np.zeros(V + 1, np.bool_)
    queue = np.zeros(V + 1, np.int64)
    dummy_i = np.zeros(0, np.int64)
    dummy_b = np.zeros(0, np.bool_)
    C = np.zeros(1, np.int64)
    head = 0
    for i in range(starts.shape[0]):
        s = starts[i]
        if not seen[s]:
            seen[s] = True
            queue[C[0]] = s
            C[0] += 1
    while head < C[0]:
        v = queue[head]
        head += 1
        if v == sink:
            continue
        _reset(0, v, fr_node, fr_mem, fr_k, fr_kend, node_start)
        _scan(
            REACH, 0, queue, dummy_i, seen, forbid, dummy_b, C,
            fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active,
            fr_lo, fr_hi, fr_idx, kind, N, glo, gh, box_lo, box_hi, grid_to_box,
            arr_start, arr_contain, arr_point, arr_rho, box_to_node, node_start,
            node_boxes, sink,
        )
    return seen


@njit(cache=True, nogil=True)
def _collect(
    nodes, V, count_only, indptr, indices,
    fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active, fr_lo, fr_hi, fr_idx,
    kind, N, glo, gh, box_lo, box_hi, grid_to_box,
    arr_start, arr_contain, arr_point, arr_rho,
    box_to_node, node_start, node_boxes,
):
    """Deduplicated successor lists of ``nodes`` (CSR; ``count_only`` fills sizes)."""
    sink = V
    stamp = np.full(V + 1, -1, np.int64)
    dummy_b = np.zeros(0, np.bool_)
    C = np.zeros(4, np.int64)
    C[3] = 1 if count_only else 0
    total = 0
    for r in range(nodes.shape[0]):
        v = nodes[r]
        _reset(0, v, fr_node, fr_mem, fr_k, fr_kend, node_start)
        C[0] = r
        C[1] = indptr[r]
        C[2] = 0
        _scan(
            COLLECT, 0, stamp, indices, dummy_b, dummy_b, dummy_b, C,
            fr_node, fr_mem, fr_k, fr_kend, fr_phase, fr_face, fr_active,
            fr_lo, fr_hi, fr_idx, kind, N, glo, gh, box_lo, box_hi, grid_to_box,
            arr_start, arr_contain, arr_point, arr_rho, box_to_node, node_start,
            node_boxes, sink,
        )
        cnt = C[2]
        if count_only:
            indptr[r + 1] = indptr[r] + cnt
        else:
            indices[indptr[r]:indptr[r] + cnt].sort()
        total += cnt
    return total
