# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot per-image loops (Cython backend).

Semantics mirror `_pyk` exactly; see that module for contracts.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "compiled"


def label_components(bits):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    out = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] lab = out
    qr_arr = np.empty(h * w, dtype=np.int64)
    qc_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] qr = qr_arr
    cdef cnp.int64_t[::1] qc = qc_arr
    cdef Py_ssize_t i, j, qi, qj, ni, nj, lo_i, hi_i, lo_j, hi_j, head, tail
    cdef int count = 0
    for i in range(h):
        for j in range(w):
            if m[i, j] != 0 and lab[i, j] == 0:
                count += 1
                lab[i, j] = count
                qr[0] = i
                qc[0] = j
                head = 0
                tail = 1
                while head < tail:
                    qi = qr[head]
                    qj = qc[head]
                    head += 1
                    lo_i = qi - 1 if qi > 0 else 0
                    hi_i = qi + 2 if qi + 2 < h else h
                    lo_j = qj - 1 if qj > 0 else 0
                    hi_j = qj + 2 if qj + 2 < w else w
                    for ni in range(lo_i, hi_i):
                        for nj in range(lo_j, hi_j):
                            if m[ni, nj] != 0 and lab[ni, nj] == 0:
                                lab[ni, nj] = count
                                qr[tail] = ni
                                qc[tail] = nj
                                tail += 1
    return out, count


def masked_means(masks, feats):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef float[:, ::1] f = np.ascontiguousarray(feats, dtype=np.float32)
    cdef Py_ssize_t n = m.shape[0], hw = m.shape[1], c = f.shape[1]
    out = np.zeros((n, c), dtype=np.float32)
    cdef float[:, ::1] o = out
    acc_arr = np.zeros(c, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    cdef Py_ssize_t k, p, d
    cdef long cnt
    for k in range(n):
        cnt = 0
        for d in range(c):
            acc[d] = 0.0
        for p in range(hw):
            if m[k, p] != 0:
                cnt += 1
                for d in range(c):
                    acc[d] += f[p, d]
        if cnt > 0:
            for d in range(c):
                o[k, d] = <float> (acc[d] / cnt)
    return out


def cascade_scan(masks, bg, sims, double tau_ioa, double tau_f):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef cnp.uint8_t[::1] b = np.ascontiguousarray(bg, dtype=np.uint8)
    cdef double[::1] s = np.ascontiguousarray(sims, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], hw = m.shape[1]
    seen_arr = np.zeros(hw, dtype=np.uint8)
    cdef cnp.uint8_t[::1] seen = seen_arr
    out = np.zeros(n, dtype=bool)
    cdef cnp.uint8_t[::1] acc = out.view(np.uint8)
    cdef Py_ssize_t k, p
    cdef long unseen, inter
    for k in range(n):
        unseen = 0
        inter = 0
        for p in range(hw):
            if m[k, p] != 0 and seen[p] == 0:
                unseen += 1
                if b[p] != 0:
                    inter += 1
        if unseen == 0:
            continue
        if (<double> inter) / unseen < tau_ioa and s[k] < tau_f:
            acc[k] = 1
            for p in range(hw):
                if m[k, p] != 0:
                    seen[p] = 1
    return out


def merge_scan(masks, feats, embs, double tau_f, double tau_ioa, bint use_f, bint use_ioa):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef float[:, ::1] f = np.ascontiguousarray(feats, dtype=np.float32)
    cdef float[:, ::1] e = np.ascontiguousarray(embs, dtype=np.float32)
    cdef Py_ssize_t n = m.shape[0], hw = m.shape[1], c = f.shape[1]

    slot_mask_arr = np.zeros((n, hw), dtype=np.uint8)
    slot_emb_arr = np.zeros((n, c), dtype=np.float64)
    slot_norm_arr = np.zeros(n, dtype=np.float64)
    alive_arr = np.zeros(n, dtype=np.uint8)
    owner_arr = np.full(n, -1, dtype=np.int32)
    comp_arr = np.empty(n, dtype=np.int64)
    flag_arr = np.zeros(n, dtype=np.uint8)
    pe_arr = np.empty(c, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] slot_mask = slot_mask_arr
    cdef double[:, ::1] slot_emb = slot_emb_arr
    cdef double[::1] slot_norm = slot_norm_arr
    cdef cnp.uint8_t[::1] alive = alive_arr
    cdef cnp.int32_t[::1] owner = owner_arr
    cdef cnp.int64_t[::1] comp = comp_arr
    cdef cnp.uint8_t[::1] flag = flag_arr
    cdef double[::1] pe = pe_arr

    cdef Py_ssize_t k, p, d, slot, q, n_slots = 0, nc, ci
    cdef long area, inter, cnt
    cdef double p_norm, dot, den, sim
    cdef bint merged

    for k in range(n):
        area = 0
        for p in range(hw):
            if m[k, p] != 0:
                area += 1
        p_norm = 0.0
        for d in range(c):
            pe[d] = e[k, d]
            p_norm += pe[d] * pe[d]
        p_norm = sqrt(p_norm)

        nc = 0
        for slot in range(n_slots):
            if alive[slot] == 0:
                continue
            merged = False
            if use_f:
                dot = 0.0
                for d in range(c):
                    dot += slot_emb[slot, d] * pe[d]
                den = slot_norm[slot] * p_norm
                if den == 0.0:
                    sim = 0.0
                else:
                    sim = dot / den
                    if sim > 1.0:
                        sim = 1.0
                    elif sim < -1.0:
                        sim = -1.0
                if sim > tau_f:
                    merged = True
            if not merged and use_ioa:
                inter = 0
                for p in range(hw):
                    if m[k, p] != 0 and slot_mask[slot, p] != 0:
                        inter += 1
                if (<double> inter) / area > tau_ioa:
                    merged = True
            if merged:
                comp[nc] = slot
                nc += 1

        slot = n_slots
        n_slots += 1
        if nc == 0:
            for p in range(hw):
                slot_mask[slot, p] = m[k, p]
            for d in range(c):
                slot_emb[slot, d] = pe[d]
            slot_norm[slot] = p_norm
        else:
            for p in range(hw):
                slot_mask[slot, p] = m[k, p]
            for ci in range(nc):
                q = comp[ci]
                alive[q] = 0
                flag[q] = 1
                for p in range(hw):
                    if slot_mask[q, p] != 0:
                        slot_mask[slot, p] = 1
            for q in range(k):
                if owner[q] >= 0 and flag[owner[q]] != 0:
                    owner[q] = <cnp.int32_t> slot
            for ci in range(nc):
                flag[comp[ci]] = 0
            cnt = 0
            for d in range(c):
                pe[d] = 0.0
            for p in range(hw):
                if slot_mask[slot, p] != 0:
                    cnt += 1
                    for d in range(c):
                        pe[d] += f[p, d]
            p_norm = 0.0
            for d in range(c):
                slot_emb[slot, d] = pe[d] / cnt
                p_norm += slot_emb[slot, d] * slot_emb[slot, d]
            slot_norm[slot] = sqrt(p_norm)
        alive[slot] = 1
        owner[k] = <cnp.int32_t> slot

    rank_arr = np.full(n_slots if n_slots else 1, -1, dtype=np.int32)
    cdef cnp.int32_t[::1] rank = rank_arr
    cdef int mcount = 0
    for slot in range(n_slots):
        if alive[slot] != 0:
            rank[slot] = mcount
            mcount += 1
    assign = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] a = assign
    for k in range(n):
        a[k] = rank[owner[k]]
    return assign, mcount


def rle_encode(flat):
    cdef cnp.uint8_t[::1] v = np.ascontiguousarray(flat, dtype=np.uint8)
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, m = 0
    cdef cnp.uint8_t cur = 0
    cdef long run = 0
    for i in range(n):
        if (v[i] != 0) == cur:
            run += 1
        else:
            out[m] = run
            m += 1
            cur = not cur
            run = 1
    out[m] = run
    m += 1
    return out_arr[:m].copy()


def rle_decode(counts, Py_ssize_t total):
    cdef cnp.int64_t[::1] cts = np.ascontiguousarray(counts, dtype=np.int64)
    out = np.zeros(total, dtype=bool)
    cdef cnp.uint8_t[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i, j, pos = 0
    cdef cnp.uint8_t val = 0
    for i in range(cts.shape[0]):
        if val:
            for j in range(pos, pos + cts[i]):
                o[j] = 1
        pos += cts[i]
        val = not val
    return out
