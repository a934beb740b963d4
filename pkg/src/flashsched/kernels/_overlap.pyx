# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled bucket-scan kernels; same contracts as ``_pure``.

Entries are (die, plane, page_offset, kind, tag_seq, mem_id) tuples of
small ints. Plane sets are tracked as bitmasks (planes_per_die is small).
"""

IMPL = "cython"

DEF READ = 0
DEF PROGRAM = 1
DEF ERASE = 2


def fifo_pick(list entries, Py_ssize_t cap):
    cdef Py_ssize_t n = len(entries)
    cdef tuple head = <tuple>entries[0]
    cdef int kind = <int>head[3]
    if kind == ERASE:
        return [0]
    cdef list picked = [0]
    cdef dict die_pgoff = {}
    cdef dict die_planes = {}
    cdef int die = <int>head[0]
    cdef int plane = <int>head[1]
    cdef int pgoff
    cdef tuple e
    cdef Py_ssize_t i
    cdef object locked
    die_pgoff[die] = <int>head[2]
    die_planes[die] = 1 << plane
    for i in range(1, n):
        if len(picked) >= cap:
            break
        e = <tuple>entries[i]
        if <int>e[3] != kind:
            if kind == PROGRAM and <int>e[3] == READ:
                break
            continue
        die = <int>e[0]
        plane = <int>e[1]
        pgoff = <int>e[2]
        locked = die_pgoff.get(die)
        if locked is None:
            die_pgoff[die] = pgoff
            die_planes[die] = 1 << plane
            picked.append(i)
        elif pgoff == <int>locked and not (<int>die_planes[die]) >> plane & 1:
            die_planes[die] = (<int>die_planes[die]) | (1 << plane)
            picked.append(i)
    return picked


cdef inline int _popcount(unsigned int x):
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


def score_bucket(list entries):
    cdef dict group_planes = {}
    cdef dict tag_group_planes = {}
    cdef tuple e
    cdef tuple gkey, tkey
    cdef object cur
    for e in entries:
        gkey = (e[3], e[0], e[2])
        cur = group_planes.get(gkey)
        if cur is None:
            group_planes[gkey] = 1 << <int>e[1]
        else:
            group_planes[gkey] = (<unsigned int>cur) | (1 << <int>e[1])
        tkey = (e[4], e[3], e[0], e[2])
        cur = tag_group_planes.get(tkey)
        if cur is None:
            tag_group_planes[tkey] = 1 << <int>e[1]
        else:
            tag_group_planes[tkey] = (<unsigned int>cur) | (1 << <int>e[1])

    cdef dict best_by_die = {}
    cdef dict tag_best_by_die = {}
    cdef int n
    cdef object key, prev
    for gkey, cur in group_planes.items():
        n = _popcount(<unsigned int>cur)
        key = (gkey[0], gkey[1])
        prev = best_by_die.get(key)
        if prev is None or n > <int>prev:
            best_by_die[key] = n
    cdef dict die_totals = {}
    for key, cur in best_by_die.items():
        if key[0] in die_totals:
            (<dict>die_totals[key[0]])[key[1]] = cur
        else:
            die_totals[key[0]] = {key[1]: cur}
    for tkey, cur in tag_group_planes.items():
        n = _popcount(<unsigned int>cur)
        key = (tkey[0], tkey[1], tkey[2])
        prev = tag_best_by_die.get(key)
        if prev is None or n > <int>prev:
            tag_best_by_die[key] = n
    cdef dict tag_die_totals = {}
    for key, cur in tag_best_by_die.items():
        tkey = (key[0], key[1])
        if tkey in tag_die_totals:
            (<dict>tag_die_totals[tkey])[key[2]] = cur
        else:
            tag_die_totals[tkey] = {key[2]: cur}

    cdef list scores = []
    cdef int depth, conn, die
    cdef dict totals
    cdef object d
    for e in entries:
        die = <int>e[0]
        depth = _popcount(<unsigned int>group_planes[(e[3], e[0], e[2])])
        totals = <dict>die_totals[e[3]]
        for d, cur in totals.items():
            if <int>d != die:
                depth += <int>cur
        conn = _popcount(<unsigned int>tag_group_planes[(e[4], e[3], e[0], e[2])])
        totals = <dict>tag_die_totals[(e[4], e[3])]
        for d, cur in totals.items():
            if <int>d != die:
                conn += <int>cur
        scores.append((depth, conn))
    return scores


def priority_pick(list entries, Py_ssize_t cap):
    cdef list scores = score_bucket(entries)
    cdef Py_ssize_t best_i = 0, i
    cdef tuple best_key = None, key, e, sc
    for i in range(len(entries)):
        e = <tuple>entries[i]
        sc = <tuple>scores[i]
        key = (-<int>sc[0], -<int>sc[1], e[4], e[5])
        if best_key is None or key < best_key:
            best_key = key
            best_i = i
    cdef tuple anchor = <tuple>entries[best_i]
    cdef int kind = <int>anchor[3]
    cdef int a_die = <int>anchor[0]
    cdef int a_pgoff = <int>anchor[2]
    cdef object a_tag = anchor[4]

    cdef dict by_die = {}
    cdef dict groups
    for i in range(len(entries)):
        e = <tuple>entries[i]
        if <int>e[3] != kind:
            continue
        if e[0] in by_die:
            groups = <dict>by_die[e[0]]
        else:
            groups = {}
            by_die[e[0]] = groups
        if e[2] in groups:
            (<list>groups[e[2]]).append(i)
        else:
            groups[e[2]] = [i]

    cdef list batch = []
    cdef list chosen, idxs
    cdef object g, best_g, gkey2, best_gkey
    cdef dict per_plane
    cdef Py_ssize_t j
    cdef int planes_mask, same_tag
    for die in sorted(by_die):
        groups = <dict>by_die[die]
        if <int>die == a_die:
            chosen = <list>groups[a_pgoff]
        else:
            best_g = None
            best_gkey = None
            for g, idxs in groups.items():
                planes_mask = 0
                same_tag = 0
                for j in (<list>idxs):
                    e = <tuple>entries[j]
                    planes_mask |= 1 << <int>e[1]
                    if e[4] == a_tag:
                        same_tag += 1
                gkey2 = (-_popcount(<unsigned int>planes_mask), -same_tag, g)
                if best_gkey is None or gkey2 < best_gkey:
                    best_gkey = gkey2
                    best_g = g
            chosen = <list>groups[best_g]
        per_plane = {}
        for j in (<list>chosen):
            e = <tuple>entries[j]
            key = (e[4] != a_tag, e[4], e[5])
            cur = per_plane.get(e[1])
            if cur is None or key < (<tuple>cur)[0]:
                per_plane[e[1]] = (key, j)
        members = sorted(per_plane.values(),
                         key=lambda t: (<tuple>entries[<Py_ssize_t>t[1]])[1])
        batch.append((die, [t[1] for t in members]))

    cdef list ordered = []
    for die, idxs in batch:
        if <int>die == a_die:
            ordered.extend(idxs)
            break
    for die, idxs in batch:
        if <int>die != a_die:
            ordered.extend(idxs)
    del ordered[cap:]
    sc = <tuple>scores[best_i]
    return ordered, sc[0], sc[1]
