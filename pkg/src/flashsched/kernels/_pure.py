"""Pure-Python bucket-scan kernels.

These are the hot inner loops of the simulator: every transaction start
and every over-commitment decision scans a per-chip bucket of pending
entries. A compiled variant with the same signatures lives in
``_overlap.pyx``; ``flashsched.kernels`` picks whichever imports.

A bucket entry is a 6-tuple of small ints::

    (die, plane, page_offset, kind, tag_seq, mem_id)

``kind`` is 0=read, 1=program, 2=erase. Coalition legality: members share
the chip and kind; within one die all members carry the same page offset
and pairwise-distinct planes; across dies there is no address constraint.
"""

IMPL = "pure"

READ, PROGRAM, ERASE = 0, 1, 2


def fifo_pick(entries, cap):
    """Compose one transaction FIFO-greedily from the bucket head.

    Returns indices into ``entries`` in commit order. The head entry fixes
    the kind; later compatible entries join. Writes never overtake an
    older read (scan stops), reads may bypass queued writes (host buffer
    resolves read-after-write), erases never coalesce.
    """
    head = entries[0]
    kind = head[3]
    if kind == ERASE:
        return [0]
    picked = [0]
    die_pgoff = {head[0]: head[2]}
    die_planes = {head[0]: {head[1]}}
    for i in range(1, len(entries)):
        if len(picked) >= cap:
            break
        e = entries[i]
        if e[3] != kind:
            if kind == PROGRAM and e[3] == READ:
                break
            continue
        die, plane, pgoff = e[0], e[1], e[2]
        locked = die_pgoff.get(die)
        if locked is None:
            die_pgoff[die] = pgoff
            die_planes[die] = {plane}
            picked.append(i)
        elif pgoff == locked and plane not in die_planes[die]:
            die_planes[die].add(plane)
            picked.append(i)
    return picked


def score_bucket(entries):
    """Overlap depth and connectivity for every bucket entry.

    depth(e): size of the largest legal coalition containing e, computed
    by grouping on (kind, die, page offset) and summing the best group of
    every other die (linear in the bucket, not exponential).
    conn(e): largest member count of e's own tag within such a coalition.
    """
    group_planes = {}
    tag_group_planes = {}
    for e in entries:
        gkey = (e[3], e[0], e[2])
        s = group_planes.get(gkey)
        if s is None:
            group_planes[gkey] = {e[1]}
        else:
            s.add(e[1])
        tkey = (e[4], e[3], e[0], e[2])
        s = tag_group_planes.get(tkey)
        if s is None:
            tag_group_planes[tkey] = {e[1]}
        else:
            s.add(e[1])

    best_by_die = {}
    for (kind, die, _pgoff), planes in group_planes.items():
        key = (kind, die)
        n = len(planes)
        if n > best_by_die.get(key, 0):
            best_by_die[key] = n
    die_totals = {}
    for (kind, die), n in best_by_die.items():
        die_totals.setdefault(kind, {})[die] = n

    tag_best_by_die = {}
    for (tag, kind, die, _pgoff), planes in tag_group_planes.items():
        key = (tag, kind, die)
        n = len(planes)
        if n > tag_best_by_die.get(key, 0):
            tag_best_by_die[key] = n
    tag_die_totals = {}
    for (tag, kind, die), n in tag_best_by_die.items():
        tag_die_totals.setdefault((tag, kind), {})[die] = n

    scores = []
    for e in entries:
        die, kind, tag = e[0], e[3], e[4]
        own = len(group_planes[(kind, die, e[2])])
        depth = own
        for d, n in die_totals[kind].items():
            if d != die:
                depth += n
        conn = len(tag_group_planes[(tag, kind, die, e[2])])
        for d, n in tag_die_totals[(tag, kind)].items():
            if d != die:
                conn += n
        scores.append((depth, conn))
    return scores


def priority_pick(entries, cap):
    """Overlap-depth/connectivity prioritized over-commitment batch.

    Picks the entry maximizing (depth, connectivity) with ties broken by
    tag arrival then request id, then constructs its maximal legal
    coalition: the anchor's own (die, page offset) group plus the best
    group of every other die, one member per plane, anchor's tag
    preferred. Returns (indices in commit order, depth, conn) with the
    batch truncated to ``cap`` keeping the anchor's die group first.
    """
    scores = score_bucket(entries)
    best_i = 0
    best_key = None
    for i, e in enumerate(entries):
        d, c = scores[i]
        key = (-d, -c, e[4], e[5])
        if best_key is None or key < best_key:
            best_key = key
            best_i = i
    anchor = entries[best_i]
    kind, a_die, a_pgoff, a_tag = anchor[3], anchor[0], anchor[2], anchor[4]

    by_die = {}
    for i, e in enumerate(entries):
        if e[3] != kind:
            continue
        by_die.setdefault(e[0], {}).setdefault(e[2], []).append(i)

    batch = []
    for die in sorted(by_die):
        groups = by_die[die]
        if die == a_die:
            chosen = groups[a_pgoff]
        else:
            def group_key(g):
                idxs = groups[g]
                planes = {entries[i][1] for i in idxs}
                same_tag = sum(1 for i in idxs if entries[i][4] == a_tag)
                return (-len(planes), -same_tag, g)
            chosen = groups[min(groups, key=group_key)]
        per_plane = {}
        for i in chosen:
            e = entries[i]
            k = (e[4] != a_tag, e[4], e[5])
            cur = per_plane.get(e[1])
            if cur is None or k < cur[0]:
                per_plane[e[1]] = (k, i)
        members = sorted(per_plane.values(), key=lambda t: entries[t[1]][1])
        batch.append((die, [i for _, i in members]))

    ordered = []
    a_group = next(m for d, m in batch if d == a_die)
    ordered.extend(a_group)
    for die, members in batch:
        if die != a_die:
            ordered.extend(members)
    ordered = ordered[:cap]
    d, c = scores[best_i]
    return ordered, d, c
