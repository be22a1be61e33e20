"""Hot loops of the tree learner.

Each kernel exists twice: a numba-compiled loop (``*_nb``) and a vectorised
numpy twin (``*_np``). The public names pick one according to
``kfhe._accel.USE_NUMBA``. The twins are written so that every floating point
value they produce is computed by the same sequence of IEEE operations, so
trees grown on either path are identical, not merely close.

Split quality is scored on integer class counts. For a candidate with left
counts ``L`` and right counts ``R``

    score = (sum(L**2) * n_R + sum(R**2) * n_L) / (n_L * n_R)

which equals ``n - n_L*gini(L) - n_R*gini(R)``. Maximising it minimises the
weighted child impurity. All products are exact integers below 2**53, so the
only rounding happens in the final division.
"""

import numpy as np

from ._accel import njit, pick

# node kinds
LEAF = 0
NUMERIC = 1
CATEGORICAL = 2

# categorical routing table entries
ROUTE_DEFAULT = 0
ROUTE_LEFT = 1
ROUTE_RIGHT = 2


@njit
def _split_search_nb(X, y, n_classes, is_cat, n_cats, min_leaf):
    m, d = X.shape
    max_card = 1
    for f in range(d):
        if is_cat[f] and n_cats[f] > max_card:
            max_card = n_cats[f]

    best_score = -1.0
    best_feat = -1
    best_thr = 0.0
    best_mask = np.zeros(max_card, np.uint8)

    total = np.zeros(n_classes, np.int64)
    for i in range(m):
        total[y[i]] += 1
    s_total = 0
    for j in range(n_classes):
        s_total += total[j] * total[j]

    left = np.zeros(n_classes, np.int64)
    right = np.zeros(n_classes, np.int64)

    for f in range(d):
        if is_cat[f]:
            K = n_cats[f]
            cnt = np.zeros((K, n_classes), np.int64)
            tot = np.zeros(K, np.int64)
            for i in range(m):
                k = int(X[i, f])
                cnt[k, y[i]] += 1
                tot[k] += 1

            # single category against the rest
            for k in range(K):
                nl = tot[k]
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sl = 0
                sr = 0
                for j in range(n_classes):
                    a = cnt[k, j]
                    b = total[j] - a
                    sl += a * a
                    sr += b * b
                score = (float(sl) * float(nr) + float(sr) * float(nl)) / (float(nl) * float(nr))
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_mask[:] = 0
                    best_mask[k] = 1

            # prefixes of the categories ordered by class-0 proportion
            n_present = 0
            for k in range(K):
                if tot[k] > 0:
                    n_present += 1
            present = np.empty(n_present, np.int64)
            key = np.empty(n_present, np.float64)
            p = 0
            for k in range(K):
                if tot[k] > 0:
                    present[p] = k
                    key[p] = cnt[k, 0] / tot[k]
                    p += 1
            order = np.argsort(key, kind="mergesort")
            left[:] = 0
            nl = 0
            for q in range(n_present - 1):
                k = present[order[q]]
                nl += tot[k]
                for j in range(n_classes):
                    left[j] += cnt[k, j]
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sl = 0
                sr = 0
                for j in range(n_classes):
                    b = total[j] - left[j]
                    sl += left[j] * left[j]
                    sr += b * b
                score = (float(sl) * float(nr) + float(sr) * float(nl)) / (float(nl) * float(nr))
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_mask[:] = 0
                    for r in range(q + 1):
                        best_mask[present[order[r]]] = 1
        else:
            col = X[:, f]
            order = np.argsort(col, kind="mergesort")
            left[:] = 0
            for j in range(n_classes):
                right[j] = total[j]
            sl = 0
            sr = s_total
            for i in range(m - 1):
                j = y[order[i]]
                sl += 2 * left[j] + 1
                left[j] += 1
                sr -= 2 * right[j] - 1
                right[j] -= 1
                nl = i + 1
                nr = m - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                xa = col[order[i]]
                xb = col[order[i + 1]]
                if not xa < xb:
                    continue
                score = (float(sl) * float(nr) + float(sr) * float(nl)) / (float(nl) * float(nr))
                if score > best_score:
                    best_score = score
                    best_feat = f
                    thr = 0.5 * (xa + xb)
                    if thr >= xb:
                        thr = xa
                    best_thr = thr

    return best_feat, best_thr, best_score, best_mask


def _split_search_np(X, y, n_classes, is_cat, n_cats, min_leaf):
    m, d = X.shape
    max_card = max([1] + [int(n_cats[f]) for f in range(d) if is_cat[f]])

    best_score = -1.0
    best_feat = -1
    best_thr = 0.0
    best_mask = np.zeros(max_card, np.uint8)

    total = np.bincount(y, minlength=n_classes).astype(np.int64)
    onehot = np.zeros((m, n_classes), np.int64)
    onehot[np.arange(m), y] = 1

    for f in range(d):
        if is_cat[f]:
            K = int(n_cats[f])
            codes = X[:, f].astype(np.int64)
            cnt = np.zeros((K, n_classes), np.int64)
            np.add.at(cnt, (codes, y), 1)
            tot = cnt.sum(axis=1)

            nl = tot
            nr = m - nl
            sl = (cnt * cnt).sum(axis=1)
            rest = total[None, :] - cnt
            sr = (rest * rest).sum(axis=1)
            ok = (nl >= min_leaf) & (nr >= min_leaf)
            if ok.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    score = (sl.astype(np.float64) * nr.astype(np.float64)
                             + sr.astype(np.float64) * nl.astype(np.float64)) / (
                        nl.astype(np.float64) * nr.astype(np.float64))
                score = np.where(ok, score, -np.inf)
                k = int(np.argmax(score))
                if score[k] > best_score:
                    best_score = float(score[k])
                    best_feat = f
                    best_mask[:] = 0
                    best_mask[k] = 1

            present = np.flatnonzero(tot > 0)
            if present.size >= 2:
                key = cnt[present, 0] / tot[present]
                order = present[np.argsort(key, kind="mergesort")]
                cum = np.cumsum(cnt[order], axis=0)[:-1]
                nl = cum.sum(axis=1)
                nr = m - nl
                rest = total[None, :] - cum
                sl = (cum * cum).sum(axis=1)
                sr = (rest * rest).sum(axis=1)
                ok = (nl >= min_leaf) & (nr >= min_leaf)
                if ok.any():
                    with np.errstate(divide="ignore", invalid="ignore"):
                        score = (sl.astype(np.float64) * nr.astype(np.float64)
                                 + sr.astype(np.float64) * nl.astype(np.float64)) / (
                            nl.astype(np.float64) * nr.astype(np.float64))
                    score = np.where(ok, score, -np.inf)
                    q = int(np.argmax(score))
                    if score[q] > best_score:
                        best_score = float(score[q])
                        best_feat = f
                        best_mask[:] = 0
                        best_mask[order[: q + 1]] = 1
        else:
            col = X[:, f]
            order = np.argsort(col, kind="mergesort")
            xs = col[order]
            cum = np.cumsum(onehot[order], axis=0)[:-1]
            rest = total[None, :] - cum
            sl = (cum * cum).sum(axis=1)
            sr = (rest * rest).sum(axis=1)
            nl = np.arange(1, m, dtype=np.int64)
            nr = m - nl
            ok = (nl >= min_leaf) & (nr >= min_leaf) & (xs[:-1] < xs[1:])
            if not ok.any():
                continue
            score = (sl.astype(np.float64) * nr.astype(np.float64)
                     + sr.astype(np.float64) * nl.astype(np.float64)) / (
                nl.astype(np.float64) * nr.astype(np.float64))
            score = np.where(ok, score, -np.inf)
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = float(score[i])
                best_feat = f
                xa, xb = xs[i], xs[i + 1]
                thr = 0.5 * (xa + xb)
                if thr >= xb:
                    thr = xa
                best_thr = float(thr)

    return best_feat, best_thr, best_score, best_mask


@njit
def _apply_tree_nb(X, kind, feature, threshold, left, right, cat_route, default_left):
    n = X.shape[0]
    card = cat_route.shape[1]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while kind[node] != LEAF:
            v = X[i, feature[node]]
            if kind[node] == NUMERIC:
                go_left = v <= threshold[node]
            else:
                route = ROUTE_DEFAULT
                if v >= 0 and v < card:
                    route = cat_route[node, int(v)]
                if route == ROUTE_DEFAULT:
                    go_left = default_left[node] == 1
                else:
                    go_left = route == ROUTE_LEFT
            node = left[node] if go_left else right[node]
        out[i] = node
    return out


def _apply_tree_np(X, kind, feature, threshold, left, right, cat_route, default_left):
    n = X.shape[0]
    card = cat_route.shape[1]
    node = np.zeros(n, np.int64)
    active = np.flatnonzero(kind[node] != LEAF)
    while active.size:
        nd = node[active]
        v = X[active, feature[nd]]
        go_left = v <= threshold[nd]
        is_c = kind[nd] == CATEGORICAL
        if is_c.any():
            vc = v[is_c]
            ndc = nd[is_c]
            inside = (vc >= 0) & (vc < card)
            route = np.full(vc.shape, ROUTE_DEFAULT, np.int8)
            route[inside] = cat_route[ndc[inside], vc[inside].astype(np.int64)]
            gl = np.where(route == ROUTE_DEFAULT, default_left[ndc] == 1, route == ROUTE_LEFT)
            go_left[is_c] = gl
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[kind[node[active]] != LEAF]
    return node


split_search = pick(_split_search_nb, _split_search_np)
apply_tree = pick(_apply_tree_nb, _apply_tree_np)
