"""Brute-force reference implementations used only by the tests.

Each one computes the same quantity as a library function by a different,
deliberately naive route.
"""

from __future__ import annotations

import itertools
import math
import re
import unicodedata
from functools import lru_cache


def sort_by_enumeration(keys):
    """Index order of the lexicographically smallest permutation (stable on ties)."""
    best = None
    for perm in itertools.permutations(range(len(keys))):
        cand = [keys[i] + (i,) for i in perm]
        if all(cand[j] <= cand[j + 1] for j in range(len(cand) - 1)):
            best = list(perm)
            break
    return best


def dotted_parents(numbers):
    """Parent index of each dotted number: latest earlier entry equal to its immediate prefix."""
    out = []
    for j, num in enumerate(numbers):
        parent = None
        if len(num) > 1:
            for i in range(j - 1, -1, -1):
                if numbers[i] == num[:-1]:
                    parent = i
                    break
        out.append(parent)
    return out


def interval_partition(types):
    """For a reading-order list of 'H'/'T' markers: owning header index (None before the first)."""
    owner, current = [], None
    for i, t in enumerate(types):
        if t == "H":
            current = i
            owner.append(None)
        else:
            owner.append(current)
    return owner


def regex_tokens(text):
    return len(re.findall(r"\S+", text))


def bm25_terms(text):
    terms = []
    for run in re.findall(r"\S+", text.lower()):
        chars = list(run)
        while chars and unicodedata.category(chars[0])[0] == "P":
            chars.pop(0)
        while chars and unicodedata.category(chars[-1])[0] == "P":
            chars.pop()
        if chars:
            terms.append("".join(chars))
    return terms


def bm25_brute(docs, question, k1=1.2, b=0.75):
    """Score every document directly from the textbook formula (non-negative IDF).

    ``docs`` may be strings or pre-tokenized term lists.
    """
    tokenized = [d if isinstance(d, list) else bm25_terms(d) for d in docs]
    n = len(docs)
    avg = sum(len(t) for t in tokenized) / n
    q_terms = bm25_terms(question)
    df = {q: sum(1 for t in tokenized if q in t) for q in set(q_terms)}
    scores = []
    for terms in tokenized:
        s = 0.0
        for q in q_terms:
            tf = terms.count(q)
            if tf == 0:
                continue
            idf = math.log((n - df[q] + 0.5) / (df[q] + 0.5) + 1)
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(terms) / avg))
        scores.append(s)
    return scores


def pr_brute(ranked, relevant, k):
    top = set(ranked[:k])
    inter = top & set(relevant)
    return len(inter) / k, len(inter) / len(relevant)


def ndcg_brute(ranked, relevant, k):
    gains = [1 if c in relevant else 0 for c in ranked[:k]]
    dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
    ideal_gains = sorted([1] * len(relevant) + [0] * k, reverse=True)[:k]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal_gains))
    return dcg / idcg


def levenshtein_brute(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def anls_brute(pred, golds, threshold=0.5):
    best = 0.0
    for g in golds:
        p, q = " ".join(pred.lower().split()), " ".join(g.lower().split())
        m = max(len(p), len(q))
        sim = 1.0 if m == 0 else 1 - levenshtein_brute(p, q) / m
        best = max(best, sim if sim >= threshold else 0.0)
    return best


def lcs_brute(a, b):
    @lru_cache(maxsize=None)
    def f(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + f(i + 1, j + 1)
        return max(f(i + 1, j), f(i, j + 1))

    return f(0, 0)


def rouge_l_brute(pred, gold):
    p, g = pred.lower().split(), gold.lower().split()
    if not p or not g:
        return 0.0
    lcs = lcs_brute(tuple(p), tuple(g))
    if not lcs:
        return 0.0
    pr, rc = lcs / len(p), lcs / len(g)
    return 2 * pr * rc / (pr + rc)


# --- tree edit distance by exhaustive mapping search -----------------------


def _flatten(tree):
    """Preorder labels, parent index, and subtree end (exclusive) per node."""
    labels, parent, end = [], [], []

    def walk(node, par):
        idx = len(labels)
        labels.append(node[0])
        parent.append(par)
        end.append(None)
        for child in node[1]:
            walk(child, idx)
        end[idx] = len(labels)

    walk(tree, None)
    return labels, parent, end


def ted_brute(a, b):
    """Minimum-cost valid (Tai) mapping between two ordered trees, by enumeration.

    A mapping is a set of node pairs that is one-to-one and preserves ancestry
    and left-to-right order. Cost = renames + unmapped nodes on either side.
    Mapped pairs are increasing in preorder on both sides, which lets the
    search extend partial mappings one node of ``a`` at a time.
    """
    la, _, ea = _flatten(a)
    lb, _, eb = _flatten(b)
    n, m = len(la), len(lb)

    def anc(end, i, j):  # i is a proper ancestor of j
        return i < j < end[i]

    best = n + m

    def search(i, last_j, pairs, cost):
        nonlocal best
        if cost >= best:
            return
        if i == n:
            total = cost + (m - len(pairs))
            best = min(best, total)
            return
        # leave node i unmapped
        search(i + 1, last_j, pairs, cost + 1)
        for j in range(last_j + 1, m):
            ok = True
            for (pi, pj) in pairs:
                if anc(ea, pi, i) != anc(eb, pj, j):
                    ok = False
                    break
            if ok:
                pairs.append((i, j))
                search(i + 1, j, pairs, cost + (la[i] != lb[j]))
                pairs.pop()

    search(0, -1, [], 0)
    return best


def tree_size(tree):
    return 1 + sum(tree_size(c) for c in tree[1])


def all_ordered_trees(max_nodes, alphabet):
    """Every ordered labelled tree with 1..max_nodes nodes."""

    @lru_cache(maxsize=None)
    def forests(n):
        if n == 0:
            return [()]
        out = []
        for first in range(1, n + 1):
            for t in trees(first):
                for rest in forests(n - first):
                    out.append((t,) + rest)
        return out

    @lru_cache(maxsize=None)
    def trees(n):
        return [(lab, f) for lab in alphabet for f in forests(n - 1)]

    return [t for n in range(1, max_nodes + 1) for t in trees(n)]
