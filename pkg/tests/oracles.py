"""Independent brute-force reference implementations used to pin expected
values. Deliberately written with different algorithms than the package
(recursive edit distance, permutation enumeration, LP-free transport search)
so they cannot share bugs with the code under test.
"""

from functools import lru_cache
from itertools import permutations
from math import gcd


def brute_levenshtein(a, b) -> int:
    """Plain recursive edit distance with memoization."""
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
            rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return rec(len(a), len(b))


def brute_norm_lev(a, b) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return brute_levenshtein(a, b) / longest


def brute_cfld(variants_a, variants_b) -> float:
    """Exhaustive minimum over all one-to-one assignments; the smaller side is
    padded with empty sequences. Only viable for tiny logs."""
    seqs_a = [tuple(v) for v in variants_a]
    seqs_b = [tuple(v) for v in variants_b]
    size = max(len(seqs_a), len(seqs_b))
    seqs_a += [()] * (size - len(seqs_a))
    seqs_b += [()] * (size - len(seqs_b))
    best = None
    for perm in permutations(range(size)):
        total = sum(brute_norm_lev(seqs_a[i], seqs_b[j]) for i, j in enumerate(perm))
        if best is None or total < best:
            best = total
    return best / size


def brute_emd(values_a, values_b) -> float:
    """Wasserstein-1 by enumerating integral transport plans.

    Each multiset is replicated to a common size (lcm of the sizes), under
    which every extreme transport plan is a permutation matching; the optimum
    is the minimum mean absolute difference over all permutations. Keep the
    expanded size at <= 8 points."""
    n_a, n_b = len(values_a), len(values_b)
    common = n_a * n_b // gcd(n_a, n_b)
    if common > 8:
        raise ValueError(f"expansion to {common} points is too large to enumerate")
    expanded_a = [v for v in values_a for _ in range(common // n_a)]
    expanded_b = [v for v in values_b for _ in range(common // n_b)]
    best = None
    for perm in permutations(range(common)):
        total = sum(abs(expanded_a[i] - expanded_b[j]) for i, j in enumerate(perm))
        if best is None or total < best:
            best = total
    return best / common


def brute_ngrams(variants, n, start="\x02", end="\x03") -> dict:
    """Hand-enumerated padded n-gram relative frequencies."""
    counts = {}
    for variant in variants:
        padded = [start] * (n - 1) + list(variant) + [end] * (n - 1)
        for i in range(len(padded) - n + 1):
            gram = tuple(padded[i:i + n])
            counts[gram] = counts.get(gram, 0) + 1
    total = sum(counts.values())
    return {gram: count / total for gram, count in counts.items()}


def brute_ngram_distance(variants_a, variants_b, n) -> float:
    freq_a = brute_ngrams(variants_a, n)
    freq_b = brute_ngrams(variants_b, n)
    every = set(freq_a) | set(freq_b)
    return sum(abs(freq_a.get(g, 0.0) - freq_b.get(g, 0.0)) for g in every) / 2.0


def reference_read_xes(data: bytes):
    """Minimal independent XES reader on minidom: returns
    [(case_id, [(activity, timestamp_iso, lifecycle), ...]), ...] with events
    in document order (no sorting)."""
    from xml.dom import minidom

    doc = minidom.parseString(data)
    out = []
    for trace_el in doc.getElementsByTagName("trace"):
        case_id = None
        events = []
        for child in trace_el.childNodes:
            if child.nodeType != child.ELEMENT_NODE:
                continue
            if child.tagName == "string" and child.getAttribute("key") == "concept:name":
                case_id = child.getAttribute("value")
            if child.tagName == "event":
                activity = stamp = None
                lifecycle = "complete"
                for attr in child.childNodes:
                    if attr.nodeType != attr.ELEMENT_NODE:
                        continue
                    key = attr.getAttribute("key")
                    if key == "concept:name":
                        activity = attr.getAttribute("value")
                    elif key == "time:timestamp":
                        stamp = attr.getAttribute("value")
                    elif key == "lifecycle:transition":
                        lifecycle = attr.getAttribute("value").lower()
                events.append((activity, stamp, lifecycle))
        out.append((case_id, events))
    return out
