"""Monotone graph properties: checkers, incremental certificates, replacements.

Each property is a PropertySpec bundling
  * an exact reference checker (exhaustive search, small n only for the
    NP-hard ones),
  * a tracker factory giving the incremental check used inside process runs
    (exact recomputation at small n, certificate-based at scale — strategies
    publish the certificate attributes the trackers read),
  * an optional edge-replacement procedure: a strategy fragment that restores
    the property after one certificate edge went missing, within a declared
    step budget.

Fractional powers of n (thresholds, budgets) are computed with exact integer
arithmetic (smallest c with c**den >= n**num), never float pow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .engine import StarSample
from .errors import UsageError
from .graph import MultiGraph, parse_edge_list

__all__ = [
    "PropertySpec",
    "ceil_root_pow",
    "floor_root_pow",
    "approx_margin",
    "check_min_degree_k",
    "check_perfect_matching",
    "check_hamiltonian",
    "check_approx_matching",
    "check_approx_path",
    "check_contains_subgraph",
    "max_matching_size",
    "longest_path_edges",
    "min_degree_property",
    "perfect_matching_property",
    "hamiltonian_property",
    "approx_matching_property",
    "approx_path_property",
    "subgraph_property",
    "edges_property",
    "parse_property_id",
    "MinDegreeRepair",
    "MatchingRepair",
    "PathRepair",
    "CatchEdgeRepair",
    "run_replacement",
]

EXHAUSTIVE_CAP = 12  # beyond this, ℳ/ℋ checks must be certificate-based
SUBGRAPH_CAP = 8


# ---------------------------------------------------------------------------
# Exact integer powers


def ceil_root_pow(n: int, num: int, den: int) -> int:
    """⌈n**(num/den)⌉ computed exactly in integer arithmetic (num <= den)."""
    if n < 1:
        raise ValueError("n must be positive")
    target = n**num
    lo, hi = 1, max(2, n)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid**den >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def floor_root_pow(n: int, num: int, den: int) -> int:
    """⌊n**(num/den)⌋ computed exactly in integer arithmetic (num <= den)."""
    c = ceil_root_pow(n, num, den)
    return c if c**den == n**num else c - 1


def approx_margin(n: int) -> int:
    """n − ⌈n^0.99⌉: allowed unsaturated vertices (ℳ′) / required path edges (ℋ′)."""
    return n - ceil_root_pow(n, 99, 100)


# ---------------------------------------------------------------------------
# Exact small-n algorithms


def max_matching_size(g: MultiGraph) -> int:
    """Maximum matching size by bitmask recursion; intended for n <= 12."""
    adj_sets = g.adjacency()
    n = g.n
    adj = [0] * n  # 0-based bit adjacency
    for v in range(1, n + 1):
        bits = 0
        for w in adj_sets[v]:
            bits |= 1 << (w - 1)
        adj[v - 1] = bits
    memo: dict[int, int] = {0: 0}

    def best(mask: int) -> int:
        r = memo.get(mask)
        if r is not None:
            return r
        v = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << v)
        r = best(rest)  # leave v unmatched
        nbrs = adj[v] & rest
        while nbrs:
            w = (nbrs & -nbrs).bit_length() - 1
            nbrs &= nbrs - 1
            r = max(r, 1 + best(rest & ~(1 << w)))
        memo[mask] = r
        return r

    return best((1 << n) - 1)


def min_unsaturated(g: MultiGraph) -> int:
    return g.n - 2 * max_matching_size(g)


def has_hamiltonian_cycle(g: MultiGraph) -> bool:
    """Held–Karp style reachability; intended for n <= 12."""
    n = g.n
    if n < 3:
        return False
    if g.min_degree() < 2 or len(g.edge_set()) < n:
        return False
    adj_sets = g.adjacency()
    adj = [0] * n
    for v in range(1, n + 1):
        bits = 0
        for w in adj_sets[v]:
            bits |= 1 << (w - 1)
        adj[v - 1] = bits
    full = (1 << n) - 1
    # paths starting at vertex 0: dp[mask] = bitset of possible endpoints
    dp = [0] * (full + 1)
    dp[1] = 1
    for mask in range(1, full + 1):
        ends = dp[mask]
        if not ends or not mask & 1:
            continue
        e = ends
        while e:
            v = (e & -e).bit_length() - 1
            e &= e - 1
            nxt = adj[v] & ~mask
            while nxt:
                w = (nxt & -nxt).bit_length() - 1
                nxt &= nxt - 1
                dp[mask | (1 << w)] |= 1 << w
    return bool(dp[full] & adj[0])


def longest_path_edges(g: MultiGraph) -> int:
    """Edge count of a longest simple path; intended for n <= 12."""
    n = g.n
    adj_sets = g.adjacency()
    adj = [0] * n
    for v in range(1, n + 1):
        bits = 0
        for w in adj_sets[v]:
            bits |= 1 << (w - 1)
        adj[v - 1] = bits
    best = 0
    full = (1 << n) - 1
    dp = [0] * (full + 1)
    for v in range(n):
        dp[1 << v] |= 1 << v
    for mask in range(1, full + 1):
        ends = dp[mask]
        if not ends:
            continue
        size = mask.bit_count()
        if size - 1 > best:
            best = size - 1
        e = ends
        while e:
            v = (e & -e).bit_length() - 1
            e &= e - 1
            nxt = adj[v] & ~mask
            while nxt:
                w = (nxt & -nxt).bit_length() - 1
                nxt &= nxt - 1
                dp[mask | (1 << w)] |= 1 << w
    return best


def subgraph_isomorphic(g: MultiGraph, h: MultiGraph) -> bool:
    """Backtracking subgraph-isomorphism (copy of h inside g), |V(h)| <= 8."""
    if h.n > SUBGRAPH_CAP:
        raise UsageError(f"pattern has {h.n} > {SUBGRAPH_CAP} vertices")
    h_adj = h.adjacency()
    g_adj = g.adjacency()
    h_edges = h.edge_set()
    if len(h_edges) > g.num_edges:
        return False
    # order pattern vertices by decreasing degree for early pruning
    order = sorted(range(1, h.n + 1), key=lambda v: -len(h_adj[v]))
    g_deg = [len(g_adj[v]) for v in range(g.n + 1)]
    h_deg = [len(h_adj[v]) for v in range(h.n + 1)]
    image = [0] * (h.n + 1)
    used: set[int] = set()

    def place(idx: int) -> bool:
        if idx == len(order):
            return True
        hv = order[idx]
        mapped_nbrs = [image[w] for w in h_adj[hv] if image[w]]
        if mapped_nbrs:
            candidates = set(g_adj[mapped_nbrs[0]])
            for mv in mapped_nbrs[1:]:
                candidates &= g_adj[mv]
        else:
            candidates = set(range(1, g.n + 1))
        for gv in sorted(candidates):
            if gv in used or g_deg[gv] < h_deg[hv]:
                continue
            image[hv] = gv
            used.add(gv)
            if place(idx + 1):
                return True
            used.discard(gv)
            image[hv] = 0
        return False

    return place(0)


# ---------------------------------------------------------------------------
# Public checkers


def check_min_degree_k(g: MultiGraph, k: int) -> bool:
    if k < 1:
        raise UsageError("k must be >= 1")
    return g.min_degree() >= k


def _matching_target_unsat(n: int) -> int:
    return 1 if n % 2 else 0  # odd n: saturate all but one vertex


def check_perfect_matching(g: MultiGraph) -> bool:
    if g.n > EXHAUSTIVE_CAP:
        raise UsageError(
            f"exhaustive matching check limited to n <= {EXHAUSTIVE_CAP}; "
            "use a certificate-maintaining strategy beyond that"
        )
    return min_unsaturated(g) <= _matching_target_unsat(g.n)


def check_hamiltonian(g: MultiGraph) -> bool:
    if g.n > EXHAUSTIVE_CAP:
        raise UsageError(
            f"Hamiltonicity search limited to n <= {EXHAUSTIVE_CAP}; "
            "use a certificate-maintaining strategy beyond that"
        )
    return has_hamiltonian_cycle(g)


def check_approx_matching(g: MultiGraph, certificate) -> bool:
    """certificate: iterable of matching edges; must be a matching in g."""
    edge_set = g.edge_set()
    covered: set[int] = set()
    for u, v in certificate:
        e = (u, v) if u < v else (v, u)
        if e not in edge_set:
            raise UsageError(f"certificate edge {e} not present in the graph")
        if u in covered or v in covered:
            raise UsageError("certificate edges are not disjoint")
        covered.add(u)
        covered.add(v)
    return g.n - len(covered) <= approx_margin(g.n)


def check_approx_path(g: MultiGraph, certificate) -> bool:
    """certificate: vertex sequence of a path in g; length = edge count."""
    seq = list(certificate)
    if len(set(seq)) != len(seq):
        raise UsageError("certificate not a path: repeated vertex")
    edge_set = g.edge_set()
    for a, b in zip(seq, seq[1:]):
        e = (a, b) if a < b else (b, a)
        if e not in edge_set:
            raise UsageError(f"certificate not a path: missing edge {e}")
    return len(seq) - 1 >= approx_margin(g.n)


def check_contains_subgraph(g: MultiGraph, h: MultiGraph) -> bool:
    return subgraph_isomorphic(g, h)


# ---------------------------------------------------------------------------
# Trackers


class MinDegreeTracker:
    """Counts vertices below degree k; O(1) per added edge."""

    __slots__ = ("k", "deficient")

    def __init__(self, n: int, k: int):
        self.k = k
        self.deficient = n

    def is_satisfied(self) -> bool:
        return self.deficient == 0

    def update(self, g, u, v, strategy=None) -> bool:
        k = self.k
        deg = g.degree
        if deg[u] == k:
            self.deficient -= 1
        if deg[v] == k:
            self.deficient -= 1
        return self.deficient == 0

    def verify(self, g) -> None:
        actual = sum(1 for d in g.degree[1:] if d < self.k)
        if actual != self.deficient:
            raise AssertionError(
                f"deficient-count drift: tracked {self.deficient}, actual {actual}"
            )


class _ExactTracker:
    """Recomputes an exhaustive check after each edge; small n only.

    Monotone caching: once satisfied, stays satisfied.
    """

    def __init__(self, evaluate):
        self._evaluate = evaluate
        self._sat: bool | None = None

    def is_satisfied(self) -> bool:
        return bool(self._sat)

    def prime(self, g) -> bool:
        self._sat = self._evaluate(g)
        return self._sat

    def update(self, g, u, v, strategy=None) -> bool:
        if not self._sat:
            self._sat = self._evaluate(g)
        return self._sat


class _CertTracker:
    """Reads a certificate attribute published by the running strategy."""

    def __init__(self, attr: str, predicate, prop_id: str):
        self.attr = attr
        self.predicate = predicate
        self.prop_id = prop_id
        self._sat = False

    def is_satisfied(self) -> bool:
        return self._sat

    def update(self, g, u, v, strategy=None) -> bool:
        if self._sat:
            return True
        val = getattr(strategy, self.attr, None)
        if val is None:
            raise UsageError(
                f"property {self.prop_id!r} at n > {EXHAUSTIVE_CAP} needs a strategy "
                f"publishing {self.attr!r}; exhaustive checking is not permitted here"
            )
        self._sat = self.predicate(val)
        return self._sat


class _TrivialTracker:
    """For thresholds that are vacuous at tiny n (satisfied from step zero)."""

    def is_satisfied(self) -> bool:
        return True

    def update(self, g, u, v, strategy=None) -> bool:
        return True


def _matching_tracker(n: int, allow_unsat: int, prop_id: str, mode: str):
    if mode == "exact" or (mode == "auto" and n <= EXHAUSTIVE_CAP):
        t = _ExactTracker(lambda g: min_unsaturated(g) <= allow_unsat)
        t.prime(MultiGraph(n))
        return t
    return _CertTracker("cert_unsaturated_count", lambda c: c <= allow_unsat, prop_id)


def _hamilton_tracker(n: int, prop_id: str, mode: str):
    if mode == "exact" or (mode == "auto" and n <= EXHAUSTIVE_CAP):
        t = _ExactTracker(has_hamiltonian_cycle)
        t.prime(MultiGraph(n))
        return t
    return _CertTracker("cert_hamilton_done", bool, prop_id)


def _approx_path_tracker(n: int, required_edges: int, prop_id: str, mode: str):
    if required_edges <= 0:
        return _TrivialTracker()
    if mode == "exact" or (mode == "auto" and n <= EXHAUSTIVE_CAP):
        t = _ExactTracker(lambda g: longest_path_edges(g) >= required_edges)
        t.prime(MultiGraph(n))
        return t
    return _CertTracker("cert_path_span", lambda s: s - 1 >= required_edges, prop_id)


def _subgraph_tracker(n: int, h: MultiGraph, prop_id: str, mode: str):
    if mode == "exact" or (mode == "auto" and n <= EXHAUSTIVE_CAP):
        t = _ExactTracker(lambda g: subgraph_isomorphic(g, h))
        t.prime(MultiGraph(n))
        return t
    return _CertTracker("cert_embedding_done", bool, prop_id)


class EdgesTracker:
    """Tracks presence of a fixed set of target edges; exact at any n."""

    __slots__ = ("missing",)

    def __init__(self, edges):
        self.missing = {(u, v) if u < v else (v, u) for u, v in edges}

    def is_satisfied(self) -> bool:
        return not self.missing

    def update(self, g, u, v, strategy=None) -> bool:
        self.missing.discard((u, v) if u < v else (v, u))
        return not self.missing


# ---------------------------------------------------------------------------
# Replacement fragments


class ReplacementFragment:
    """A budgeted mini-policy restoring a property after one lost edge.

    propose(g, sample) returns the edge to play or None ("no useful move";
    the caller wastes the step deterministically).  Every call consumes one
    unit of budget until done; exhausting the budget sets failed (reported,
    never raised).
    """

    def __init__(self, budget: int | None):
        self.budget = budget
        self.steps_used = 0
        self.done = False
        self.failed = False

    def propose(self, g, sample):
        if self.done or self.failed:
            return None
        if self._finished(g):
            self.done = True
            return None
        if self.budget is not None and self.steps_used >= self.budget:
            self.failed = True
            return None
        self.steps_used += 1
        move = self._move(g, sample)
        return move

    # subclasses implement:
    def _finished(self, g) -> bool:  # pragma: no cover - abstract
        raise NotImplementedError

    def _move(self, g, sample):  # pragma: no cover - abstract
        raise NotImplementedError


class MinDegreeRepair(ReplacementFragment):
    """Cover the (at most two) vertices one unit short of degree k."""

    def __init__(self, k: int, targets, budget: int | None = 2):
        super().__init__(budget)
        self.k = k
        self.targets = tuple(targets)

    def _deficient(self, g):
        return [v for v in self.targets if g.degree[v] < self.k]

    def _finished(self, g) -> bool:
        return not self._deficient(g)

    def _move(self, g, sample):
        lacking = self._deficient(g)
        if isinstance(sample, StarSample):
            c = sample.center
            others = [v for v in lacking if v != c]
            if others:
                target = others[0]
                # the edge fixes target, and c too if c was deficient
                if len(lacking) <= (2 if c in lacking else 1):
                    self.done = True
                return (c, target) if c < target else (target, c)
            # square is the only deficient vertex: any incident edge fixes it
            v = 1 if c != 1 else 2
            self.done = True
            return (min(c, v), max(c, v))
        for e in sample.edges():
            if e[0] in lacking or e[1] in lacking:
                return e
        return None


class MatchingRepair(ReplacementFragment):
    """Wait for a square on an unsaturated vertex; pair it with another one.

    Restores the approximate-matching property (unsaturated count back within
    the allowance) after a matching edge was lost.
    """

    def __init__(self, n: int, unsaturated, budget: int | None = None):
        if budget is None:
            budget = ceil_root_pow(n, 12, 25)  # ⌈n^0.48⌉
        super().__init__(budget)
        self.allow = approx_margin(n)
        self.unsat = sorted(set(unsaturated))

    def _finished(self, g) -> bool:
        return len(self.unsat) <= self.allow

    def _move(self, g, sample):
        if isinstance(sample, StarSample):
            c = sample.center
            if c in self.unsat:
                for v in self.unsat:
                    if v != c:
                        self.unsat.remove(c)
                        self.unsat.remove(v)
                        if len(self.unsat) <= self.allow:
                            self.done = True
                        return (c, v) if c < v else (v, c)
            return None
        for u, v in sample.edges():
            if u in self.unsat and v in self.unsat:
                self.unsat.remove(u)
                self.unsat.remove(v)
                if len(self.unsat) <= self.allow:
                    self.done = True
                return (u, v)
        return None


class PathRepair(ReplacementFragment):
    """Merge two certificate paths, then re-extend to the required length.

    Squares landing on the long path P1 are matched to one endpoint of P2;
    when two such squares land within distance < ⌊n^(1/4)⌋ of each other
    along P1, the second one closes through the other endpoint (discarding
    the short segment between them), after which off-path squares extend the
    merged path to the required edge count.
    """

    def __init__(self, n: int, p1, p2, budget: int | None = None):
        if budget is None:
            budget = ceil_root_pow(n, 27, 100) + ceil_root_pow(n, 2, 5)
        super().__init__(budget)
        self.n = n
        self.required = approx_margin(n)
        self.window = floor_root_pow(n, 1, 4)
        self.p1 = list(p1)
        self.p2 = list(p2)
        if self.p2:
            self.phase = "merge"
            self.pos = {v: i for i, v in enumerate(self.p1)}
            self.recorded: dict[int, int] = {}  # position -> vertex
            self.path: list[int] = []
        else:
            self.phase = "extend"
            self.path = list(self.p1)
        self.onpath = set(self.path) if self.phase == "extend" else set(self.p1) | set(self.p2)

    def _finished(self, g) -> bool:
        return self.phase == "extend" and len(self.path) - 1 >= self.required

    def _move(self, g, sample):
        if not isinstance(sample, StarSample):
            return None  # star-process procedure
        c = sample.center
        if self.phase == "merge":
            j = self.pos.get(c)
            if j is None:
                return None
            for i in sorted(self.recorded):
                if i != j and abs(j - i) < self.window:
                    return self._close(i, j)
            self.recorded[j] = c
            a = self.p2[0]
            return (c, a) if c < a else (a, c)
        # extend phase
        if c in self.onpath:
            return None
        tail = self.path[-1]
        self.path.append(c)
        self.onpath.add(c)
        if len(self.path) - 1 >= self.required:
            self.done = True
        return (c, tail) if c < tail else (tail, c)

    def _close(self, i: int, j: int):
        lo, hi = min(i, j), max(i, j)
        # the recorded one holds an edge to p2[0]; the new square gets p2[-1]
        if i == lo:
            middle = self.p2  # p1[lo] - p2[0] ... p2[-1] - p1[hi]
        else:
            middle = list(reversed(self.p2))  # p1[lo] gets the new edge
        self.path = self.p1[: lo + 1] + middle + self.p1[hi:]
        self.onpath = set(self.path)
        self.phase = "extend"
        c = self.p1[j]  # the closing square; the recorded one already holds p2[0]
        other = self.p2[-1]
        if len(self.path) - 1 >= self.required:
            self.done = True
        return (c, other) if c < other else (other, c)


class CatchEdgeRepair(ReplacementFragment):
    """Wait until the missing edge itself is offered, then take it."""

    def __init__(self, edge, budget: int | None):
        super().__init__(budget)
        u, v = edge
        self.edge = (u, v) if u < v else (v, u)

    def _finished(self, g) -> bool:
        return False  # done is set the moment the edge is taken

    def _move(self, g, sample):
        if self.edge in sample:
            self.done = True
            return self.edge
        return None


def run_replacement(
    dist,
    fragment,
    *,
    seed: int,
    trial: int = 0,
    start: MultiGraph | None = None,
    max_steps: int | None = None,
):
    """Drive a fragment against fresh arrivals; waste steps take the lowest edge.

    start is the graph the fragment acts on (e.g. the post-deletion state);
    it is advanced in place.  Returns (succeeded, steps_consumed).  Stops as
    soon as the fragment reports done or failed; max_steps (default 10n) is a
    hard backstop.
    """
    from .engine import sample_at
    from .rng import TAG_ENV, stream_key

    n = dist.n
    if max_steps is None:
        max_steps = 10 * n
    key = stream_key(seed, trial, TAG_ENV)
    g = start if start is not None else MultiGraph(n)
    if g.n != n:
        raise UsageError("start graph size does not match the distribution")
    t = 0
    while t < max_steps:
        if fragment.done:
            return True, fragment.steps_used
        if fragment.failed:
            return False, fragment.steps_used
        t += 1
        sample = sample_at(dist, key, t)
        e = fragment.propose(g, sample)
        if fragment.done and e is None:
            return True, fragment.steps_used
        if fragment.failed:
            return False, fragment.steps_used
        if e is None:
            e = sample.lowest_edge()
        g.add_edge(*e)
    return fragment.done, fragment.steps_used


# ---------------------------------------------------------------------------
# PropertySpec and the registry


@dataclass(frozen=True)
class PropertySpec:
    """A monotone target property.

    make_tracker(n) -> incremental tracker used by the engine;
    check(g) -> exact reference answer (may be restricted to small n);
    replacement_budget(n) -> declared step allowance for edge replacement;
    make_replacement(n, g, context, missing_edge) -> fragment, where context
    is property-specific certificate state (e.g. the unsaturated set).
    """

    id: str
    make_tracker: Callable[[int], object]
    check: Callable[[MultiGraph], bool]
    replacement_budget: Callable[[int], int] | None = None
    make_replacement: Callable[..., ReplacementFragment] | None = None


def min_degree_property(k: int) -> PropertySpec:
    if k < 1:
        raise UsageError("min-degree property needs k >= 1")
    return PropertySpec(
        id=f"min-degree:{k}",
        make_tracker=lambda n: MinDegreeTracker(n, k),
        check=lambda g: check_min_degree_k(g, k),
        replacement_budget=lambda n: 2,
        make_replacement=lambda n, g, context, missing: MinDegreeRepair(
            k, missing, budget=2
        ),
    )


def perfect_matching_property(mode: str = "auto") -> PropertySpec:
    return PropertySpec(
        id="perfect-matching",
        make_tracker=lambda n: _matching_tracker(
            n, _matching_target_unsat(n), "perfect-matching", mode
        ),
        check=check_perfect_matching,
    )


def hamiltonian_property(mode: str = "auto") -> PropertySpec:
    return PropertySpec(
        id="hamiltonian",
        make_tracker=lambda n: _hamilton_tracker(n, "hamiltonian", mode),
        check=check_hamiltonian,
    )


def approx_matching_property(mode: str = "auto") -> PropertySpec:
    def _check(g: MultiGraph) -> bool:
        if g.n > EXHAUSTIVE_CAP:
            raise UsageError("graph-level approx-matching check limited to small n")
        return min_unsaturated(g) <= approx_margin(g.n)

    return PropertySpec(
        id="approx-matching",
        make_tracker=lambda n: _matching_tracker(
            n, approx_margin(n), "approx-matching", mode
        ),
        check=_check,
        replacement_budget=lambda n: ceil_root_pow(n, 12, 25),
        make_replacement=lambda n, g, context, missing: _matching_repair_from(
            n, context
        ),
    )


def _matching_repair_from(n: int, context) -> MatchingRepair:
    if context is None:
        raise UsageError("approx-matching replacement needs the unsaturated set")
    return MatchingRepair(n, context)


def approx_path_property(mode: str = "auto") -> PropertySpec:
    def _check(g: MultiGraph) -> bool:
        if g.n > EXHAUSTIVE_CAP:
            raise UsageError("graph-level approx-path check limited to small n")
        return longest_path_edges(g) >= approx_margin(g.n)

    return PropertySpec(
        id="approx-path",
        make_tracker=lambda n: _approx_path_tracker(
            n, approx_margin(n), "approx-path", mode
        ),
        check=_check,
        replacement_budget=lambda n: ceil_root_pow(n, 27, 100) + ceil_root_pow(n, 2, 5),
        make_replacement=lambda n, g, context, missing: _path_repair_from(n, context),
    )


def _path_repair_from(n: int, context) -> PathRepair:
    if context is None:
        raise UsageError("approx-path replacement needs the two certificate paths")
    p1, p2 = context
    return PathRepair(n, p1, p2)


def subgraph_property(h: MultiGraph, label: str, mode: str = "auto") -> PropertySpec:
    if h.n > SUBGRAPH_CAP:
        raise UsageError(f"subgraph property limited to {SUBGRAPH_CAP} vertices")
    return PropertySpec(
        id=f"subgraph:{label}",
        make_tracker=lambda n: _subgraph_tracker(n, h, f"subgraph:{label}", mode),
        check=lambda g: check_contains_subgraph(g, h),
    )


def edges_property(edges, label: str, budget: int | None = None) -> PropertySpec:
    """Target: contain every edge of a fixed list.  Exact at any n.

    The replacement procedure chases one missing edge (the budget is the
    conversion allowance); used by tiny explicit-distribution instances.
    """
    target = tuple(sorted({(u, v) if u < v else (v, u) for u, v in edges}))

    def _check(g: MultiGraph) -> bool:
        es = g.edge_set()
        return all(e in es for e in target)

    return PropertySpec(
        id=f"edges:{label}",
        make_tracker=lambda n: EdgesTracker(target),
        check=_check,
        replacement_budget=(lambda n: budget) if budget is not None else None,
        make_replacement=(
            (lambda n, g, context, missing: CatchEdgeRepair(missing, budget))
            if budget is not None
            else None
        ),
    )


_NAMED_PATTERNS = {
    "triangle": [(1, 2), (1, 3), (2, 3)],
    "path3": [(1, 2), (2, 3)],
    "c4": [(1, 2), (2, 3), (3, 4), (1, 4)],
}


def named_pattern(name: str) -> MultiGraph:
    edges = _NAMED_PATTERNS.get(name)
    if edges is None:
        raise UsageError(f"unknown pattern name {name!r}")
    n = max(max(e) for e in edges)
    h = MultiGraph(n)
    for u, v in edges:
        h.add_edge(u, v)
    return h


def parse_property_id(token: str) -> PropertySpec:
    """CLI property ids: min-degree:k, perfect-matching, hamiltonian,
    approx-matching, approx-path, subgraph:<name-or-edge-list-file>."""
    if token.startswith("min-degree:"):
        raw = token.split(":", 1)[1]
        try:
            k = int(raw)
        except ValueError:
            raise UsageError(f"bad min-degree parameter {raw!r}") from None
        return min_degree_property(k)
    if token == "perfect-matching":
        return perfect_matching_property()
    if token == "hamiltonian":
        return hamiltonian_property()
    if token == "approx-matching":
        return approx_matching_property()
    if token == "approx-path":
        return approx_path_property()
    if token.startswith("subgraph:"):
        ref = token.split(":", 1)[1]
        if ref in _NAMED_PATTERNS:
            return subgraph_property(named_pattern(ref), ref)
        from .errors import DataError

        try:
            with open(ref, "r", encoding="utf-8") as fh:
                h = parse_edge_list(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read pattern file {ref!r}: {exc}") from exc
        except ValueError as exc:
            raise DataError(f"bad pattern file {ref!r}: {exc}") from exc
        return subgraph_property(h, ref)
    raise UsageError(f"unknown property id {token!r}")
