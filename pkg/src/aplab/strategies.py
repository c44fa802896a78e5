"""Player strategies for the star process.

All strategies are deterministic: ties break toward the lowest vertex index,
and none of them consumes strategy randomness.  Each maintains an incremental
certificate that the property trackers read through the cert_* attributes,
and each certificate can be audited against the real graph via
verify_certificate (done every 1000 steps in test builds).

Steps where a strategy has no productive move play a deterministic junk edge
("waste"); monotonicity makes extra edges harmless.
"""

from __future__ import annotations

import heapq

from .engine import StarSample, StrategyHandle
from .errors import UsageError
from .graph import MultiGraph, parse_edge_list
from .properties import (
    ReplacementFragment,
    approx_margin,
    named_pattern,
    _NAMED_PATTERNS,
    _matching_target_unsat,
)
from .rng import mix64

__all__ = [
    "min_degree_strategy",
    "matching_strategy",
    "hamilton_strategy",
    "degenerate_subgraph_strategy",
    "multi_round_boost",
    "approx_then_cleanup",
    "lowest_edge_strategy",
    "hashed_choice_strategy",
    "cleanup_matching",
    "MatchingStrategy",
    "HamiltonStrategy",
    "parse_strategy_id",
]


def _waste_vertex(c: int) -> int:
    return 1 if c != 1 else 2


class _StarStrategy:
    """Base: adapts decide_star to the generic decide protocol."""

    def decide(self, g, sample, rng):
        if isinstance(sample, StarSample):
            c = sample.center
            v = self.decide_star(g, c, rng)
            return (c, v) if c < v else (v, c)
        raise UsageError(f"{type(self).__name__} plays the star process only")


# ---------------------------------------------------------------------------
# Greedy minimum degree


class MinDegreeStrategy(_StarStrategy):
    """Circle = lowest-index vertex of minimum degree, excluding the square.

    A lazy heap of (degree, vertex) entries mirrors the degree array: entries
    are pushed when a vertex's degree changes and stale entries are skipped on
    pop.  Decisions agree with graph.argmin_degree exactly.
    """

    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        # entries encoded degree*(n+1)+vertex so the heap holds plain ints
        self.heap = list(range(1, n + 1))  # degree 0; sorted => valid heap
        self.pending: tuple[int, int] | None = None
        self.expected_m = 0

    def decide_star(self, g, c, rng):
        deg = g.degree
        stride = self.n + 1
        if g.num_edges != self.expected_m:
            # graph advanced outside our own play: rebuild the mirror
            self.heap = sorted(deg[v] * stride + v for v in range(1, self.n + 1))
            self.pending = None
        if self.pending is not None:
            a, b = self.pending
            heapq.heappush(self.heap, deg[a] * stride + a)
            heapq.heappush(self.heap, deg[b] * stride + b)
            self.pending = None
        heap = self.heap
        push = heapq.heappush
        pop = heapq.heappop
        skipped = -1
        while True:
            entry = heap[0]
            v = entry % stride
            if deg[v] != entry // stride:
                pop(heap)
                continue
            if v == c:
                skipped = pop(heap)
                continue
            break
        if skipped >= 0:
            push(heap, skipped)
        self.pending = (c, v)
        self.expected_m = g.num_edges + 1
        return v


def min_degree_strategy(k: int) -> StrategyHandle:
    if k < 1:
        raise UsageError("min-degree strategy needs k >= 1")
    return StrategyHandle(id=f"min-degree:{k}", make=lambda n: MinDegreeStrategy(n, k))


# ---------------------------------------------------------------------------
# Matching builder


class MatchingStrategy(_StarStrategy):
    """Greedy matching with length-3 augmenting paths.

    Unsaturated square: pair it with the lowest unsaturated vertex.
    Saturated square u: plant an edge to an unsaturated v and record (u, v)
    against u's partner w; when w itself arrives as a square and the record
    is still valid, take a fresh unsaturated v' and augment
    M <- M - (u,w) + (u,v) + (w,v').  Records are validated lazily.

    Record targets rotate round-robin over the unsaturated vertices: if every
    record pointed at the same v, one augmentation would invalidate them all
    at once and the endgame would stall.
    """

    def __init__(self, n: int):
        self.n = n
        self.partner = [0] * (n + 1)
        # doubly linked list over unsaturated vertices, ascending
        self.lnext = list(range(1, n + 2))
        self.lnext[n] = 0
        self.lprev = list(range(-1, n))
        self.lprev[1] = 0
        self.lhead = 1
        self.unsat_count = n
        self.cursor = 0  # round-robin record-target cursor
        self.rec: dict[int, tuple[int, int]] = {}  # partner vertex -> (u, v)

    @classmethod
    def from_matching(cls, n: int, edges) -> "MatchingStrategy":
        s = cls(n)
        for u, v in edges:
            if s.partner[u] or s.partner[v]:
                raise UsageError("matching edges not disjoint")
            s.partner[u] = v
            s.partner[v] = u
            s._unlink(u)
            s._unlink(v)
            s.unsat_count -= 2
        return s

    # linked-list helpers -------------------------------------------------
    def _unlink(self, v: int) -> None:
        p, nx = self.lprev[v], self.lnext[v]
        if p:
            self.lnext[p] = nx
        else:
            self.lhead = nx
        if nx:
            self.lprev[nx] = p

    def _first_unsat(self, exclude: int = 0) -> int:
        h = self.lhead
        if h == exclude:
            h = self.lnext[h] if h else 0
        return h

    def _next_record_target(self) -> int:
        if self.lhead == 0:
            return 0
        cur = self.cursor
        if cur == 0 or self.partner[cur] != 0:
            cur = self.lhead
        nxt = self.lnext[cur]
        self.cursor = nxt if nxt else self.lhead
        return cur

    # certificate ----------------------------------------------------------
    @property
    def cert_unsaturated_count(self) -> int:
        return self.unsat_count

    def matching_edges(self) -> list[tuple[int, int]]:
        return [
            (v, self.partner[v]) for v in range(1, self.n + 1) if 0 < v < self.partner[v]
        ]

    def replacement_context(self):
        return [v for v in range(1, self.n + 1) if self.partner[v] == 0]

    def verify_certificate(self, g) -> None:
        partner = self.partner
        edge_set = g.edge_set()
        unsat = 0
        for v in range(1, self.n + 1):
            w = partner[v]
            if w == 0:
                unsat += 1
                continue
            if partner[w] != v:
                raise AssertionError(f"partner map not an involution at {v}")
            if v < w and ((v, w) not in edge_set):
                raise AssertionError(f"matching edge ({v},{w}) absent from graph")
        if unsat != self.unsat_count:
            raise AssertionError(
                f"unsaturated count drift: tracked {self.unsat_count}, actual {unsat}"
            )

    # play -------------------------------------------------------------------
    def decide_star(self, g, c, rng):
        partner = self.partner
        if partner[c] == 0:
            v = self._first_unsat(exclude=c)
            if v:
                partner[c] = v
                partner[v] = c
                self._unlink(c)
                self._unlink(v)
                self.unsat_count -= 2
                return v
            return _waste_vertex(c)
        r = self.rec.get(c)
        if r is not None:
            u0, v0 = r
            if partner[c] == u0 and partner[v0] == 0:
                vp = self._first_unsat(exclude=v0)
                if vp:
                    del self.rec[c]
                    partner[u0] = v0
                    partner[v0] = u0
                    partner[c] = vp
                    partner[vp] = c
                    self._unlink(v0)
                    self._unlink(vp)
                    self.unsat_count -= 2
                    return vp
                return v0  # lone unsaturated vertex: replant deterministically
            del self.rec[c]  # stale record
        v = self._next_record_target()
        if v == 0:
            return _waste_vertex(c)
        self.rec[self.partner[c]] = (c, v)
        return v


def matching_strategy() -> StrategyHandle:
    return StrategyHandle(id="matching", make=MatchingStrategy)


# ---------------------------------------------------------------------------
# Hamiltonicity builder


class HamiltonStrategy(_StarStrategy):
    """Builds one master path, then closes it into a Hamiltonian cycle.

    Moves, in priority order at each square:
      * square off-path with a planted chord: complete the insertion next to
        that chord's anchor;
      * square off-path otherwise: extend the master path (or start it);
      * square at a path endpoint: merge with another path if one exists,
        else extend with the lowest leftover, else close the cycle directly;
      * square at an interior vertex: complete an insertion whose chord sits
        at a path-neighbour, else plant a chord toward a leftover vertex,
        else (no leftovers) work on cycle-closing chords to head/tail.

    Chord planting starts immediately rather than in a final stage: with
    endpoint-only absorption the leftover phase is coupon-collector-slow
    (Θ(n log n)); insertions keep the build inside a small multiple of n while
    using only edges actually present in the graph.
    """

    def __init__(self, n: int):
        self.n = n
        self.nxt = [0] * (n + 1)
        self.prv = [0] * (n + 1)
        self.onpath = [False] * (n + 1)
        # leftover = off-path vertices, doubly linked ascending
        self.lnext = list(range(1, n + 2))
        self.lnext[n] = 0
        self.lprev = list(range(-1, n))
        if n >= 1:
            self.lprev[1] = 0
        self.lhead = 1
        self.leftover_count = n
        self.cursor = 0  # round-robin chord-planting cursor
        # path components (union-find); only unit tests create several
        self.parent = list(range(n + 1))
        self.comp_head: dict[int, int] = {}
        self.comp_tail: dict[int, int] = {}
        self.comp_span: dict[int, int] = {}
        self.endpoints: set[int] = set()
        self.master = 0  # root of the largest path
        self.chords_at: dict[int, list[int]] = {}  # anchor -> chorded leftovers
        self.anchor_of: dict[int, list[int]] = {}  # leftover -> anchors
        self.head_chords: set[int] = set()  # x with a planted edge (x, head)
        self.tail_chords: set[int] = set()
        self.plant_flip = 0
        self.cycle_done = False
        self.cycle_order: list[int] | None = None

    # --- bookkeeping helpers ----------------------------------------------
    def _find(self, v: int) -> int:
        p = self.parent
        while p[v] != v:
            p[v] = p[p[v]]
            v = p[v]
        return v

    def _remove_leftover(self, v: int) -> None:
        p, nx = self.lprev[v], self.lnext[v]
        if p:
            self.lnext[p] = nx
        else:
            self.lhead = nx
        if nx:
            self.lprev[nx] = p
        self.leftover_count -= 1
        self.onpath[v] = True

    def _first_leftover(self, exclude: int = 0) -> int:
        h = self.lhead
        if h == exclude:
            h = self.lnext[h] if h else 0
        return h

    def _next_plant_target(self) -> int:
        if self.lhead == 0:
            return 0
        cur = self.cursor
        if cur == 0 or self.onpath[cur]:
            cur = self.lhead
        target = cur
        nxt = self.lnext[cur]
        self.cursor = nxt if nxt else self.lhead
        return target

    def _update_master(self, root: int) -> None:
        if self.comp_span.get(root, 0) > self.comp_span.get(self.master, 0):
            self.master = root

    @property
    def master_span(self) -> int:
        return self.comp_span.get(self.master, 0)

    @property
    def cert_path_span(self) -> int:
        return self.n if self.cycle_done else self.master_span

    @property
    def cert_hamilton_done(self) -> bool:
        return self.cycle_done

    def path_vertices(self) -> list[int]:
        """Master path in order (or the completed cycle's order)."""
        if self.cycle_order is not None:
            return list(self.cycle_order)
        if not self.master:
            return []
        out = []
        v = self.comp_head[self.master]
        while v:
            out.append(v)
            v = self.nxt[v]
        return out

    def verify_certificate(self, g) -> None:
        edge_set = g.edge_set()
        if self.cycle_done:
            order = self.cycle_order or []
            if len(order) != self.n or len(set(order)) != self.n:
                raise AssertionError("cycle order is not a permutation")
            for a, b in zip(order, order[1:] + order[:1]):
                e = (a, b) if a < b else (b, a)
                if e not in edge_set:
                    raise AssertionError(f"cycle edge {e} absent from graph")
            return
        seen = 0
        for root in list(self.comp_span):
            if self._find(root) != root:
                continue
            v = self.comp_head[root]
            prev = 0
            count = 0
            while v:
                count += 1
                if not self.onpath[v]:
                    raise AssertionError(f"path vertex {v} marked off-path")
                if prev:
                    e = (prev, v) if prev < v else (v, prev)
                    if e not in edge_set:
                        raise AssertionError(f"path edge {e} absent from graph")
                prev = v
                v = self.nxt[v]
            if prev != self.comp_tail[root] or count != self.comp_span[root]:
                raise AssertionError("component bookkeeping drift")
            seen += count
        if seen + self.leftover_count != self.n:
            raise AssertionError("leftover count drift")

    # --- structural edits ---------------------------------------------------
    def _start_path(self, a: int, b: int) -> None:
        self._remove_leftover(a)
        self._remove_leftover(b)
        self.nxt[a] = b
        self.prv[b] = a
        root = self._find(a)
        self.parent[self._find(b)] = root
        self.comp_head[root] = a
        self.comp_tail[root] = b
        self.comp_span[root] = 2
        self.endpoints.update((a, b))
        self._update_master(root)

    def _attach(self, endpoint: int, w: int) -> None:
        """Extend the path at `endpoint` with leftover w."""
        self._remove_leftover(w)
        root = self._find(endpoint)
        if self.nxt[endpoint] == 0:  # tail side
            self.nxt[endpoint] = w
            self.prv[w] = endpoint
            self.comp_tail[root] = w
        else:  # head side
            self.prv[endpoint] = w
            self.nxt[w] = endpoint
            self.comp_head[root] = w
        self.parent[self._find(w)] = root
        self.comp_span[root] += 1
        self.endpoints.discard(endpoint)
        self.endpoints.add(w)
        self._update_master(root)

    def _reverse_component(self, root: int) -> None:
        v = self.comp_head[root]
        prev = 0
        while v:
            nx = self.nxt[v]
            self.nxt[v] = prev
            self.prv[v] = nx
            prev = v
            v = nx
        self.comp_head[root], self.comp_tail[root] = (
            self.comp_tail[root],
            self.comp_head[root],
        )

    def _merge(self, c: int, other: int) -> None:
        """Link endpoint c of one path to endpoint `other` of another."""
        root_c = self._find(c)
        root_o = self._find(other)
        if self.nxt[c] == 0:  # c is a tail: other must become a head
            if self.prv[other] != 0:
                self._reverse_component(root_o)
            self.nxt[c] = other
            self.prv[other] = c
            head, tail = self.comp_head[root_c], self.comp_tail[root_o]
        else:  # c is a head: other must become a tail
            if self.nxt[other] != 0:
                self._reverse_component(root_o)
            self.prv[c] = other
            self.nxt[other] = c
            head, tail = self.comp_head[root_o], self.comp_tail[root_c]
        span = self.comp_span[root_c] + self.comp_span[root_o]
        self.parent[root_o] = root_c
        self.comp_head.pop(root_o, None)
        self.comp_tail.pop(root_o, None)
        self.comp_span.pop(root_o, None)
        self.comp_head[root_c] = head
        self.comp_tail[root_c] = tail
        self.comp_span[root_c] = span
        self.endpoints.discard(c)
        self.endpoints.discard(other)
        self.endpoints.update((head, tail))
        self._update_master(root_c)

    def _insert_between(self, a: int, y: int, w: int) -> None:
        """Insert leftover w between adjacent path vertices a and y."""
        self._remove_leftover(w)
        root = self._find(a)
        self.parent[self._find(w)] = root
        if self.nxt[a] == y:
            self.nxt[a] = w
            self.prv[w] = a
            self.nxt[w] = y
            self.prv[y] = w
        else:
            self.prv[a] = w
            self.nxt[w] = a
            self.prv[w] = y
            self.nxt[y] = w
        self.comp_span[root] += 1
        self._update_master(root)

    def _plant_chord(self, anchor: int, w: int) -> None:
        self.chords_at.setdefault(anchor, []).append(w)
        self.anchor_of.setdefault(w, []).append(anchor)

    def _chord_completion(self, y: int) -> int:
        """Latest still-leftover vertex chorded at path vertex y, or 0."""
        lst = self.chords_at.get(y)
        if not lst:
            return 0
        while lst and self.onpath[lst[-1]]:
            lst.pop()
        return lst[-1] if lst else 0

    def _finish_cycle(self, order: list[int]) -> None:
        self.cycle_done = True
        self.cycle_order = order
        self.endpoints.clear()

    def _install_paths(self, paths) -> None:
        """Test hook: preload a system of vertex-disjoint paths."""
        for seq in paths:
            if len(seq) < 2:
                raise UsageError("installed paths need >= 2 vertices")
            for v in seq:
                self._remove_leftover(v)
            root = self._find(seq[0])
            for a, b in zip(seq, seq[1:]):
                self.nxt[a] = b
                self.prv[b] = a
                self.parent[self._find(b)] = root
            self.comp_head[root] = seq[0]
            self.comp_tail[root] = seq[-1]
            self.comp_span[root] = len(seq)
            self.endpoints.update((seq[0], seq[-1]))
            self._update_master(root)

    # --- play ----------------------------------------------------------------
    def decide_star(self, g, c, rng):
        if self.cycle_done:
            return _waste_vertex(c)
        if not self.onpath[c]:
            return self._square_offpath(c)
        if self.prv[c] == 0 or self.nxt[c] == 0:
            return self._square_endpoint(c)
        return self._square_interior(c)

    def _square_offpath(self, c: int) -> int:
        anchors = self.anchor_of.get(c)
        if anchors:
            a = anchors[-1]
            y = self.nxt[a] if self.nxt[a] else self.prv[a]
            self._insert_between(a, y, c)
            return y
        if self.master:
            tail = self.comp_tail[self.master]
            self._attach(tail, c)
            return tail
        w = self._first_leftover(exclude=c)
        if w == 0:
            return _waste_vertex(c)
        self._start_path(c, w)
        return w

    def _square_endpoint(self, c: int) -> int:
        root_c = self._find(c)
        other = 0
        for e in sorted(self.endpoints):
            if e != c and self._find(e) != root_c:
                other = e
                break
        if other:
            self._merge(c, other)
            return other
        if self.lhead:
            w = self.lhead
            self._attach(c, w)
            return w
        # spanning path: close the cycle directly
        head = self.comp_head[root_c]
        tail = self.comp_tail[root_c]
        target = tail if c == head else head
        self._finish_cycle(self.path_vertices())
        return target

    def _square_interior(self, c: int) -> int:
        p, nx = self.prv[c], self.nxt[c]
        w = self._chord_completion(p)
        if w:
            self._insert_between(p, c, w)
            return w
        w = self._chord_completion(nx)
        if w:
            self._insert_between(nx, c, w)
            return w
        if self.lhead:
            w = self._next_plant_target()
            self._plant_chord(c, w)
            return w
        # no leftovers: cycle-closing phase on the spanning path
        root = self._find(c)
        head = self.comp_head[root]
        tail = self.comp_tail[root]
        if p in self.tail_chords:
            # edges (p, tail) and (c, head): head..p, tail..c reversed, head
            order = self._order_tail_splice(head, p, tail, c)
            self._finish_cycle(order)
            return head
        if nx in self.head_chords:
            # edges (nx, head) and (c, tail): head..c, tail..nx reversed, head
            order = self._order_head_splice(head, c, tail, nx)
            self._finish_cycle(order)
            return tail
        if self.plant_flip % 2 == 0:
            self.head_chords.add(c)
            self.plant_flip += 1
            return head
        self.tail_chords.add(c)
        self.plant_flip += 1
        return tail

    def _walk(self, a: int, b: int) -> list[int]:
        out = []
        v = a
        while v:
            out.append(v)
            if v == b:
                return out
            v = self.nxt[v]
        raise AssertionError("walk fell off the path")

    def _order_tail_splice(self, head, p, tail, c) -> list[int]:
        return self._walk(head, p) + list(reversed(self._walk(c, tail)))

    def _order_head_splice(self, head, c, tail, nx) -> list[int]:
        return self._walk(head, c) + list(reversed(self._walk(nx, tail)))


def hamilton_strategy() -> StrategyHandle:
    return StrategyHandle(id="hamilton", make=HamiltonStrategy)


# ---------------------------------------------------------------------------
# Degenerate-subgraph builder


class DegenerateSubgraphStrategy(_StarStrategy):
    """Embeds a fixed pattern H along a degeneracy ordering.

    Phase i waits for squares on unused vertices; the j-th square on a given
    unused candidate receives the image of the j-th earlier neighbour of v_i,
    and the candidate is embedded once it has collected all d_i such edges.
    Vertices with no earlier neighbours embed on their first square, and when
    the following vertex hangs off them alone it is pre-embedded by the same
    step's circle, which is what makes trees finish in |V(H)| - 1 steps.
    """

    def __init__(self, n: int, h: MultiGraph):
        if n < h.n:
            raise UsageError("host graph smaller than the pattern")
        self.n = n
        self.h = h
        adj = h.adjacency()
        degs = {v: len(adj[v]) for v in range(1, h.n + 1)}
        self.isolated = sorted(v for v, d in degs.items() if d == 0)
        # peel min-degree (lowest index) repeatedly; ordering = reverse
        alive = {v for v, d in degs.items() if d > 0}
        work = dict(degs)
        removal: list[int] = []
        while alive:
            v = min(alive, key=lambda x: (work[x], x))
            removal.append(v)
            alive.discard(v)
            for w in adj[v]:
                if w in alive:
                    work[w] -= 1
        self.order = list(reversed(removal))
        pos = {v: i for i, v in enumerate(self.order)}
        self.earlier: list[list[int]] = [
            sorted((w for w in adj[v] if pos.get(w, 10**9) < i), key=lambda w: pos[w])
            for i, v in enumerate(self.order)
        ]
        self.phase = 0
        self.image: dict[int, int] = {}
        self.used: set[int] = set()
        self.hits: dict[int, int] = {}
        self.done = len(self.order) == 0
        self._scan = 1
        if self.done:
            self._finish()

    @property
    def cert_embedding_done(self) -> bool:
        return self.done

    def verify_certificate(self, g) -> None:
        img = self.image
        vals = [v for v in img.values()]
        if len(set(vals)) != len(vals):
            raise AssertionError("embedding not injective")
        edge_set = g.edge_set()
        for u, v in self.h.edges:
            if u in img and v in img:
                a, b = img[u], img[v]
                e = (a, b) if a < b else (b, a)
                if e not in edge_set:
                    raise AssertionError(f"embedded edge {e} absent from graph")

    def _lowest_unused(self, exclude: int) -> int:
        p = self._scan
        used = self.used
        while p <= self.n and p in used:
            p += 1
        self._scan = p
        if p > self.n:
            return 0
        if p != exclude:
            return p
        q = p + 1
        while q <= self.n and q in used:
            q += 1
        return q if q <= self.n else 0

    def _advance(self) -> None:
        self.phase += 1
        self.hits = {}
        if self.phase >= len(self.order):
            self._finish()

    def _finish(self) -> None:
        for v in self.isolated:
            w = self._lowest_unused(exclude=0)
            self.image[v] = w
            self.used.add(w)
        self.done = True

    def decide_star(self, g, c, rng):
        if self.done or c in self.used:
            w = self._lowest_unused(exclude=c)
            return w if w else _waste_vertex(c)
        i = self.phase
        v_i = self.order[i]
        earlier = self.earlier[i]
        if not earlier:
            self.image[v_i] = c
            self.used.add(c)
            self._advance()
            w = self._lowest_unused(exclude=c)
            if w == 0:
                return _waste_vertex(c)
            if not self.done:
                nxt = self.order[self.phase]
                if self.earlier[self.phase] == [v_i]:
                    self.image[nxt] = w
                    self.used.add(w)
                    self._advance()
            return w
        j = self.hits.get(c, 0) + 1
        self.hits[c] = j
        target = self.image[earlier[j - 1]]
        if j == len(earlier):
            self.image[v_i] = c
            self.used.add(c)
            self._advance()
        return target


def degenerate_subgraph_strategy(h: MultiGraph, label: str) -> StrategyHandle:
    if h.n > 8:
        raise UsageError("pattern limited to 8 vertices")
    return StrategyHandle(
        id=f"subgraph:{label}", make=lambda n: DegenerateSubgraphStrategy(n, h)
    )


# ---------------------------------------------------------------------------
# Multi-round boosting


class BoostStrategy(_StarStrategy):
    """Restarts the inner strategy on a fresh virtual graph every m steps.

    Decisions in block i see only block i's virtual edges (the real graph
    keeps everything; the property is checked on the real graph).  Only k-1
    restarts happen: with k=1 the wrapper is the inner strategy, move for
    move, however long the run.
    """

    def __init__(self, inner_handle: StrategyHandle, m: int, k: int, n: int):
        self.inner_handle = inner_handle
        self.m = m
        self.k = k
        self.n = n
        self.inner = inner_handle.make(n)
        self.virtual = MultiGraph(n)
        self.step_in_block = 0
        self.blocks_done = 0

    def __getattr__(self, name):
        # certificates transfer: the inner block's edges all exist in the
        # real graph too, and the tracked properties are monotone
        if name.startswith("cert_") or name == "verify_certificate":
            return getattr(self.inner, name)
        raise AttributeError(name)

    def _maybe_restart(self) -> None:
        if self.step_in_block == self.m and self.blocks_done < self.k - 1:
            self.blocks_done += 1
            self.step_in_block = 0
            self.inner = self.inner_handle.make(self.n)
            self.virtual = MultiGraph(self.n)

    def decide_star(self, g, c, rng):
        self._maybe_restart()
        v = self.inner.decide_star(self.virtual, c, rng)
        self.virtual.add_edge(c, v)
        self.step_in_block += 1
        return v

    def decide(self, g, sample, rng):
        self._maybe_restart()
        e = self.inner.decide(self.virtual, sample, rng)
        self.virtual.add_edge(*e)
        self.step_in_block += 1
        return e


def multi_round_boost(inner: StrategyHandle, m: int, k: int) -> StrategyHandle:
    if m < 1 or k < 1:
        raise UsageError("boost needs m, k >= 1")
    return StrategyHandle(
        id=f"boost:{inner.id}:{m}:{k}",
        make=lambda n: BoostStrategy(inner, m, k, n),
        deterministic=inner.deterministic,
    )


# ---------------------------------------------------------------------------
# Approximate-then-cleanup composite


class ApproxThenCleanup(_StarStrategy):
    """Runs the builder to the approximate certificate, then to the full one.

    The builders' moves already are the cleanup moves (extension plus
    length-3 augmentation / insertion), so the wrapper only marks the stage
    boundary and counts the cleanup steps for calibration checks.
    """

    def __init__(self, kind: str, n: int):
        self.kind = kind
        self.n = n
        if kind == "matching":
            self.builder = MatchingStrategy(n)
        elif kind == "hamilton":
            self.builder = HamiltonStrategy(n)
        else:
            raise UsageError(f"unknown cleanup pair {kind!r}")
        self.steps = 0
        self.trigger_step: int | None = None

    def _approx_reached(self) -> bool:
        if self.kind == "matching":
            return self.builder.unsat_count <= approx_margin(self.n)
        return self.builder.cert_path_span - 1 >= approx_margin(self.n)

    @property
    def cleanup_steps(self) -> int | None:
        if self.trigger_step is None:
            return None
        return self.steps - self.trigger_step

    def __getattr__(self, name):
        if name.startswith("cert_") or name == "verify_certificate":
            return getattr(self.builder, name)
        raise AttributeError(name)

    def decide_star(self, g, c, rng):
        v = self.builder.decide_star(g, c, rng)
        self.steps += 1
        if self.trigger_step is None and self._approx_reached():
            self.trigger_step = self.steps
        return v


def approx_then_cleanup(kind: str) -> StrategyHandle:
    if kind not in ("matching", "hamilton"):
        raise UsageError("approx-cleanup pairs: matching, hamilton")
    return StrategyHandle(id=f"approx-cleanup:{kind}", make=lambda n: ApproxThenCleanup(kind, n))


class MatchingCleanupFragment(ReplacementFragment):
    """Completes a partial matching to a perfect one (odd n: near-perfect).

    Pure pairing: a square on an unsaturated vertex is matched to the lowest
    other unsaturated vertex; all other squares are waste.  Progress therefore
    happens with probability exactly (#unsaturated)/n per step — with two
    vertices left the completion time is geometric(2/n), a law the tests
    check in closed form.  Unbudgeted; the caller measures steps against the
    calibrated envelope.
    """

    def __init__(self, n: int, matching_edges):
        super().__init__(budget=None)
        self.strategy = MatchingStrategy.from_matching(n, matching_edges)
        self.target = _matching_target_unsat(n)

    def _finished(self, g) -> bool:
        return self.strategy.unsat_count <= self.target

    def _move(self, g, sample):
        if not isinstance(sample, StarSample):
            return None
        s = self.strategy
        c = sample.center
        if s.partner[c] != 0:
            return None  # saturated square: waste, no state change
        v = s.decide_star(g, c, None)
        if s.unsat_count <= self.target:
            self.done = True
        return (c, v) if c < v else (v, c)


def cleanup_matching(n: int, matching_edges) -> MatchingCleanupFragment:
    return MatchingCleanupFragment(n, matching_edges)


# ---------------------------------------------------------------------------
# Elementary strategies for explicit distributions


class LowestEdgeStrategy:
    """Always keeps the lexicographically lowest offered edge."""

    def decide(self, g, sample, rng):
        return sample.lowest_edge()

    def decide_star(self, g, c, rng):
        return 2 if c == 1 else 1


def lowest_edge_strategy() -> StrategyHandle:
    return StrategyHandle(id="lowest-edge", make=lambda n: LowestEdgeStrategy())


class HashedChoiceStrategy:
    """Deterministic but scrambled pick: a pure function of (salt, history).

    Used as the arbitrary-deterministic-strategy family in exact-verification
    fuzz tests.  Never touches the rng argument.
    """

    def __init__(self, salt: int):
        self.salt = salt

    def _fold(self, g, sample) -> int:
        acc = mix64(self.salt)
        for u, v in g.edges:
            acc = mix64(acc ^ (u * 2654435761 + v))
        for u, v in sample.edges():
            acc = mix64(acc ^ (u * 40503 + v * 65537))
        return acc

    def decide(self, g, sample, rng):
        edges = list(sample.edges())
        return edges[self._fold(g, sample) % len(edges)]


def hashed_choice_strategy(salt: int) -> StrategyHandle:
    return StrategyHandle(id=f"hashpick:{salt}", make=lambda n: HashedChoiceStrategy(salt))


# ---------------------------------------------------------------------------
# Registry


def parse_strategy_id(token: str) -> StrategyHandle:
    """CLI strategy ids: min-degree:k, matching, hamilton, subgraph:<file>,
    boost:<inner>:<m>:<k>, approx-cleanup:<matching|hamilton>."""
    if token.startswith("min-degree:"):
        raw = token.split(":", 1)[1]
        try:
            k = int(raw)
        except ValueError:
            raise UsageError(f"bad min-degree parameter {raw!r}") from None
        return min_degree_strategy(k)
    if token == "matching":
        return matching_strategy()
    if token == "hamilton":
        return hamilton_strategy()
    if token == "lowest-edge":
        return lowest_edge_strategy()
    if token.startswith("hashpick:"):
        raw = token.split(":", 1)[1]
        try:
            return hashed_choice_strategy(int(raw))
        except ValueError:
            raise UsageError(f"bad hashpick salt {raw!r}") from None
    if token.startswith("approx-cleanup:"):
        return approx_then_cleanup(token.split(":", 1)[1])
    if token.startswith("subgraph:"):
        ref = token.split(":", 1)[1]
        if ref in _NAMED_PATTERNS:
            return degenerate_subgraph_strategy(named_pattern(ref), ref)
        from .errors import DataError

        try:
            with open(ref, "r", encoding="utf-8") as fh:
                h = parse_edge_list(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read pattern file {ref!r}: {exc}") from exc
        except ValueError as exc:
            raise DataError(f"bad pattern file {ref!r}: {exc}") from exc
        return degenerate_subgraph_strategy(h, ref)
    if token.startswith("boost:"):
        parts = token.split(":")
        if len(parts) < 4:
            raise UsageError(f"boost id needs boost:<inner>:<m>:<k>, got {token!r}")
        try:
            m = int(parts[-2])
            k = int(parts[-1])
        except ValueError:
            raise UsageError(f"bad boost parameters in {token!r}") from None
        inner = parse_strategy_id(":".join(parts[1:-2]))
        return multi_round_boost(inner, m, k)
    raise UsageError(f"unknown strategy id {token!r}")
