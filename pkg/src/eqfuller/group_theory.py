"""Finite groups, orthogonal actions, isotropy lattices and tables of marks.

Groups are given by multiplication tables over element indices
``0..order-1`` with ``mul[a][b] = ab``.  Subgroups are frozensets of element
indices.  Everything is exhaustive and exact; the size cap keeps it cheap.
"""
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import permutations
from typing import Optional, Sequence

import numpy as np

from .errors import AmbiguousIsotropy, GroupError, GroupTooLarge

MAX_ORDER = 64
RANK_CUT = 0.5


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    mul: tuple
    element_names: tuple = ()
    name: str = ""

    def __post_init__(self):
        table = np.asarray(self.mul, dtype=np.int64)
        n = table.shape[0]
        if table.ndim != 2 or table.shape != (n, n) or n == 0:
            raise GroupError("multiplication table must be a non-empty square table")
        if table.min() < 0 or table.max() >= n:
            raise GroupError("multiplication table entries out of range")
        if n > MAX_ORDER:
            raise GroupTooLarge(f"group order {n} exceeds cap {MAX_ORDER}")
        object.__setattr__(self, "mul", tuple(tuple(int(v) for v in row) for row in table))
        if not self.element_names:
            object.__setattr__(self, "element_names", tuple(f"g{i}" for i in range(n)))
        elif len(self.element_names) != n:
            raise GroupError("need one element name per element")
        # associativity, exhaustively: (ab)c == a(bc)
        left = table[table[:, :, None], np.arange(n)[None, None, :]]
        right = table[np.arange(n)[:, None, None], table[None, :, :]]
        if not np.array_equal(left, right):
            raise GroupError("multiplication table is not associative")
        ids = [e for e in range(n)
               if np.array_equal(table[e], np.arange(n)) and np.array_equal(table[:, e], np.arange(n))]
        if not ids:
            raise GroupError("no two-sided identity")
        e = ids[0]
        for a in range(n):
            if not any(table[a, b] == e and table[b, a] == e for b in range(n)):
                raise GroupError(f"element {a} has no inverse")

    @property
    def order(self) -> int:
        return len(self.mul)

    @cached_property
    def table(self) -> np.ndarray:
        t = np.asarray(self.mul, dtype=np.int64)
        t.setflags(write=False)
        return t

    @cached_property
    def identity(self) -> int:
        for e in range(self.order):
            if all(self.mul[e][a] == a for a in range(self.order)):
                return e
        raise AssertionError("unreachable")

    @cached_property
    def inverses(self) -> tuple:
        e = self.identity
        return tuple(next(b for b in range(self.order) if self.mul[a][b] == e)
                     for a in range(self.order))

    def inv(self, a: int) -> int:
        return self.inverses[a]

    def conjugate(self, g: int, sub) -> frozenset:
        """g sub g^-1."""
        gi = self.inverses[g]
        return frozenset(self.mul[self.mul[g][h]][gi] for h in sub)

    def closure(self, gens) -> frozenset:
        elems = {self.identity} | set(gens)
        frontier = list(elems)
        while frontier:
            a = frontier.pop()
            for b in list(elems):
                for c in (self.mul[a][b], self.mul[b][a]):
                    if c not in elems:
                        elems.add(c)
                        frontier.append(c)
        return frozenset(elems)

    def is_subgroup(self, sub) -> bool:
        sub = set(sub)
        if self.identity not in sub:
            return False
        return all(self.mul[a][b] in sub for a in sub for b in sub)

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != self.identity:
            x = self.mul[x][a]
            k += 1
        return k

    @cached_property
    def lattice(self) -> "IsotropyLattice":
        return enumerate_subgroup_classes(self)


# -- builtin groups ---------------------------------------------------------

def _from_permutations(perms, names, name):
    index = {p: i for i, p in enumerate(perms)}
    # (a*b)(x) = a(b(x))
    mul = [[index[tuple(a[b[x]] for x in range(len(a)))] for b in perms] for a in perms]
    return FiniteGroup(tuple(map(tuple, mul)), tuple(names), name)


@lru_cache(maxsize=None)
def trivial_group() -> FiniteGroup:
    return FiniteGroup(((0,),), ("e",), "e")


@lru_cache(maxsize=None)
def cyclic_group(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("cyclic group needs n >= 1")
    mul = tuple(tuple((a + b) % n for b in range(n)) for a in range(n))
    names = ("e",) + tuple(f"r{k}" for k in range(1, n))
    return FiniteGroup(mul, names, "e" if n == 1 else f"Z{n}")


@lru_cache(maxsize=None)
def dihedral_group(n: int) -> FiniteGroup:
    """Symmetries of the regular n-gon, order 2n; elements r^k (k) and s r^k (n+k)."""
    if n < 1:
        raise GroupError("dihedral group needs n >= 1")
    perms = []
    names = []
    for k in range(n):
        perms.append(tuple((x + k) % n for x in range(n)))
        names.append("e" if k == 0 else f"r{k}")
    for k in range(n):
        perms.append(tuple((-x - k) % n for x in range(n)))
        names.append(f"sr{k}" if k else "s")
    if n <= 2:
        # the n-gon picture degenerates; build D_n as Z_n x| Z_2 directly
        def el(a):
            return (a % n, 0) if a < n else (a % n, 1)

        def mul(a, b):
            (ka, fa), (kb, fb) = el(a), el(b)
            k = (ka + (-kb if fa else kb)) % n
            f = fa ^ fb
            return k + n * f
        table = tuple(tuple(mul(a, b) for b in range(2 * n)) for a in range(2 * n))
        return FiniteGroup(table, tuple(names), f"D{n}")
    return _from_permutations(perms, names, f"D{n}")


@lru_cache(maxsize=None)
def symmetric_group(n: int) -> FiniteGroup:
    if not 1 <= n <= 4:
        raise GroupError("symmetric groups are provided for n <= 4")
    perms = sorted(permutations(range(n)))
    names = ["".join(str(v) for v in p) for p in perms]
    names[0] = "e"
    return _from_permutations(perms, names, f"S{n}" if n > 1 else "e")


def builtin_group(kind: str, n: int = 1) -> FiniteGroup:
    """Builtin groups are cached, so equal requests share one group and lattice."""
    kind = kind.lower()
    if kind == "trivial":
        return trivial_group()
    if kind == "cyclic":
        return cyclic_group(n)
    if kind == "dihedral":
        return dihedral_group(n)
    if kind == "symmetric":
        return symmetric_group(n)
    raise GroupError(f"unknown builtin group {kind!r}")


# -- actions ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrthogonalAction:
    group: FiniteGroup
    matrices: np.ndarray

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[0] != self.group.order or mats.shape[1] != mats.shape[2]:
            raise GroupError("need one square matrix per group element")
        n = mats.shape[1]
        eye = np.eye(n)
        for g in range(self.group.order):
            if np.max(np.abs(mats[g].T @ mats[g] - eye), initial=0.0) >= 1e-12:
                raise GroupError(f"matrix of element {g} is not orthogonal")
        if np.max(np.abs(mats[self.group.identity] - eye), initial=0.0) >= 1e-12:
            raise GroupError("identity element must act trivially")
        T = self.group.table
        prod = np.einsum("aij,bjk->abik", mats, mats)
        if np.max(np.abs(prod - mats[T]), initial=0.0) >= 1e-12:
            raise GroupError("matrices do not define a homomorphism")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def apply(self, g: int, x) -> np.ndarray:
        return self.matrices[g] @ np.asarray(x, dtype=float)

    def orbit(self, x) -> np.ndarray:
        return np.einsum("gij,j->gi", self.matrices, np.asarray(x, dtype=float))


def trivial_action(group: FiniteGroup, dim: int) -> OrthogonalAction:
    return OrthogonalAction(group, np.repeat(np.eye(dim)[None], group.order, axis=0))


def antipodal_action(dim: int) -> OrthogonalAction:
    """Z2 acting by x -> -x."""
    return OrthogonalAction(cyclic_group(2), np.array([np.eye(dim), -np.eye(dim)]))


def reflection_action(dim: int, axis: int = -1) -> OrthogonalAction:
    """Z2 flipping the sign of one coordinate."""
    flip = np.eye(dim)
    flip[axis, axis] = -1.0
    return OrthogonalAction(cyclic_group(2), np.array([np.eye(dim), flip]))


def cyclic_shift_action(n: int, block: int = 2) -> OrthogonalAction:
    """Z_n permuting n blocks of size ``block``: (r^k x)_j = x_{j+k}."""
    group = cyclic_group(n)
    dim = n * block
    mats = np.zeros((n, dim, dim))
    for k in range(n):
        for j in range(n):
            src = (j + k) % n
            mats[k, j * block:(j + 1) * block, src * block:(src + 1) * block] = np.eye(block)
    return OrthogonalAction(group, mats)


def permutation_action(group: FiniteGroup, perms: Sequence[Sequence[int]]) -> OrthogonalAction:
    """Action on R^n permuting coordinates: (g x)_{perm[i]} = x_i."""
    n = len(perms[0])
    mats = np.zeros((group.order, n, n))
    for g, p in enumerate(perms):
        for i in range(n):
            mats[g, p[i], i] = 1.0
    return OrthogonalAction(group, mats)


def symmetric_permutation_action(n: int) -> OrthogonalAction:
    group = symmetric_group(n)
    return permutation_action(group, sorted(permutations(range(n))))


# -- isotropy lattice -------------------------------------------------------

@dataclass(frozen=True)
class SubgroupClass:
    class_id: int
    representative: frozenset
    members: tuple
    normalizer_order: int
    name: str

    @property
    def order(self) -> int:
        return len(self.representative)

    @property
    def weyl_order(self) -> int:
        return self.normalizer_order // len(self.representative)


@dataclass(frozen=True, eq=False)
class IsotropyLattice:
    group: FiniteGroup
    classes: tuple
    leq: np.ndarray
    marks: np.ndarray
    _lookup: dict = field(repr=False, default_factory=dict)

    def __len__(self):
        return len(self.classes)

    def class_of(self, sub) -> int:
        """Class id of a subgroup given as a set of element indices."""
        return self._lookup[frozenset(sub)]

    def by_name(self, name: str) -> int:
        name = name.strip()
        if name.startswith("(") and name.endswith(")"):
            name = name[1:-1]
        for c in self.classes:
            if c.name == name:
                return c.class_id
        raise KeyError(name)

    def name(self, class_id: int) -> str:
        return f"({self.classes[class_id].name})"

    @property
    def trivial_class(self) -> int:
        return self.class_of({self.group.identity})

    @property
    def full_class(self) -> int:
        return 0


def _structure_name(group: FiniteGroup, sub: frozenset) -> str:
    m = len(sub)
    if m == 1:
        return "e"
    if any(group.element_order(a) == m for a in sub):
        return f"Z{m}"
    abelian = all(group.mul[a][b] == group.mul[b][a] for a in sub for b in sub)
    involutions = sum(1 for a in sub if group.element_order(a) == 2)
    if abelian:
        if all(group.element_order(a) <= 2 for a in sub):
            k = m.bit_length() - 1
            return "V4" if m == 4 else f"Z2^{k}"
        return f"A{m}"
    if m % 2 == 0:
        half = m // 2
        has_rot = any(group.element_order(a) == half for a in sub)
        if has_rot and involutions == half + (1 if half % 2 == 0 else 0):
            return "S3" if m == 6 else f"D{half}"
    if m == 8 and involutions == 1:
        return "Q8"
    if m == 12 and involutions == 3:
        return "A4"
    if m == 24 and involutions == 9:
        return "S4"
    return f"H{m}"


def all_subgroups(group: FiniteGroup) -> set:
    """Every subgroup, by closure of generated subsets with memoization."""
    found = {group.closure({g}) for g in range(group.order)}
    frontier = list(found)
    while frontier:
        sub = frontier.pop()
        for g in range(group.order):
            if g in sub:
                continue
            bigger = group.closure(sub | {g})
            if bigger not in found:
                found.add(bigger)
                frontier.append(bigger)
    return found


def enumerate_subgroup_classes(group: FiniteGroup) -> IsotropyLattice:
    if group.order > MAX_ORDER:
        raise GroupTooLarge(f"group order {group.order} exceeds cap {MAX_ORDER}")
    subs = all_subgroups(group)
    seen = set()
    raw = []
    for sub in subs:
        if sub in seen:
            continue
        members = {group.conjugate(g, sub) for g in range(group.order)}
        seen |= members
        ordered = sorted(members, key=lambda s: tuple(sorted(s)))
        raw.append(ordered)
    raw.sort(key=lambda ms: (-len(ms[0]), tuple(sorted(ms[0]))))

    classes = []
    used = {}
    lookup = {}
    for cid, members in enumerate(raw):
        rep = members[0]
        normalizer = sum(1 for g in range(group.order) if group.conjugate(g, rep) == rep)
        base = group.name if (len(rep) == group.order and group.name) else _structure_name(group, rep)
        count = used.get(base, 0)
        used[base] = count + 1
        label = base + "'" * count
        classes.append(SubgroupClass(cid, rep, tuple(members), normalizer, label))
        for s in members:
            lookup[s] = cid

    k = len(classes)
    leq = np.zeros((k, k), dtype=bool)
    for i, ci in enumerate(classes):
        for j, cj in enumerate(classes):
            leq[i, j] = any(m <= cj.representative for m in ci.members)
    marks = np.zeros((k, k), dtype=np.int64)
    for i, ci in enumerate(classes):
        for j, cj in enumerate(classes):
            marks[i, j] = _count_fixed_cosets(group, ci.representative, cj.representative)
    leq.setflags(write=False)
    marks.setflags(write=False)
    return IsotropyLattice(group, tuple(classes), leq, marks, lookup)


def _count_fixed_cosets(group: FiniteGroup, K: frozenset, L: frozenset) -> int:
    """#{gL in G/L : K gL = gL} = #{gL : g^-1 K g subset L}."""
    count = 0
    covered = set()
    for g in range(group.order):
        if g in covered:
            continue
        coset = {group.mul[g][l] for l in L}
        covered |= coset
        if group.conjugate(group.inv(g), K) <= L:
            count += 1
    return count


def class_leq(lattice: IsotropyLattice, H: int, K: int) -> bool:
    return bool(lattice.leq[H, K])


def table_of_marks(lattice: IsotropyLattice) -> np.ndarray:
    return lattice.marks


def solve_marks(lattice: IsotropyLattice, counts) -> list:
    """Solve sum_L n_L m[K][L] = counts[K] exactly (forward substitution).

    ``counts`` is indexed by class id; returns a list of Fractions.
    """
    from fractions import Fraction

    m = lattice.marks
    k = len(lattice)
    n = [Fraction(0)] * k
    for K in range(k):
        acc = Fraction(counts[K])
        for L in range(K):
            if m[K, L]:
                acc -= n[L] * int(m[K, L])
        n[K] = acc / int(m[K, K])
    return n


def apply_marks(lattice: IsotropyLattice, coeffs) -> list:
    """counts[K] = sum_L coeffs[L] m[K][L]."""
    from fractions import Fraction

    m = lattice.marks
    k = len(lattice)
    return [sum((Fraction(coeffs[L]) * int(m[K, L]) for L in range(k)), Fraction(0))
            for K in range(k)]


# -- fixed spaces and isotropy ---------------------------------------------

def _as_subgroup(action_or_group, H):
    group = getattr(action_or_group, "group", action_or_group)
    if isinstance(H, (int, np.integer)):
        return group.lattice.classes[int(H)].representative
    return frozenset(H)


def projector(action: OrthogonalAction, H) -> np.ndarray:
    sub = _as_subgroup(action, H)
    return np.mean([action.matrices[h] for h in sorted(sub)], axis=0)


def fixed_subspace(action: OrthogonalAction, H) -> np.ndarray:
    """Orthonormal basis (columns) of the H-fixed subspace.

    ``H`` is a class id (its representative is used) or an explicit subgroup.
    """
    P = projector(action, H)
    P = 0.5 * (P + P.T)
    w, v = np.linalg.eigh(P)
    basis = v[:, w > RANK_CUT]
    # deterministic orientation: largest-magnitude entry of each column positive
    for j in range(basis.shape[1]):
        i = np.argmax(np.abs(basis[:, j]))
        if basis[i, j] < 0:
            basis[:, j] = -basis[:, j]
    return basis


def isotropy_subgroup(action: OrthogonalAction, x, tol: float) -> frozenset:
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    dists = np.linalg.norm(action.orbit(x) - x[None, :], axis=1)
    if np.any((dists >= tol) & (dists < 10 * tol)):
        raise AmbiguousIsotropy(
            f"point too close to a stratum boundary (distances {np.sort(dists)})")
    sub = frozenset(int(g) for g in np.nonzero(dists < tol)[0])
    if not action.group.is_subgroup(sub):
        raise AmbiguousIsotropy("elements fixing the point do not form a subgroup")
    return sub


def isotropy_class_of_point(action: OrthogonalAction, x, tol: float = 1e-8) -> int:
    return action.group.lattice.class_of(isotropy_subgroup(action, x, tol))


def realized_classes(action: OrthogonalAction) -> list:
    """Per class: does some point of R^n have exactly this isotropy type?

    H is an isotropy subgroup iff V^H is not covered by the V^K, K > H, i.e.
    iff every strictly larger subgroup has a strictly smaller fixed space.
    """
    group = action.group
    subs = all_subgroups(group)
    out = []
    for c in group.lattice.classes:
        H = c.representative
        d = fixed_subspace(action, H).shape[1]
        ok = all(fixed_subspace(action, K).shape[1] < d for K in subs if H < K)
        out.append(ok)
    return out


# -- JSON input ---------------------------------------------------------------

def group_from_json(spec: dict) -> FiniteGroup:
    if "builtin" in spec:
        return builtin_group(spec["builtin"], int(spec.get("n", 1)))
    if "mul" not in spec:
        raise GroupError("group config needs 'mul' or 'builtin'")
    mul = spec["mul"]
    order = spec.get("order", len(mul))
    if order != len(mul):
        raise GroupError(f"'order' is {order} but 'mul' has {len(mul)} rows")
    return FiniteGroup(tuple(tuple(r) for r in mul), tuple(spec.get("names", ())),
                       spec.get("name", ""))


def action_from_json(group: FiniteGroup, spec: dict) -> OrthogonalAction:
    mats = np.asarray(spec["matrices"], dtype=float)
    if mats.ndim == 2:
        # flat row-major blocks
        n = int(round(np.sqrt(mats.shape[1])))
        mats = mats.reshape(mats.shape[0], n, n)
    return OrthogonalAction(group, mats)


def lattice_summary(lattice: IsotropyLattice, realized: Optional[list] = None) -> dict:
    out = {
        "group": lattice.group.name,
        "order": lattice.group.order,
        "classes": [],
        "marks": lattice.marks.tolist(),
    }
    for c in lattice.classes:
        entry = {
            "class_id": c.class_id,
            "name": lattice.name(c.class_id),
            "order": c.order,
            "conjugates": len(c.members),
            "normalizer_order": c.normalizer_order,
            "weyl_order": c.weyl_order,
            "representative": sorted(lattice.group.element_names[g] for g in c.representative),
        }
        if realized is not None:
            entry["realized_as_isotropy"] = bool(realized[c.class_id])
        out["classes"].append(entry)
    return out
