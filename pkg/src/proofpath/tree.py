"""Verification-tree data model.

A tree node carries an 8-hex-character ID (a pure function of its rule text),
a step number (distance from the root), and the opaque constraint-reduction
rule string itself.  The root's rule is the name of the property being
proved.  Trees grow by expanding one endpoint at a time with the children a
prover backend reports, and never beyond the current depth bound.

Node identity is positional: two nodes carrying the same rule at the same
step under different parents are distinct tree positions.  The ``(id, step)``
pair is only used for cross-round state matching (coverage accounting and
trace files).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Sequence

from .errors import DepthExceededError, InvalidStateError, NodeNotFoundError

if TYPE_CHECKING:  # pragma: no cover
    from .search import PathVerdict

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _MASK64
    return h


def node_id(rule: str) -> str:
    """Stable 8-hex-character ID of a rule string.

    The low 32 bits of the 64-bit FNV-1a hash of the UTF-8 encoding,
    rendered as lowercase hex.  Equal rules always yield equal IDs.
    """
    if not rule:
        raise ValueError("rule must be non-empty")
    return format(fnv64(rule.encode("utf-8")) & 0xFFFFFFFF, "08x")


@dataclass(eq=False)
class RuleNode:
    """One proof state: rule text, step number, and derived ID.

    Instances hash by identity; a node is a position in one tree.
    """

    rule: str
    step: int
    id: str = field(init=False)

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError("step must be non-negative")
        self.id = node_id(self.rule)

    def __repr__(self) -> str:  # pragma: no cover
        return f"RuleNode({self.id}, step={self.step}, rule={self.rule!r})"


@dataclass
class ProofPath:
    """A root-to-endpoint node sequence; a candidate proof."""

    nodes: list[RuleNode]
    verdict: "PathVerdict | None" = None

    def rules(self) -> list[str]:
        return [n.rule for n in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)


class VerificationTree:
    """Incrementally expanded tree of rule nodes with endpoint tracking.

    The endpoint set holds the frontier: nodes that have not been expanded
    yet.  Expanding a node with an empty child list turns it into a terminal
    leaf, which is childless but no longer an endpoint.
    """

    def __init__(self, root_rule: str, depth_bound: int = 5):
        if depth_bound < 1:
            raise ValueError("depth_bound must be positive")
        self.root = RuleNode(root_rule, 0)
        self.depth_bound = depth_bound
        self._children: dict[RuleNode, list[RuleNode]] = {self.root: []}
        self._parent: dict[RuleNode, RuleNode] = {}
        self._expanded: dict[RuleNode, bool] = {self.root: False}
        # insertion-ordered set, so iteration is deterministic
        self._endpoints: dict[RuleNode, None] = {self.root: None}

    def __contains__(self, node: RuleNode) -> bool:
        return node in self._children

    def __len__(self) -> int:
        return len(self._children)

    @property
    def endpoints(self) -> list[RuleNode]:
        return list(self._endpoints)

    def is_endpoint(self, node: RuleNode) -> bool:
        return node in self._endpoints

    def children(self, node: RuleNode) -> list[RuleNode]:
        try:
            return list(self._children[node])
        except KeyError:
            raise NodeNotFoundError(f"unknown node {node.id}@{node.step}") from None

    def parent(self, node: RuleNode) -> RuleNode | None:
        if node not in self._children:
            raise NodeNotFoundError(f"unknown node {node.id}@{node.step}")
        return self._parent.get(node)

    def sibling_index(self, node: RuleNode) -> int:
        """Position of ``node`` among its parent's children; 0 for the root."""
        parent = self.parent(node)
        if parent is None:
            return 0
        return self._children[parent].index(node)

    def raise_depth_bound(self, new_bound: int) -> None:
        if new_bound < self.depth_bound:
            raise ValueError("depth bound can only grow")
        self.depth_bound = new_bound

    def expand_endpoint(self, endpoint: RuleNode, rules: Sequence[str]) -> list[RuleNode]:
        """Attach ``rules`` as ordered children of ``endpoint``.

        The endpoint leaves the endpoint set; the new nodes join it.
        Returns the new child nodes.
        """
        if endpoint not in self._endpoints:
            if endpoint not in self._children:
                raise NodeNotFoundError(f"unknown node {endpoint.id}@{endpoint.step}")
            raise InvalidStateError(
                f"node {endpoint.id}@{endpoint.step} is not an endpoint"
            )
        if endpoint.step + 1 > self.depth_bound:
            raise DepthExceededError(
                f"expanding at step {endpoint.step} exceeds depth bound {self.depth_bound}"
            )
        children = [RuleNode(rule, endpoint.step + 1) for rule in rules]
        del self._endpoints[endpoint]
        self._expanded[endpoint] = True
        self._children[endpoint] = children
        for child in children:
            self._children[child] = []
            self._parent[child] = endpoint
            self._expanded[child] = False
            self._endpoints[child] = None
        return children

    def path_to(self, node: RuleNode) -> ProofPath:
        """The root-to-``node`` path; its length is ``node.step + 1``."""
        if node not in self._children:
            raise NodeNotFoundError(f"unknown node {node.id}@{node.step}")
        nodes = [node]
        while (up := self._parent.get(nodes[-1])) is not None:
            nodes.append(up)
        nodes.reverse()
        return ProofPath(nodes)

    def walk(self) -> Iterator[RuleNode]:
        """All nodes in breadth-first order (deterministic)."""
        queue = [self.root]
        while queue:
            node = queue.pop(0)
            yield node
            queue.extend(self._children[node])

    def structure(self) -> list[tuple[str, int, tuple[str, ...]]]:
        """Shape fingerprint: (id, step, child ids) in BFS order.

        Two trees built through different expansion sequences compare equal
        here exactly when they merged to the same shape.
        """
        return [
            (n.id, n.step, tuple(c.id for c in self._children[n]))
            for n in self.walk()
        ]
