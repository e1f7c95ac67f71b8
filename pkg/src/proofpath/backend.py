"""Prover backends.

The search layers talk to a backend through one call: hand it a root-to-
endpoint path, get back either the ordered child rules of the endpoint, a
completion signal, or a dead end.  Two implementations live here:

* ``SyntheticBackend`` — a seeded generator with one planted supporting
  path.  Off-path branches emit pairwise-dissimilar rule texts for a
  configurable number of steps and then fall into an endless loop family
  with incrementing numeric suffixes, so loop detection has something real
  to find and nothing false to trip on.
* ``TraceBackend`` — replays a JSON-Lines trace file recorded earlier.

Replies are a pure function of (seed, path), so independent instances with
the same seed behave identically.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import InvalidPathError, TraceFormatError
from .loops import bitparallel_distance
from .rng import stream_seed, substream
from .tree import ProofPath, RuleNode, node_id

MAX_BRANCHING = 16

DEFAULT_ROOT_RULE = "secrecy_of_session_key"
DEFAULT_LOOP_TEMPLATE = "!KU( aenc(<'2', ~ni.{K}, nr.{K}, $R.{K}>, pk(~ltkA.{K})))"

_CHAIN_SUFFIX = re.compile(r" @ #vk([0-9a-f]{8})\.(\d+)$")


@dataclass(frozen=True)
class Children:
    rules: tuple[str, ...]


@dataclass(frozen=True)
class Complete:
    pass


@dataclass(frozen=True)
class Dead:
    pass


BackendReply = Children | Complete | Dead


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic proof-tree generator.

    decoy_delay is the number of steps a decoy branch survives before its
    rules turn into the loop family; n_decoys is the branching inside decoy
    subtrees; support_position controls where the supporting child sits in
    each on-path child list.
    """

    seed: int = 0
    correct_depth: int = 5
    branching: int = 2
    decoy_delay: int = 4
    n_decoys: int = 2
    support_position: str = "last"  # "first" | "last" | "random"
    dead_prob: float = 0.1
    loop_template: str = DEFAULT_LOOP_TEMPLATE

    def __post_init__(self) -> None:
        if self.correct_depth < 1:
            raise ValueError("correct_depth must be >= 1")
        if not 2 <= self.branching <= MAX_BRANCHING:
            raise ValueError(f"branching must be in [2, {MAX_BRANCHING}]")
        if self.decoy_delay < 0:
            raise ValueError("decoy_delay must be >= 0")
        if not 1 <= self.n_decoys <= MAX_BRANCHING:
            raise ValueError(f"n_decoys must be in [1, {MAX_BRANCHING}]")
        if self.support_position not in ("first", "last", "random"):
            raise ValueError("support_position must be first, last or random")
        if not 0 <= self.dead_prob < 1:
            raise ValueError("dead_prob must be in [0, 1)")
        if "{K}" not in self.loop_template:
            raise ValueError("loop_template must contain the {K} placeholder")


# -- rule-text generation ----------------------------------------------------

_FACT_STEMS = (
    "State", "Insert", "Lock", "Unlock", "Counter", "Session", "Register",
    "Token", "Commit", "Reveal", "Cell", "Step", "Key", "Nonce", "Vote",
)
_TOKEN_ALPHABET = "0123456789abcdefghjkmnpqrstuvwxyz"


def rules_dissimilar(x: str, y: str, frac: float = 0.5) -> bool:
    """Whether edit_distance(x, y) >= frac * max(len(x), len(y))."""
    need = frac * max(len(x), len(y))
    if need <= 0:
        return True
    if abs(len(x) - len(y)) >= need:
        return True  # the length gap alone reaches the required distance
    return bitparallel_distance(x, y) >= need


def _token(rng: np.random.Generator, lo: int, hi: int) -> str:
    size = int(rng.integers(lo, hi))
    return "".join(_TOKEN_ALPHABET[int(i)] for i in rng.integers(33, size=size))


def make_rule_text(rng: np.random.Generator) -> str:
    """One random constraint-rule-looking string (length varies ~50-100).

    Most of each rule is random token content, so independently drawn rules
    sit far apart in edit distance despite the shared punctuation.
    """
    fact = _FACT_STEMS[int(rng.integers(len(_FACT_STEMS)))]
    tag = _token(rng, 9, 17)
    args = []
    for _ in range(int(rng.integers(3, 7))):
        tok = _token(rng, 4, 9)
        style = rng.random()
        if style < 0.35:
            args.append(f"~{tok}.{int(rng.integers(1, 9))}")
        elif style < 0.7:
            args.append(f"{tok}{int(rng.integers(1, 12))}")
        else:
            args.append(tok)
    marker = "@ #t" if rng.random() < 0.5 else "▷ #vr"
    return f"solve( {fact}_{tag}( {', '.join(args)} ) {marker}{int(rng.integers(1, 30))} )"


def fresh_rules(
    rng: np.random.Generator, count: int, avoid: Iterable[str], frac: float = 0.5
) -> list[str]:
    """``count`` rule texts pairwise dissimilar to each other and to ``avoid``."""
    seen = list(avoid)
    out: list[str] = []
    while len(out) < count:
        for _ in range(200):
            cand = make_rule_text(rng)
            if all(rules_dissimilar(cand, other, frac) for other in seen):
                break
        else:  # pragma: no cover - generation space is enormous
            raise RuntimeError("could not sample a dissimilar rule text")
        out.append(cand)
        seen.append(cand)
    return out


def _hash01(seed: int, *labels: object) -> float:
    return stream_seed(seed, *labels) / 2.0**128


class SyntheticBackend:
    """Seeded synthetic prover with a single planted supporting path.

    Every node on the planted path offers ``branching`` children: the next
    planted rule plus decoy branch roots.  Decoy subtrees branch ``n_decoys``
    wide for ``decoy_delay`` steps, then collapse into single-child loop
    chains whose rules share a chain tag and differ only in an incrementing
    numeric suffix.  Some deeper decoy children are dead ends; the first
    child of a decoy node never is, so every branch can be driven into its
    loop.
    """

    _REPLY_CACHE_CAP = 200_000
    _planted_memo: dict[tuple, tuple[str, ...]] = {}

    def __init__(self, spec: SyntheticSpec, root_rule: str = DEFAULT_ROOT_RULE):
        self.spec = spec
        self.root_rule = root_rule
        memo_key = (spec.seed, spec.correct_depth, root_rule)
        planted_full = self._planted_memo.get(memo_key)
        if planted_full is None:
            planted = fresh_rules(
                substream(spec.seed, "planted"), spec.correct_depth, avoid=[root_rule]
            )
            # full planted path, root included: index == step
            planted_full = (root_rule, *planted)
            self._planted_memo[memo_key] = planted_full
        self.planted = planted_full
        self._replies: dict[tuple[str, ...], BackendReply] = {}

    # ground truth, used by trace writing and tests only
    def planted_path(self) -> tuple[str, ...]:
        return self.planted

    def is_supporting(self, rules: tuple[str, ...]) -> bool:
        return rules == self.planted[: len(rules)]

    def expand(self, path: ProofPath) -> BackendReply:
        if not path.nodes or path.nodes[0].rule != self.root_rule:
            raise InvalidPathError("path does not start at the backend root")
        return self.reply_for(tuple(path.rules()))

    def reply_for(self, rules: tuple[str, ...]) -> BackendReply:
        """Reply for the path given as its rule texts, root first (memoized)."""
        reply = self._replies.get(rules)
        if reply is None:
            reply = self._compute_reply(rules)
            if len(self._replies) >= self._REPLY_CACHE_CAP:
                self._replies.clear()
            self._replies[rules] = reply
        return reply

    def _compute_reply(self, rules: tuple[str, ...]) -> BackendReply:
        spec = self.spec
        diverge = None
        for i, rule in enumerate(rules):
            if i >= len(self.planted) or rule != self.planted[i]:
                diverge = i
                break

        if diverge is None:
            step = len(rules) - 1
            if step == spec.correct_depth:
                return Complete()
            return Children(self._on_path_children(rules, step))

        if diverge == 0:
            raise InvalidPathError("path does not start at the backend root")
        if diverge == len(self.planted):
            raise InvalidPathError("path extends past the completed endpoint")

        # depth within the decoy branch; the branch root has depth 1
        branch_depth = len(rules) - diverge
        endpoint = rules[-1]

        chain = _CHAIN_SUFFIX.search(endpoint)
        if chain is not None:
            tag, k = chain.group(1), int(chain.group(2))
            return Children((self._family_rule(tag, k + 1),))

        # endpoint is a pre-loop decoy word; check it really belongs here
        parent_reply = self.reply_for(rules[:-1])
        if not isinstance(parent_reply, Children) or endpoint not in parent_reply.rules:
            raise InvalidPathError("path was not generated by this backend")
        if (
            branch_depth >= 2
            and parent_reply.rules.index(endpoint) > 0
            and _hash01(spec.seed, "dead", *rules) < spec.dead_prob
        ):
            return Dead()
        return Children(tuple(self._decoy_child_rules(rules, branch_depth, diverge)))

    # -- generation helpers --------------------------------------------------

    def _on_path_children(self, rules: tuple[str, ...], step: int) -> tuple[str, ...]:
        spec = self.spec
        support = self.planted[step + 1]
        if spec.decoy_delay == 0:
            decoys = [
                self._family_rule(self._chain_tag(rules, ordinal=i), 1)
                for i in range(spec.branching - 1)
            ]
        else:
            decoys = fresh_rules(
                substream(spec.seed, "droot", step + 1),
                spec.branching - 1,
                avoid=list(rules) + [support],
            )
        if spec.support_position == "first":
            pos = 0
        elif spec.support_position == "last":
            pos = spec.branching - 1
        else:
            pos = int(substream(spec.seed, "spos", step + 1).integers(spec.branching))
        decoys.insert(pos, support)
        return tuple(decoys)

    def _decoy_child_rules(self, rules: tuple[str, ...], parent_branch_depth: int, diverge: int) -> list[str]:
        """Children of a decoy node at the given branch depth (pure in path)."""
        spec = self.spec
        if parent_branch_depth == 0:
            # parent is the planted node the branch hangs off
            return list(self._on_path_children(rules, len(rules) - 1))
        if parent_branch_depth < spec.decoy_delay:
            return fresh_rules(
                substream(spec.seed, "decoy", stream_seed(spec.seed, *rules)),
                spec.n_decoys,
                avoid=rules,
            )
        # loop onset: the chain below this pre-loop leaf starts here
        return [self._family_rule(self._chain_tag(rules), 1)]

    def _chain_tag(self, rules: tuple[str, ...], ordinal: int | None = None) -> str:
        labels = ("chain", *rules) if ordinal is None else ("chain", *rules, ordinal)
        return format(stream_seed(self.spec.seed, *labels) & 0xFFFFFFFF, "08x")

    def _family_rule(self, tag: str, k: int) -> str:
        return f"{self.spec.loop_template.replace('{K}', str(k))} @ #vk{tag}.{k}"


def make_synthetic_factory(
    spec: SyntheticSpec, root_rule: str = DEFAULT_ROOT_RULE
) -> Callable[[], SyntheticBackend]:
    """Factory producing independent same-seed backend instances."""
    return lambda: SyntheticBackend(spec, root_rule)


# -- trace files -------------------------------------------------------------

_TRACE_KEYS = {"id", "step", "rule", "children", "flags"}
_FLAG_KEYS = {"supporting", "complete"}


class TraceBackend:
    """Replays a recorded verification tree.

    Nodes are keyed by (id, step); the same rule may recur at different
    depths.  A recorded node without children and without the complete flag
    replays as a dead end: whether a live prover would have extended it is
    not recoverable from a trace.
    """

    def __init__(self, nodes: dict[tuple[str, int], dict], root_key: tuple[str, int]):
        self._nodes = nodes
        self._root_key = root_key
        self.root_rule = nodes[root_key]["rule"]

    def expand(self, path: ProofPath) -> BackendReply:
        if not path.nodes or path.nodes[0].rule != self.root_rule:
            raise InvalidPathError("path does not start at the trace root")
        key = self._root_key
        for node in path.nodes[1:]:
            child_key = (node.id, node.step)
            if child_key not in self._nodes or child_key not in self._nodes[key]["children"]:
                raise InvalidPathError(f"path leaves the recorded trace at {node.id}@{node.step}")
            key = child_key
        record = self._nodes[key]
        if record["complete"]:
            return Complete()
        if record["children"]:
            return Children(tuple(self._nodes[c]["rule"] for c in record["children"]))
        return Dead()


def load_trace(path: str | Path) -> TraceBackend:
    """Parse a JSON-Lines trace file; malformed lines are rejected by number."""
    raw = Path(path).read_text()
    nodes: dict[tuple[str, int], dict] = {}
    defined_at: dict[tuple[str, int], int] = {}
    lineno = 0
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            raise TraceFormatError("blank line", lineno)
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(entry, dict):
            raise TraceFormatError("line is not a JSON object", lineno)
        unknown = set(entry) - _TRACE_KEYS
        if unknown:
            raise TraceFormatError(f"unknown keys {sorted(unknown)}", lineno)
        try:
            rid, step, rule, children = entry["id"], entry["step"], entry["rule"], entry["children"]
        except KeyError as exc:
            raise TraceFormatError(f"missing key {exc.args[0]}", lineno) from None
        if not isinstance(rule, str) or not rule:
            raise TraceFormatError("rule must be a non-empty string", lineno)
        if not isinstance(step, int) or step < 0:
            raise TraceFormatError("step must be a non-negative integer", lineno)
        if rid != node_id(rule):
            raise TraceFormatError(f"id {rid!r} does not match hash of rule", lineno)
        if not isinstance(children, list) or not all(isinstance(c, str) for c in children):
            raise TraceFormatError("children must be a list of id strings", lineno)
        flags = entry.get("flags", {})
        if not isinstance(flags, dict) or set(flags) - _FLAG_KEYS:
            raise TraceFormatError("flags must hold only supporting/complete", lineno)
        key = (rid, step)
        if key in nodes:
            raise TraceFormatError(f"duplicate node {rid}@{step}", lineno)
        nodes[key] = {
            "rule": rule,
            "children": tuple((c, step + 1) for c in children),
            "supporting": bool(flags.get("supporting", False)),
            "complete": bool(flags.get("complete", False)),
        }
        defined_at[key] = lineno
    if not nodes:
        raise TraceFormatError("empty trace file")

    roots = [key for key in nodes if key[1] == 0]
    if len(roots) != 1:
        raise TraceFormatError(f"expected exactly one step-0 node, found {len(roots)}")
    for key, record in nodes.items():
        for child_key in record["children"]:
            if child_key not in nodes:
                raise TraceFormatError(
                    f"child {child_key[0]}@{child_key[1]} is not defined",
                    defined_at[key],
                )
    return TraceBackend(nodes, roots[0])


def write_trace(
    backend: SyntheticBackend,
    out_path: str | Path,
    max_depth: int,
    max_nodes: int = 250_000,
) -> int:
    """Dump the synthetic tree breadth-first to ``max_depth`` as JSON Lines.

    Nodes at the depth cut are recorded childless, so a replay that reaches
    them sees a dead end.  Returns the number of nodes written.
    """
    records: dict[tuple[str, int], dict] = {}
    queue: deque[tuple[str, ...]] = deque([(backend.root_rule,)])
    while queue:
        rules = queue.popleft()
        step = len(rules) - 1
        key = (node_id(rules[-1]), step)
        if key in records:
            raise RuntimeError(f"generator produced duplicate node {key[0]}@{step}")
        reply = backend.reply_for(rules)
        children: tuple[str, ...] = ()
        if isinstance(reply, Children) and step < max_depth:
            children = reply.rules
            queue.extend(rules + (c,) for c in children)
        records[key] = {
            "id": key[0],
            "step": step,
            "rule": rules[-1],
            "children": [node_id(c) for c in children],
            "flags": {
                "supporting": backend.is_supporting(rules),
                "complete": isinstance(reply, Complete),
            },
        }
        if len(records) + len(queue) > max_nodes:
            raise RuntimeError(
                f"trace would exceed {max_nodes} nodes; lower the depth or raise max_nodes"
            )
    with open(out_path, "w") as fh:
        for record in records.values():
            fh.write(json.dumps(record) + "\n")
    return len(records)


def default_trace_depth(spec: SyntheticSpec, loop_alpha: int = 20) -> int:
    """Depth that comfortably covers everything a search of this spec visits."""
    return max(loop_alpha, spec.correct_depth + spec.decoy_delay + 3) + 4
