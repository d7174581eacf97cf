"""Binary decision tree over a fixed-width binary feature vector.

The tree classifies 15 binary features into one of six class labels by
walking from the root: feature value 0 descends left, 1 descends right.
The walk is total: every one of the 2^15 inputs reaches a leaf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

FEATURE_COUNT = 15
LABEL_RANGE = range(1, 7)
MAX_DEPTH = 15


class BadArity(ValueError):
    """Feature vector length differs from the tree's feature count."""


class BadValue(ValueError):
    """Feature entry outside {0, 1}."""


class TreeStructureError(ValueError):
    """The node array does not describe a valid tree."""


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature_index/left/right set) or leaf (class_label set)."""

    feature_index: int | None = None
    left: int | None = None
    right: int | None = None
    class_label: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.class_label is not None


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]
    root: int = 0

    @classmethod
    def from_node_dicts(cls, raw_nodes: Sequence[dict], root: int = 0) -> "DecisionTree":
        nodes = []
        for i, raw in enumerate(raw_nodes):
            if "class_label" in raw:
                nodes.append(TreeNode(class_label=int(raw["class_label"])))
            elif {"feature_index", "left", "right"} <= raw.keys():
                nodes.append(
                    TreeNode(
                        feature_index=int(raw["feature_index"]),
                        left=int(raw["left"]),
                        right=int(raw["right"]),
                    )
                )
            else:
                raise TreeStructureError(f"node {i} is neither an internal node nor a leaf")
        tree = cls(nodes=tuple(nodes), root=root)
        tree.validate()
        return tree

    def to_node_dicts(self) -> list[dict]:
        out = []
        for node in self.nodes:
            if node.is_leaf:
                out.append({"class_label": node.class_label})
            else:
                out.append({"feature_index": node.feature_index, "left": node.left, "right": node.right})
        return out

    def validate(self) -> None:
        """Reject cyclic, over-deep, mislabeled or out-of-range structures."""
        if not self.nodes:
            raise TreeStructureError("empty node array")
        if not 0 <= self.root < len(self.nodes):
            raise TreeStructureError(f"root index {self.root} out of range")

        def walk(index: int, depth: int, on_path: frozenset[int]) -> None:
            if index in on_path:
                raise TreeStructureError(f"cycle through node {index}")
            if depth > MAX_DEPTH:
                raise TreeStructureError(f"path depth exceeds {MAX_DEPTH}")
            node = self.nodes[index]
            if node.is_leaf:
                if node.class_label not in LABEL_RANGE:
                    raise TreeStructureError(f"leaf {index} label {node.class_label} outside 1..6")
                return
            if node.feature_index is None or not 0 <= node.feature_index < FEATURE_COUNT:
                raise TreeStructureError(f"node {index} feature index {node.feature_index} outside 0..14")
            for child in (node.left, node.right):
                if child is None or not 0 <= child < len(self.nodes):
                    raise TreeStructureError(f"node {index} child {child} out of range")
            walk(node.left, depth + 1, on_path | {index})
            walk(node.right, depth + 1, on_path | {index})

        walk(self.root, 1, frozenset())


def decision_tree_classify(tree: DecisionTree, features: Sequence[int]) -> int:
    """Walk the tree over a 15-element binary vector and return the leaf label."""
    if len(features) != FEATURE_COUNT:
        raise BadArity(f"expected {FEATURE_COUNT} features, got {len(features)}")
    for i, value in enumerate(features):
        if isinstance(value, bool):
            continue
        if value not in (0, 1):
            raise BadValue(f"feature {i} is {value!r}, expected 0 or 1")
    index = tree.root
    while True:
        node = tree.nodes[index]
        if node.is_leaf:
            return node.class_label  # type: ignore[return-value]
        index = node.right if features[node.feature_index] else node.left  # type: ignore[index]
