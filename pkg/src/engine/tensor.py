"""
Dense float64 tensors and the reverse-mode gradient tape.

A ``Tape`` records one node per operation in creation order, so creation
order is already a topological order. ``backward`` sweeps the nodes once in
reverse and accumulates gradients with ``+=`` at fan-out. Tapes are rebuilt
every training step and are confined to the thread that created them.
"""

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import ContractError

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_local = threading.local()


class Tensor:
    """Contiguous row-major float64 array with an optional gradient buffer."""

    def __init__(self, data, name: Optional[str] = None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.node_id: Optional[int] = None
        self._tape: Optional["Tape"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


@dataclass
class TapeNode:
    """One recorded operation; leaves carry their tensor and no backward."""
    op: str
    inputs: Tuple[int, ...]
    backward: Optional[BackwardFn]
    shape: Tuple[int, ...]
    leaf: Optional[Tensor] = None


class Tape:
    """Ordered record of operations, usable as a context manager.

    Operations executed inside ``with tape:`` are recorded on it. Outside any
    tape, operations run forward only.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def owns(self, tensor: Tensor) -> bool:
        return tensor._tape is self and tensor.node_id is not None

    def watch(self, tensor: Tensor) -> int:
        """Register ``tensor`` as a leaf unless it is already on this tape."""
        if self.owns(tensor):
            return tensor.node_id
        node_id = len(self.nodes)
        self.nodes.append(TapeNode("leaf", (), None, tensor.shape, leaf=tensor))
        tensor.node_id = node_id
        tensor._tape = self
        return node_id

    def record(self, op: str, inputs: Sequence[Tensor], out: Tensor, backward: BackwardFn) -> Tensor:
        input_ids = tuple(self.watch(t) for t in inputs)
        out.node_id = len(self.nodes)
        out._tape = self
        self.nodes.append(TapeNode(op, input_ids, backward, out.shape))
        return out

    def ops(self) -> List[str]:
        return [node.op for node in self.nodes if node.leaf is None]


def active_tape() -> Optional[Tape]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def backward(loss: Tensor, tape: Tape, params: Optional[Iterable[Tensor]] = None) -> None:
    """
    Populate ``.grad`` on every leaf of ``tape`` from the scalar ``loss``.

    Args:
        loss: Single-element tensor produced on ``tape``
        tape: Tape the forward pass was recorded on
        params: Tensors that must end up with a gradient; those not on any
            path to ``loss`` receive zeros
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.owns(loss):
        raise ContractError("loss was not produced on this tape")

    grads: List[Optional[np.ndarray]] = [None] * len(tape.nodes)
    grads[loss.node_id] = np.ones_like(loss.data)

    for node_id in range(loss.node_id, -1, -1):
        node = tape.nodes[node_id]
        g = grads[node_id]
        if node.leaf is not None:
            node.leaf.grad = g if g is not None else np.zeros(node.shape)
            continue
        if g is None:
            continue
        for input_id, input_grad in zip(node.inputs, node.backward(g)):
            if input_grad is None:
                continue
            if grads[input_id] is None:
                grads[input_id] = np.array(input_grad, dtype=np.float64)
            else:
                grads[input_id] += input_grad

    # leaves recorded after the loss never reach it
    for node in tape.nodes[loss.node_id + 1:]:
        if node.leaf is not None:
            node.leaf.grad = np.zeros(node.shape)

    if params is not None:
        for p in params:
            if not tape.owns(p):
                p.grad = np.zeros_like(p.data)
