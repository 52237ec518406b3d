"""
Parameter layout, initialization and accounting for both architectures.

``layer_specs`` walks a ``ModelConfig`` once and yields every learnable
layer in creation order; initialization, parameter counting and checkpoint
shape validation all derive from that walk.
"""

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from src.engine.ops import BatchNormState
from src.engine.rng import RngState
from src.engine.tensor import Tensor
from src.models.config_models import ModelConfig

GATE_KERNEL = 3


@dataclass(frozen=True)
class LayerSpec:
    """One learnable layer: a conv (Cout, Cin, k), a batch norm (C,) or a linear (Fout, Fin)."""
    name: str
    kind: str
    dims: Tuple[int, ...]

    @property
    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        if self.kind == "bn":
            return {f"{self.name}.gamma": self.dims, f"{self.name}.beta": self.dims}
        return {f"{self.name}.w": self.dims, f"{self.name}.b": (self.dims[0],)}

    @property
    def fan_in(self) -> int:
        return int(np.prod(self.dims[1:]))

    @property
    def count(self) -> int:
        if self.kind == "conv":
            cout, cin, k = self.dims
            return cout * cin * k + cout
        if self.kind == "linear":
            fout, fin = self.dims
            return fout * fin + fout
        return 2 * self.dims[0]


def _conv_bn(prefix: str, conv: str, bn: str, cout: int, cin: int, k: int) -> List[LayerSpec]:
    return [LayerSpec(f"{prefix}.{conv}", "conv", (cout, cin, k)), LayerSpec(f"{prefix}.{bn}", "bn", (cout,))]


def layer_specs(config: ModelConfig) -> List[LayerSpec]:
    specs: List[LayerSpec] = []
    for n in range(1, config.N + 1):
        channels = config.block_channels(n)
        specs += _conv_bn(f"block{n}", "conv1", "bn1", channels, config.block_input_channels(n), config.k)
        specs += _conv_bn(f"block{n}", "conv2", "bn2", channels, channels, config.k)
        if config.is_wadenet:
            width = channels // len(config.inception_kernels)
            for j, q in enumerate(config.inception_kernels):
                specs += _conv_bn(f"incep{n}.branch{j}", "conv", "bn", width, channels, q)
            specs += _conv_bn(f"gate{n}", "conv1", "bn1", config.g, 2, GATE_KERNEL)
            specs += _conv_bn(f"gate{n}", "conv2", "bn2", config.g, config.g, GATE_KERNEL)

    features = config.flatten_size
    for i, width in enumerate(config.fc_widths, start=1):
        specs.append(LayerSpec(f"fc{i}", "linear", (width, features)))
        features = width
    specs.append(LayerSpec("out", "linear", (config.num_classes, features)))
    return specs


def expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Parameter and running-statistic shapes keyed by tensor name."""
    shapes: Dict[str, Tuple[int, ...]] = {}
    for spec in layer_specs(config):
        shapes.update(spec.param_shapes)
        if spec.kind == "bn":
            shapes[f"{spec.name}.running_mean"] = spec.dims
            shapes[f"{spec.name}.running_var"] = spec.dims
    return dict(sorted(shapes.items()))


class ParamSet(Mapping):
    """Named parameter tensors, iterated in lexicographic name order."""

    def __init__(self, tensors: Dict[str, Tensor]):
        self._tensors = dict(sorted(tensors.items()))

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    @property
    def total_size(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def copy(self) -> "ParamSet":
        return ParamSet({name: Tensor(t.data.copy(), name) for name, t in self._tensors.items()})


def init_params(config: ModelConfig, rng: RngState) -> ParamSet:
    """
    Fan-in scaled uniform initialization.

    Conv and linear weights ~ U(-a, a) with a = sqrt(6 / fan_in), biases 0,
    batch-norm gamma 1 and beta 0. Draws follow ``layer_specs`` order.
    """
    tensors: Dict[str, Tensor] = {}
    for spec in layer_specs(config):
        if spec.kind == "bn":
            tensors[f"{spec.name}.gamma"] = Tensor(np.ones(spec.dims), f"{spec.name}.gamma")
            tensors[f"{spec.name}.beta"] = Tensor(np.zeros(spec.dims), f"{spec.name}.beta")
            continue
        bound = math.sqrt(6.0 / spec.fan_in)
        tensors[f"{spec.name}.w"] = Tensor(rng.uniform(-bound, bound, spec.dims), f"{spec.name}.w")
        tensors[f"{spec.name}.b"] = Tensor(np.zeros(spec.dims[0]), f"{spec.name}.b")
    return ParamSet(tensors)


def init_bn_states(config: ModelConfig) -> Dict[str, BatchNormState]:
    return {spec.name: BatchNormState.fresh(spec.dims[0]) for spec in layer_specs(config) if spec.kind == "bn"}


@dataclass
class ParamReport:
    """Per-layer parameter table."""
    rows: List[Tuple[str, Tuple[int, ...], int]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(count for _, _, count in self.rows)

    def to_dict(self) -> Dict:
        return {
            "layers": [{"name": name, "shape": list(shape), "count": count} for name, shape, count in self.rows],
            "total": self.total,
        }


def param_count(config: ModelConfig) -> ParamReport:
    return ParamReport([(spec.name, spec.dims, spec.count) for spec in layer_specs(config)])


@dataclass
class Network:
    """A configured architecture with its parameters and batch-norm statistics."""
    config: ModelConfig
    params: ParamSet
    bn_states: Dict[str, BatchNormState]

    @classmethod
    def create(cls, config: ModelConfig, rng: RngState) -> "Network":
        return cls(config, init_params(config, rng), init_bn_states(config))

    def buffers(self) -> Dict[str, np.ndarray]:
        out = {}
        for name, state in self.bn_states.items():
            out[f"{name}.running_mean"] = state.running_mean
            out[f"{name}.running_var"] = state.running_var
        return out

    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Every tensor a checkpoint stores, in lexicographic order."""
        arrays = {name: t.data for name, t in self.params.items()}
        arrays.update(self.buffers())
        return dict(sorted(arrays.items()))

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            tensor.data = np.array(arrays[name], dtype=np.float64)
        for name, state in self.bn_states.items():
            state.running_mean = np.asarray(arrays[f"{name}.running_mean"], dtype=np.float64).copy()
            state.running_var = np.asarray(arrays[f"{name}.running_var"], dtype=np.float64).copy()
