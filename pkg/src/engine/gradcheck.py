"""
Central finite-difference gradient checks.

Each case builds a scalar loss from a handful of float64 input tensors. The
analytic gradient comes from one taped forward/backward; the numeric one
perturbs every input element by ±step and re-runs the forward pass without a
tape. Each input tensor gets its own relative error,
``|a - n| / max(|a|, |n|, floor)``. The floor is a small fraction of the
whole case's gradient norm, so exactly-zero gradients (conv bias in front of
batch norm) are compared against rounding noise instead of zero.
Elements whose ±step perturbation crosses a ReLU kink are detected from
disagreeing one-sided differences and left out of the comparison; the count
is reported as ``skipped``.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.engine import ops
from src.engine.ops import DIFFERENTIABLE_OPS, BatchNormState, Mode
from src.engine.rng import RngState
from src.engine.tensor import Tape, Tensor, backward
from src.exceptions import ContractError
from src.logging_config import get_logger
from src.models.config_models import ModelConfig
from src.network import blocks
from src.network.architectures import forward
from src.network.params import Network
from src.wavelet import dwt_level_op

logger = get_logger(__name__)

DEFAULT_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-4
KINK_RTOL = 1e-3
KINK_ATOL = 1e-8
GRAD_FLOOR_REL = 1e-3
GRAD_FLOOR_ABS = 1e-7

LossFn = Callable[[], Tensor]
Case = Tuple[LossFn, Dict[str, Tensor]]

TOY_WADENET = ModelConfig(kind="wadenet", N=2, c=4, k=3, g=2, inception_kernels=[1, 3, 5, 7],
                          fc_widths=[8], num_classes=3, window_len=64, dropout_p=0.5)
TOY_NAIVE = ModelConfig(kind="naive", N=2, c=4, k=3, g=2, inception_kernels=[1, 3, 5, 7],
                        fc_widths=[8], num_classes=3, window_len=64, dropout_p=0.5)


@dataclass
class GradCheckResult:
    """Outcome of one case: worst relative error over its inputs."""
    name: str
    max_rel_error: float
    per_input: Dict[str, float] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tolerance

    def to_dict(self) -> Dict:
        return {"op": self.name, "max_rel_error": self.max_rel_error, "passed": self.passed,
                "skipped": self.skipped}


@dataclass
class GradCheckReport:
    results: List[GradCheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[str]:
        return [r.name for r in self.results if not r.passed]

    def names(self) -> List[str]:
        return [r.name for r in self.results]


def numerical_gradient(loss_fn: LossFn, t: Tensor, step: float = DEFAULT_STEP,
                       base: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central differences for every element of ``t``.

    Returns the gradient estimate and a mask of elements whose one-sided
    differences disagree, i.e. where the ±step perturbation straddled a ReLU kink.
    """
    if base is None:
        base = loss_fn().item()
    grad = np.zeros_like(t.data)
    kinked = np.zeros(t.shape, dtype=bool)
    it = np.nditer(t.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = t.data[idx]
        t.data[idx] = orig + step
        plus = loss_fn().item()
        t.data[idx] = orig - step
        minus = loss_fn().item()
        t.data[idx] = orig
        ahead, behind = (plus - base) / step, (base - minus) / step
        grad[idx] = (plus - minus) / (2.0 * step)
        kinked[idx] = abs(ahead - behind) > max(KINK_RTOL * max(abs(ahead), abs(behind)), KINK_ATOL)
    return grad, kinked


def analytic_gradients(loss_fn: LossFn, inputs: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    with Tape() as tape:
        for t in inputs.values():
            tape.watch(t)
        loss = loss_fn()
    backward(loss, tape, list(inputs.values()))
    return {name: t.grad.copy() for name, t in inputs.items()}


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> float:
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / denom


def check_case(name: str, loss_fn: LossFn, inputs: Dict[str, Tensor],
               step: float = DEFAULT_STEP, tolerance: float = DEFAULT_TOLERANCE) -> GradCheckResult:
    analytic = analytic_gradients(loss_fn, inputs)
    base = loss_fn().item()
    numeric = {}
    skipped = 0
    for key, t in inputs.items():
        grad, kinked = numerical_gradient(loss_fn, t, step, base)
        numeric[key] = np.where(kinked, 0.0, grad)
        analytic[key] = np.where(kinked, 0.0, analytic[key])
        skipped += int(kinked.sum())

    case_norm = max(
        np.sqrt(sum(float(np.sum(g ** 2)) for g in analytic.values())),
        np.sqrt(sum(float(np.sum(g ** 2)) for g in numeric.values())),
    )
    floor = max(GRAD_FLOOR_REL * case_norm, GRAD_FLOOR_ABS)
    per_input = {key: relative_error(analytic[key], numeric[key], floor) for key in inputs}
    result = GradCheckResult(name, max(per_input.values()), per_input, tolerance, skipped)
    logger.debug(f"gradcheck {name}: max relative error {result.max_rel_error:.3e}, {skipped} kinked elements skipped")
    return result


def _away_from_zero(x: np.ndarray, margin: float = 0.05) -> np.ndarray:
    # keeps ±step perturbations off the ReLU kink
    return np.where(np.abs(x) < margin, x + np.sign(x + 1e-300) * 2 * margin, x)


def _op_cases(rng: np.random.Generator) -> Dict[str, Case]:
    def t(*shape, name=None):
        return Tensor(rng.normal(size=shape), name)

    def readout(shape):
        return rng.normal(size=shape)

    cases: Dict[str, Case] = {}

    a, b = t(2, 3, 4), t(2, 3, 4)
    w_add = readout((2, 3, 4))
    cases["add"] = (lambda: ops.tensor_sum(ops.add(a, b), w_add), {"a": a, "b": b})

    s = t(3, 5)
    w_sum = readout((3, 5))
    cases["sum"] = (lambda: ops.tensor_sum(s, w_sum), {"x": s})

    r = Tensor(_away_from_zero(rng.normal(size=(2, 3, 6))))
    w_relu = readout((2, 3, 6))
    cases["relu"] = (lambda: ops.tensor_sum(ops.relu(r), w_relu), {"x": r})

    cx, cw, cb = t(2, 3, 10), t(4, 3, 3), t(4)
    w_conv = readout((2, 4, 5))
    cases["conv1d"] = (lambda: ops.tensor_sum(ops.conv1d(cx, cw, cb, stride=2, padding=1), w_conv),
                       {"x": cx, "w": cw, "b": cb})

    bx, gamma, beta = t(2, 3, 8), t(3), t(3)
    w_bn = readout((2, 3, 8))
    bn_state = BatchNormState.fresh(3)
    cases["batchnorm1d"] = (
        lambda: ops.tensor_sum(ops.batchnorm1d(bx, gamma, beta, bn_state, Mode.TRAIN), w_bn),
        {"x": bx, "gamma": gamma, "beta": beta},
    )

    lx, lw, lb = t(4, 8), t(5, 8), t(5)
    w_lin = readout((4, 5))
    cases["linear"] = (lambda: ops.tensor_sum(ops.linear(lx, lw, lb), w_lin), {"x": lx, "w": lw, "b": lb})

    dx = t(4, 6)
    w_drop = readout((4, 6))
    cases["dropout"] = (lambda: ops.tensor_sum(ops.dropout(dx, 0.5, RngState(11), Mode.TRAIN), w_drop),
                        {"x": dx})

    ka, kb = t(2, 2, 5), t(2, 3, 5)
    w_cat = readout((2, 5, 5))
    cases["concat_channels"] = (lambda: ops.tensor_sum(ops.concat_channels(ka, kb), w_cat), {"a": ka, "b": kb})

    rx = t(2, 3, 4)
    w_reshape = readout((6, 4))
    cases["reshape"] = (lambda: ops.tensor_sum(ops.reshape(rx, (6, 4)), w_reshape), {"x": rx})

    fx = t(2, 3, 4)
    w_flat = readout((2, 12))
    cases["flatten"] = (lambda: ops.tensor_sum(ops.flatten(fx), w_flat), {"x": fx})

    logits = t(3, 5)
    targets = rng.integers(0, 5, size=3)
    cases["softmax_cross_entropy"] = (lambda: ops.softmax_cross_entropy(logits, targets), {"logits": logits})

    wx = t(2, 1, 16)
    w_dwt = readout((2, 2, 4))
    cases["dwt_level_op"] = (lambda: ops.tensor_sum(dwt_level_op(wx, 2), w_dwt), {"x": wx})
    return cases


def _watched(net: Network, x: Tensor) -> Dict[str, Tensor]:
    inputs = {"x": x}
    inputs.update(net.params)
    return inputs


def _model_cases(rng: np.random.Generator) -> Dict[str, Case]:
    cases: Dict[str, Case] = {}
    init = RngState(int(rng.integers(0, 2 ** 31)))

    block_net = Network.create(TOY_WADENET, init.spawn(1))
    bx = Tensor(rng.normal(size=(2, 1, 16)))
    w_block = rng.normal(size=(2, 4, 8))
    block_inputs = {"x": bx}
    block_inputs.update({k: v for k, v in block_net.params.items() if k.startswith("block1.")})
    cases["conv_block"] = (
        lambda: ops.tensor_sum(blocks.conv_block_forward(bx, 1, block_net, Mode.TRAIN), w_block),
        block_inputs,
    )

    ix = Tensor(rng.normal(size=(2, 4, 8)))
    w_incep = rng.normal(size=(2, 4, 8))
    incep_inputs = {"x": ix}
    incep_inputs.update({k: v for k, v in block_net.params.items() if k.startswith("incep1.")})
    cases["inception_residual"] = (
        lambda: ops.tensor_sum(blocks.inception_residual_forward(ix, 1, block_net, Mode.TRAIN), w_incep),
        incep_inputs,
    )

    gx = Tensor(rng.normal(size=(2, 2, 8)))
    w_gate = rng.normal(size=(2, 2, 8))
    gate_inputs = {"coeffs": gx}
    gate_inputs.update({k: v for k, v in block_net.params.items() if k.startswith("gate1.")})
    cases["dwt_gate"] = (
        lambda: ops.tensor_sum(blocks.dwt_gate_forward(gx, 1, block_net, Mode.TRAIN), w_gate),
        gate_inputs,
    )

    for label, config in (("wadenet", TOY_WADENET), ("naive", TOY_NAIVE)):
        net = Network.create(config, init.spawn(2 if label == "wadenet" else 3))
        x = Tensor(rng.normal(size=(2, 1, config.window_len)))
        targets = rng.integers(0, config.num_classes, size=2)

        def loss_fn(net=net, x=x, targets=targets):
            logits = forward(net, x, Mode.TRAIN, RngState(5))
            return ops.softmax_cross_entropy(logits, targets)

        cases[label] = (loss_fn, _watched(net, x))
    return cases


def run_gradcheck(seed: int = 0, step: float = DEFAULT_STEP, tolerance: float = DEFAULT_TOLERANCE,
                  include_models: bool = True, only: Optional[List[str]] = None) -> GradCheckReport:
    """
    Check every registered differentiable op, then the block and end-to-end cases.

    Raises:
        ContractError: a registered op has no gradient case
    """
    rng = np.random.default_rng(seed)
    cases = _op_cases(rng)
    missing = sorted(set(DIFFERENTIABLE_OPS) - set(cases))
    if missing:
        raise ContractError(f"no gradient case for registered op(s): {', '.join(missing)}",
                            {"missing": missing})
    ordered = [(name, cases[name]) for name in DIFFERENTIABLE_OPS]
    if include_models:
        ordered += list(_model_cases(rng).items())

    report = GradCheckReport()
    for name, (loss_fn, inputs) in ordered:
        if only is not None and name not in only:
            continue
        result = check_case(name, loss_fn, inputs, step, tolerance)
        if not result.passed:
            logger.error(f"gradient check failed for {name}: max relative error {result.max_rel_error:.3e}")
        report.results.append(result)
    return report
