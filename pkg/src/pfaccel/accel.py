"""Post-processing accelerators for the staggered fixed-point map.

Nothing in here touches assembly or the subproblem solvers: Anderson
acceleration only recombines previous outputs of the map, relaxation only
rescales increments, and the controller only reads residual norms.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .linalg import solve_dense_lstsq

__all__ = [
    "AndersonState",
    "ControllerState",
    "Decision",
    "Mode",
    "Action",
    "AccelController",
    "anderson_update",
    "relax_increment",
    "controller_decide",
    "controller_restart",
]


class Mode(str, enum.Enum):
    """Acceleration strategy for a whole run."""

    PLAIN = "plain"
    ANDERSON = "anderson"
    RELAX = "relax"
    COMBINED = "combined"

    @classmethod
    def _missing_(cls, value):
        # long spellings such as "AndersonOnly" or "RelaxOnly", any case
        if isinstance(value, str):
            key = value.lower().removesuffix("only")
            for member in cls:
                if member.value == key:
                    return member
        return None


class Action(str, enum.Enum):
    """What was applied in one iteration."""

    PLAIN = "Plain"
    AA = "AA"
    OR = "OR"


class Decision(str, enum.Enum):
    USE_ANDERSON = "UseAnderson"
    USE_RELAXATION = "UseRelaxation"
    RESTART_ANDERSON = "RestartAndersonThenUse"


class AndersonState:
    """Sliding window of the last ``depth + 1`` map outputs and increments."""

    def __init__(self, depth: int):
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.depth = depth
        self.outputs: deque = deque(maxlen=depth + 1)
        self.increments: deque = deque(maxlen=depth + 1)
        self.last_alpha = np.ones(1)

    def __len__(self) -> int:
        return len(self.outputs)

    def clear(self) -> None:
        self.outputs.clear()
        self.increments.clear()


def anderson_update(astate: AndersonState, new_output, new_increment) -> np.ndarray:
    """One Anderson step.

    The affinely constrained problem ``min ||F alpha||, sum(alpha) = 1`` is
    solved in difference form: with ``f_k`` the stored increments (oldest
    first) and ``D_j = f_{j+1} - f_j``, minimise ``||f_last - D gamma||`` and
    recover ``alpha_k = [k == last] + gamma_k - gamma_{k-1}`` (``gamma_{-1}``
    and ``gamma_last`` are zero). Nearly collinear difference columns are
    dropped by :func:`solve_dense_lstsq`.

    The coefficients are kept in ``astate.last_alpha``. With an effective
    depth of zero the new output is returned as is.
    """
    astate.outputs.append(np.asarray(new_output, dtype=float))
    astate.increments.append(np.asarray(new_increment, dtype=float))
    m_i = len(astate.outputs) - 1
    if m_i == 0:
        astate.last_alpha = np.ones(1)
        return astate.outputs[-1]
    F = np.column_stack(astate.increments)
    D = np.diff(F, axis=1)
    # newest differences first so that collinearity drops the stalest ones
    gamma_rev, kept = solve_dense_lstsq(D[:, ::-1], F[:, -1])
    if not kept.any():
        astate.last_alpha = np.eye(m_i + 1)[-1]
        return astate.outputs[-1]
    gamma = gamma_rev[::-1]
    padded = np.concatenate([[0.0], gamma, [0.0]])
    alpha = np.diff(padded)
    alpha[-1] += 1.0
    astate.last_alpha = alpha
    S = np.column_stack(astate.outputs)
    return S @ alpha


def relax_increment(x_prev, x_hat, omega: float):
    """``x_prev + omega (x_hat - x_prev)``; ``omega == 1`` returns ``x_hat`` itself."""
    if not 0.0 < omega < 2.0:
        raise ValueError("omega must lie in (0, 2)")
    if omega == 1.0:
        return x_hat
    return x_prev + omega * (x_hat - x_prev)


@dataclass
class ControllerState:
    """Residual-driven switch between Anderson acceleration and relaxation.

    ``residual_history`` holds the residual norm of every completed iteration
    of the current loading step.
    """

    n_switch: int = 5
    relaxing: bool = False
    residual_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_switch < 1:
            raise ValueError("n_switch must be >= 1")


def controller_decide(cstate: ControllerState) -> Decision:
    """Choose the post-processing of the next iteration.

    All tests look at completed iterations only. Anderson stays active while
    the latest residual does not exceed the one before it; one increase
    switches to relaxation. Relaxation stays until the last ``n_switch + 1``
    residuals are non-increasing, after which Anderson restarts.
    """
    h = cstate.residual_history
    if not cstate.relaxing:
        if len(h) < 2 or h[-1] <= h[-2]:
            return Decision.USE_ANDERSON
        cstate.relaxing = True
        return Decision.USE_RELAXATION
    window = h[-(cstate.n_switch + 1):]
    if len(window) == cstate.n_switch + 1 and all(b <= a for a, b in zip(window, window[1:])):
        cstate.relaxing = False
        return Decision.RESTART_ANDERSON
    return Decision.USE_RELAXATION


def controller_restart(astate: AndersonState) -> AndersonState:
    """Forget all stored increments; the next update acts like a first iteration."""
    astate.clear()
    return astate


class AccelController:
    """Drives one of the four strategies over the iterations of a loading step.

    Parameters
    ----------
    mode : Mode or str
        ``plain``, ``anderson``, ``relax`` or ``combined``.
    depth, omega, n_switch
        Anderson depth, relaxation factor and the number of non-increasing
        residuals required to leave relaxation.
    """

    def __init__(self, mode="combined", depth: int = 1, omega: float = 1.6, n_switch: int = 5):
        self.mode = Mode(mode)
        self.omega = omega
        self.anderson = AndersonState(depth)
        self.control = ControllerState(n_switch)
        self.restarts = 0

    def begin_step(self) -> None:
        self.anderson.clear()
        self.control = ControllerState(self.control.n_switch)

    def next_action(self) -> Action:
        if self.mode is Mode.PLAIN:
            return Action.PLAIN
        if self.mode is Mode.ANDERSON:
            return Action.AA
        if self.mode is Mode.RELAX:
            return Action.OR
        decision = controller_decide(self.control)
        if decision is Decision.USE_RELAXATION:
            return Action.OR
        if decision is Decision.RESTART_ANDERSON:
            controller_restart(self.anderson)
            self.restarts += 1
        return Action.AA

    def accelerate(self, output, increment) -> np.ndarray:
        return anderson_update(self.anderson, output, increment)

    def record_residual(self, res: float) -> None:
        self.control.residual_history.append(float(res))
