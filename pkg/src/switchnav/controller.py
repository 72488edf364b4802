"""Robot-side event-triggered task-switching controller."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoEstimateReceived, TaskNotAccomplished
from .estimator import SwitchMessage

CUMULATIVE = "cumulative"
CONSECUTIVE = "consecutive"
DWELL_MODES = (CUMULATIVE, CONSECUTIVE)


@dataclass
class ControllerState:
    task: int = 1
    hits: list = field(default_factory=list)
    accomplished: dict = field(default_factory=dict)
    switch_times: dict = field(default_factory=lambda: {0: 1})
    latest_estimate: np.ndarray = None


def control_input(xhat_s, r, u_r, K):
    if xhat_s is None:
        raise NoEstimateReceived("no estimate from the designated sensor this tick")
    return K @ (np.asarray(xhat_s) - np.asarray(r)) + np.asarray(u_r)


def event_value(xhat_s, r, task, h_e, h_c):
    """Certificate f(t); f <= R guarantees the true state is in the target ball."""
    g_e = np.linalg.norm(task.D @ xhat_s - task.c)
    g_c = np.linalg.norm(task.D @ r - task.c)
    return float(min(h_e + g_e, h_c + g_c))


def dwell_update(ctrl, t, f, task, mode=CONSECUTIVE):
    """Record a dwell hit at time t; mark the task done when the count reaches the dwell time."""
    if mode not in DWELL_MODES:
        raise ValueError(f"unknown dwell mode {mode!r}")
    if ctrl.accomplished.get(ctrl.task):
        raise TaskNotAccomplished("task already accomplished")  # misuse guard
    if f <= task.R:
        ctrl.hits.append(t)
    elif mode == CONSECUTIVE:
        ctrl.hits.clear()
    if len(ctrl.hits) == task.dwell:
        ctrl.accomplished[ctrl.task] = True
        ctrl.switch_times[ctrl.task] = t
    return ctrl


def make_switch_message(ctrl, current_task, next_task):
    """Message for the next task and the set of sensors it is sent to."""
    if not ctrl.accomplished.get(ctrl.task):
        raise TaskNotAccomplished(f"task {ctrl.task} is not accomplished")
    msg = SwitchMessage(task=ctrl.task + 1, handoff=np.array(ctrl.latest_estimate, dtype=float),
                        designated=next_task.designated_sensor)
    recipients = sorted(set(current_task.graph.vertices) | set(next_task.graph.vertices))
    return msg, recipients


def advance(ctrl):
    """Move the controller to the next task after the switch message went out."""
    ctrl.task += 1
    ctrl.hits = []
    return ctrl
