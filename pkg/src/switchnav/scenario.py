"""Scenario files: parsing, assumption checks and gain/certificate synthesis.

A scenario is a single JSON document.  Matrices are row-major nested lists
and each task's network is an adjacency list keyed by sensor id.  See the
README for the full schema.
"""

import copy
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import certify
from .controller import CONSECUTIVE, DWELL_MODES
from .errors import AssumptionViolated, NotConnected, NotObservable, ParseError, PlacementFailed
from .matops import (
    is_detectable,
    is_schur,
    is_stabilizable,
    place_observer_gain,
    place_state_gain,
    spectral_norm,
)
from .network import SensorGraph, adjacency_from_lists
from .plant import (
    SensorSpec,
    SystemModel,
    TaskSpec,
    import_trajectory_csv,
    norm_bound,
    synthesize_reference,
)

log = logging.getLogger(__name__)

BUILTIN = {
    "default": "default_scenario.json",
    "demo": "certified_demo.json",
}


def builtin_path(name):
    return resources.files("switchnav") / "data" / BUILTIN[name]


def load_document(path):
    """Read a scenario JSON document; ``path`` may also name a built-in scenario."""
    if str(path) in BUILTIN:
        text = builtin_path(str(path)).read_text()
        base = None
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read scenario {path}: {exc}") from exc
        base = Path(path).parent
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    if base is not None:
        doc.setdefault("_base_dir", str(base))
    return doc


@dataclass
class Scenario:
    name: str
    model: SystemModel
    K: np.ndarray
    sensors: dict
    tasks: list
    initial_state: np.ndarray
    initial_reference: np.ndarray
    process_halfwidth: float
    measurement_halfwidth: float
    initial_error_halfwidth: float
    dwell_mode: str = CONSECUTIVE
    bound_form: str = certify.PROOF
    feasibility_form: str = certify.VERBATIM
    max_ticks: int = 3000
    task_certs: list = field(default_factory=list)
    track_cert: certify.TrackingCertificate = None
    doc: dict = field(default_factory=dict, repr=False)

    @property
    def sensor_ids(self):
        return sorted(self.sensors)

    @property
    def BK_norm(self):
        return spectral_norm(self.model.B @ self.K)

    def gains(self, task):
        return [self.sensors[s].gain_per_task[task.index] for s in task.graph.vertices]

    def C_list(self, task):
        return [self.sensors[s].C for s in task.graph.vertices]

    def new_tracker(self):
        return certify.BoundTracker(self.task_certs, self.track_cert, self.model.q_x,
                                    self.model.q_r, self.BK_norm, self.model.q_w)


def _mat(doc, key, where):
    try:
        return np.array(doc[key], dtype=float)
    except KeyError as exc:
        raise ParseError(f"missing field {key!r} in {where}") from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {key!r} in {where} is not numeric") from exc


def build_scenario(doc, **overrides):
    """Validate a scenario document and synthesise gains, references and certificates.

    ``overrides`` replace top-level keys; ``rounds`` may be an int or
    ``"certified"`` and is applied to every task.
    """
    doc = copy.deepcopy(doc)
    rounds_override = overrides.pop("rounds", None)
    doc.update({k: v for k, v in overrides.items() if v is not None})

    A = _mat(doc, "A", "scenario")
    B = _mat(doc, "B", "scenario")
    n = A.shape[0]
    hw_w = float(doc.get("process_halfwidth", 0.0))
    hw_v = float(doc.get("measurement_halfwidth", 0.0))
    hw_x = float(doc.get("initial_error_halfwidth", 0.0))
    try:
        sensors = {int(s["id"]): SensorSpec(int(s["id"]), np.array(s["C"], dtype=float).reshape(-1, n))
                   for s in doc["sensors"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad sensor list: {exc}") from exc
    m_max = max(s.m for s in sensors.values())

    x1 = _mat(doc, "initial_state", "scenario")
    r1 = np.array(doc.get("initial_reference", x1), dtype=float)
    model = SystemModel(A, B, q_w=norm_bound(hw_w, n), q_v=norm_bound(hw_v, m_max),
                        q_x=norm_bound(hw_x, n))

    if not is_stabilizable(A, B):
        raise AssumptionViolated("stabilizability")
    if "control_gain" in doc:
        K = np.array(doc["control_gain"], dtype=float).reshape(B.shape[1], n)
    else:
        try:
            K = place_state_gain(A, B, doc["control_poles"])
        except KeyError as exc:
            raise ParseError("need control_poles or control_gain") from exc
    if not is_schur(A + B @ K):
        raise AssumptionViolated("stabilizability", "A + BK is not Schur stable")

    base_dir = Path(doc.get("_base_dir", "."))
    tasks = []
    certified_rounds = []
    for idx, td in enumerate(doc.get("tasks", []), start=1):
        where = f"task {idx}"
        vertices = [int(v) for v in td["vertices"]]
        unknown = set(vertices) - set(sensors)
        if unknown:
            raise ParseError(f"{where}: unknown sensors {sorted(unknown)}")
        rounds = td.get("rounds", 1) if rounds_override is None else rounds_override
        try:
            adj = adjacency_from_lists(vertices, td["adjacency"])
            graph = SensorGraph(vertices, adj, alpha=td.get("alpha"),
                                rounds=1 if rounds == "certified" else rounds)
        except NotConnected as exc:
            raise AssumptionViolated("connectivity", where) from exc
        certified_rounds.append(rounds == "certified")

        C_stack = np.vstack([sensors[s].C for s in graph.vertices])
        if not is_detectable(A, C_stack):
            raise AssumptionViolated("collective detectability", where)
        if "gains" in td:
            gains = [np.array(td["gains"][str(s)], dtype=float).reshape(n, -1) for s in graph.vertices]
        else:
            try:
                G_stack = place_observer_gain(A, C_stack, td["observer_poles"])
            except (NotObservable, PlacementFailed) as exc:
                raise AssumptionViolated("collective detectability", f"{where}: {exc}") from exc
            gains = certify.split_observer_gain(G_stack, [sensors[s].C for s in graph.vertices], graph.size)
        for s, G in zip(graph.vertices, gains):
            sensors[s].gain_per_task[idx] = G

        D = _mat(td, "D", where)
        c = _mat(td, "center", where)
        if "trajectory_csv" in td:
            traj = import_trajectory_csv(base_dir / td["trajectory_csv"], model)
        else:
            start = r1 if idx == 1 else tasks[-1].trajectory.states[-1]
            traj = synthesize_reference(start, c, D, td["length"], model)
        tasks.append(TaskSpec(idx, D, c, float(td["radius"]), int(td.get("dwell", 1)), traj, graph,
                              int(td["designated"]), tuple(td.get("observer_poles", ()))))
    if not tasks:
        raise ParseError("scenario has no tasks")

    # initial tracking gap against the first sample the controller will use
    gap = float(np.linalg.norm(x1 - tasks[0].trajectory.states[0]))
    q_r = doc.get("q_r")
    model.q_r = gap if q_r is None else float(q_r)
    if gap > model.q_r + 1e-12:
        raise AssumptionViolated("initial conditions", f"|x(1) - r(1)| = {gap:.4g} > q_r = {model.q_r}")

    dwell_mode = doc.get("dwell_mode", CONSECUTIVE)
    if dwell_mode not in DWELL_MODES:
        raise ParseError(f"unknown dwell_mode {dwell_mode!r}")
    bound_form = doc.get("bound_form", certify.PROOF)
    if bound_form not in (certify.PROOF, certify.VERBATIM):
        raise ParseError(f"unknown bound_form {bound_form!r}")
    feas_form = doc.get("feasibility_form", certify.VERBATIM)
    if feas_form not in (certify.VERBATIM, certify.CORRECTED):
        raise ParseError(f"unknown feasibility_form {feas_form!r}")

    sc = Scenario(
        name=doc.get("name", "scenario"), model=model, K=K, sensors=sensors, tasks=tasks,
        initial_state=x1, initial_reference=r1, process_halfwidth=hw_w,
        measurement_halfwidth=hw_v, initial_error_halfwidth=hw_x, dwell_mode=dwell_mode,
        bound_form=bound_form, feasibility_form=feas_form,
        max_ticks=int(doc.get("max_ticks", 3000)), doc=doc,
    )
    sc.track_cert = certify.build_tracking_certificate(model, K, bound_form)
    for task, want_certified in zip(tasks, certified_rounds):
        cert = certify.build_task_certificate(model, K, task.graph, sc.gains(task), sc.C_list(task))
        if want_certified:
            task.graph = task.graph.with_rounds(cert.min_L)
            cert = certify.build_task_certificate(model, K, task.graph, sc.gains(task), sc.C_list(task))
        if not cert.rounds_ok:
            log.warning("task %d: %d consensus rounds is below the certified minimum %d",
                        task.index, task.graph.rounds, cert.min_L)
        sc.task_certs.append(cert)
    return sc


def load_scenario(path, **overrides):
    return build_scenario(load_document(path), **overrides)
