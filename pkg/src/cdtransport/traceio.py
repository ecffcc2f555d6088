"""CSV serialization of simulation traces.

One header row, then for every trace sample one row per agent followed by
one payload row.  Columns:

* ``time`` (s), ``kind`` (``agent`` or ``payload``), ``agent`` (1-based; 0
  on payload rows)
* agent rows: actual state ``x y z phi theta psi u v w p q r``, the same
  twelve prefixed ``est_`` (Kalman estimate) and ``des_`` (desired), the
  applied input ``thrust tau_phi tau_theta tau_psi`` and the cable
  ``tension`` (N)
* payload rows: ``px py pz pvx pvy pvz`` and the allocator off-axis
  residual ``res_x res_y res_z`` (N)

Fields that do not apply to a row kind are left empty.  Floats use 17
significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .config import format_float
from .dynamics import STATE_NAMES
from .engine import Trace

INPUT_COLUMNS = ["thrust", "tau_phi", "tau_theta", "tau_psi"]
PAYLOAD_COLUMNS = ["px", "py", "pz", "pvx", "pvy", "pvz", "res_x", "res_y", "res_z"]
AGENT_COLUMNS = (
    list(STATE_NAMES)
    + [f"est_{s}" for s in STATE_NAMES]
    + [f"des_{s}" for s in STATE_NAMES]
    + INPUT_COLUMNS
    + ["tension"]
)
HEADER = ["time", "kind", "agent"] + AGENT_COLUMNS + PAYLOAD_COLUMNS


def trace_lines(trace: Trace):
    blank_payload = [""] * len(PAYLOAD_COLUMNS)
    blank_agent = [""] * len(AGENT_COLUMNS)
    yield ",".join(HEADER)
    agent_block = np.concatenate(
        [trace.states, trace.estimates, trace.desired, trace.inputs, trace.tensions[..., None]],
        axis=-1,
    )
    has_payload = trace.payload_position is not None
    if has_payload:
        payload_block = np.concatenate(
            [trace.payload_position, trace.payload_velocity, trace.residual], axis=-1
        )
    for k in range(len(trace)):
        t = format_float(trace.times[k])
        for i in range(trace.n_agents):
            row = [t, "agent", str(i + 1)]
            row += [format_float(x) for x in agent_block[k, i]]
            yield ",".join(row + blank_payload)
        if has_payload:
            row = [t, "payload", "0"] + blank_agent
            row += [format_float(x) for x in payload_block[k]]
            yield ",".join(row)


def write_trace(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        for line in trace_lines(trace):
            fh.write(line + "\n")


def read_trace(path) -> Trace:
    """Load a file written by :func:`write_trace`."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != HEADER:
            raise ValueError(f"{path}: unexpected trace header")
        times, agents, payload = [], {}, []
        for row in reader:
            t = float(row[0])
            if not times or times[-1] != t:
                times.append(t)
            if row[1] == "agent":
                agents.setdefault(len(times) - 1, []).append(
                    [float(x) for x in row[3:3 + len(AGENT_COLUMNS)]])
            else:
                payload.append([float(x) for x in row[3 + len(AGENT_COLUMNS):]])
    block = np.array([agents[k] for k in range(len(times))])
    p = np.array(payload) if payload else None
    return Trace(
        times=np.array(times),
        states=block[..., 0:12], estimates=block[..., 12:24], desired=block[..., 24:36],
        inputs=block[..., 36:40], tensions=block[..., 40],
        payload_position=None if p is None else p[:, 0:3],
        payload_velocity=None if p is None else p[:, 3:6],
        residual=None if p is None else p[:, 6:9],
    )
