"""Structured text formats: JSON for systems/Riccati solutions, CSV for results.

JSON schemas (dense arrays are row-major lists):

wavelq-system-v1:   label, lambdas, B_mod{rows,cols,data}, Q_obs{rows,cols,data},
                    rho, eta (null when not planted)
wavelq-riccati-v1:  E{rows,cols,data}, horizon ("inf" for algebraic solutions),
                    residual, method

CSV files carry a header row; floats are printed with 17 significant digits so
re-runs are byte-identical.  Trajectory CSV columns: time, energy, value,
control_norm_sq, obs_norm_sq (nan where a column does not apply).  Turnpike
CSV columns: horizon, avg_tracking, avg_state_gap, bound_proxy.
"""

from __future__ import annotations

import json

import numpy as np

from .closed_loop import Trajectory
from .models import SpectralSystem
from .riccati import RiccatiSolution
from .turnpike import TurnpikeReport


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _matrix_payload(M: np.ndarray) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]),
            "data_row_major": [float(v) for v in M.ravel(order="C")]}


def _matrix_from_payload(payload: dict) -> np.ndarray:
    data = np.asarray(payload["data_row_major"], dtype=float)
    return data.reshape(int(payload["rows"]), int(payload["cols"]))


def system_to_dict(system: SpectralSystem) -> dict:
    return {
        "schema": "wavelq-system-v1",
        "label": system.label,
        "lambdas": [float(v) for v in system.lambdas],
        "B_mod": _matrix_payload(system.B_mod),
        "Q_obs": _matrix_payload(system.Q_obs),
        "rho": None if system.rho is None else float(system.rho),
        "eta": None if system.eta is None else float(system.eta),
    }


def system_from_dict(payload: dict) -> SpectralSystem:
    if payload.get("schema") != "wavelq-system-v1":
        raise ValueError("not a wavelq-system-v1 payload")
    return SpectralSystem(
        lambdas=np.asarray(payload["lambdas"], dtype=float),
        B_mod=_matrix_from_payload(payload["B_mod"]),
        Q_obs=_matrix_from_payload(payload["Q_obs"]),
        label=payload.get("label", ""),
        rho=payload.get("rho"),
        eta=payload.get("eta"),
    )


def save_system(system: SpectralSystem, path) -> None:
    with open(path, "w") as f:
        json.dump(system_to_dict(system), f, sort_keys=True)
        f.write("\n")


def load_system(path) -> SpectralSystem:
    with open(path) as f:
        return system_from_dict(json.load(f))


def riccati_to_dict(sol: RiccatiSolution) -> dict:
    return {
        "schema": "wavelq-riccati-v1",
        "E": _matrix_payload(sol.E),
        "horizon": "inf" if np.isinf(sol.horizon) else float(sol.horizon),
        "residual": float(sol.residual),
        "method": sol.method,
    }


def riccati_from_dict(payload: dict) -> RiccatiSolution:
    if payload.get("schema") != "wavelq-riccati-v1":
        raise ValueError("not a wavelq-riccati-v1 payload")
    horizon = payload["horizon"]
    return RiccatiSolution(E=_matrix_from_payload(payload["E"]),
                           horizon=np.inf if horizon == "inf" else float(horizon),
                           residual=float(payload["residual"]),
                           method=payload["method"])


def save_riccati(sol: RiccatiSolution, path) -> None:
    with open(path, "w") as f:
        json.dump(riccati_to_dict(sol), f, sort_keys=True)
        f.write("\n")


def load_riccati(path) -> RiccatiSolution:
    with open(path) as f:
        return riccati_from_dict(json.load(f))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    n = traj.n_samples
    nan = np.full(n, np.nan)
    values = traj.values if traj.values is not None else nan
    cps = traj.control_power if traj.control_power is not None else nan
    ops = traj.obs_power if traj.obs_power is not None else nan
    with open(path, "w", newline="\n") as f:
        f.write("time,energy,value,control_norm_sq,obs_norm_sq\n")
        for k in range(n):
            f.write(",".join(_fmt(v) for v in
                             (traj.times[k], traj.energies[k], values[k], cps[k], ops[k])))
            f.write("\n")


def turnpike_to_csv(report: TurnpikeReport, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("horizon,avg_tracking,avg_state_gap,bound_proxy\n")
        for k in range(report.horizons.size):
            f.write(",".join(_fmt(v) for v in
                             (report.horizons[k], report.avg_tracking[k],
                              report.avg_state_gap[k], report.bound_values[k])))
            f.write("\n")


def observability_to_csv(report, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("shell_lambda,shell_constant\n")
        for lo, c in zip(report.shell_edges, report.shell_constants):
            f.write(f"{_fmt(lo)},{_fmt(c)}\n")


def controls_to_csv(times: np.ndarray, controls: np.ndarray, path) -> None:
    controls = np.atleast_2d(controls)
    m = controls.shape[1]
    with open(path, "w", newline="\n") as f:
        f.write("time," + ",".join(f"u_{i}" for i in range(m)) + "\n")
        for k in range(times.size):
            f.write(_fmt(times[k]) + "," + ",".join(_fmt(v) for v in controls[k]) + "\n")
