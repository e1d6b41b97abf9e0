import numpy as np

from wavelq.closed_loop import simulate_collocated, smooth_initial_state
from wavelq.models import build_interval_wave, build_synthetic
from wavelq.riccati import solve_are
from wavelq.serialize import (
    load_riccati,
    load_system,
    save_riccati,
    save_system,
    trajectory_to_csv,
    turnpike_to_csv,
)


def test_system_round_trip(tmp_path):
    sys_ = build_interval_wave(5, control=("subinterval", 0.4, 2.0))
    path = tmp_path / "system.json"
    save_system(sys_, path)
    back = load_system(path)
    assert np.array_equal(back.lambdas, sys_.lambdas)
    assert np.array_equal(back.B_mod, sys_.B_mod)
    assert np.array_equal(back.Q_obs, sys_.Q_obs)
    assert back.label == sys_.label
    assert back.rho is None and back.eta is None


def test_synthetic_round_trip_keeps_exponents(tmp_path):
    sys_ = build_synthetic(2.0, 4.0, 6)
    path = tmp_path / "system.json"
    save_system(sys_, path)
    back = load_system(path)
    assert back.rho == 2.0 and back.eta == 4.0


def test_riccati_round_trip(tmp_path):
    sys_ = build_synthetic(2.0, 2.0, 4)
    sol = solve_are(sys_)
    path = tmp_path / "riccati.json"
    save_riccati(sol, path)
    back = load_riccati(path)
    assert np.array_equal(back.E, sol.E)
    assert np.isinf(back.horizon)
    assert back.method == sol.method


def test_trajectory_csv_schema(tmp_path):
    sys_ = build_synthetic(2.0, 2.0, 4)
    x0 = smooth_initial_state(sys_.lambdas, 1.5, rng=np.random.default_rng(0))
    traj = simulate_collocated(sys_, x0, 3.0)
    path = tmp_path / "trajectory.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "time,energy,value,control_norm_sq,obs_norm_sq"
    assert len(lines) == traj.n_samples + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == traj.energies[0]


def test_turnpike_csv_schema(tmp_path):
    from wavelq.turnpike import TurnpikeReport
    rep = TurnpikeReport(horizons=np.array([1.0, 2.0]),
                         avg_tracking=np.array([0.5, 0.25]),
                         avg_state_gap=np.array([0.1, 0.05]),
                         bound_values=np.array([1.0, 0.6]),
                         k_used=1.0, ktilde_used=1.0)
    path = tmp_path / "turnpike.csv"
    turnpike_to_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "horizon,avg_tracking,avg_state_gap,bound_proxy"
    assert len(lines) == 3


def test_float_precision_survives_round_trip(tmp_path):
    sys_ = build_synthetic(2.0, 2.0, 3)
    sol = solve_are(sys_)
    path = tmp_path / "r.json"
    save_riccati(sol, path)
    assert np.array_equal(load_riccati(path).E, sol.E)  # bit-exact via 17 digits
