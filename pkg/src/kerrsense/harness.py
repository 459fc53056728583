"""Named experiments, dimension policy, and structured result output.

Each runner sweeps a parameter grid from an ExperimentConfig, evaluates the
squeezing and sensitivity figures per grid point, and returns a SweepResult
whose rows serialize to a fixed CSV schema (or the JSON mirror of it).  All
computations are deterministic: identical configs produce byte-identical
files.

Dimension policy: with dim=None the Fock dimension is doubled until every
reported figure is stable to AUTO_DIM_RTOL.  Pure-state rows converge
individually (eigendecompositions are cached per Hamiltonian); dissipative
sweeps converge once per parameter group at the largest Kt, where the state
support is widest, and reuse that dimension for the whole group.

Time convention: the ``kt`` grid value means K*t when kerr > 0 and the bare
evolution time when kerr = 0, so ideal-squeezing reference rows remain
expressible.
"""

from __future__ import annotations

import cmath
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, fock, metrology
from .config import ConfigError, ExperimentConfig
from .dynamics import HamiltonianParams, LossParams, NoInteriorMinimumError
from .fock import QuantumState
from .metrology import DetectionNoise
from .wigner import DEFAULT_GRID, PhaseGrid, wigner

__all__ = [
    "AUTO_DIM_RTOL",
    "CSV_COLUMNS",
    "ScalingFit",
    "ScalingFitError",
    "SensitivityOrderingError",
    "SweepResult",
    "SweepRow",
    "WignerSnapshot",
    "emit",
    "evaluate_point",
    "rows_to_csv",
    "run_custom",
    "run_experiment",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "run_loss_robustness",
    "run_scaling",
    "run_wigner",
]

CSV_COLUMNS = [
    "delta",
    "epsilon",
    "kerr",
    "gamma",
    "kt",
    "dim",
    "N",
    "v_min",
    "chi2inv_1",
    "chi2inv_2",
    "chi2inv_3",
    "f_q",
    "chi2inv_mai",
    "status",
]

# Accepting a row requires a dim doubling to move every figure by less than
# this; well inside the 1e-5 the results are documented to hold at.
AUTO_DIM_RTOL = 1e-7

FIG1_TRACE_EPSILON = 2.0  # the V_min(t) traces fix epsilon and sweep kerr
FIG1_OPTIMA_KERR = 1.0  # the optimal-squeezing table is quoted per unit K
FIG2_BOUNDARY = 0.05

SNAPSHOT_KT = 0.4
SNAPSHOT_GAMMA = 0.1  # gamma/K for the phase-space snapshot family
SNAPSHOT_DISPLACEMENT = 1.0  # quadrature displacement, chosen to be visible

# The displaced/reversed snapshot states carry ~1e-4 Wigner weight at |x| = 5,
# so the snapshot grid is wider than the general-purpose default.
SNAPSHOT_GRID = PhaseGrid(x_range=(-6.0, 6.0), p_range=(-6.0, 6.0), nx=201, np=201)

SQL = metrology.STANDARD_QUANTUM_LIMIT


class ScalingFitError(RuntimeError):
    """The F_Q(N) series cannot support the requested slope fit."""


class SensitivityOrderingError(RuntimeError):
    """A lossless sweep violated chi^-2 <= chi^-2_MAI <= F_Q."""


# ---------------------------------------------------------------------------
# result containers


@dataclass
class SweepRow:
    """One grid point; None means the column was not computed."""

    delta: float
    epsilon: float
    kerr: float
    gamma: float
    kt: float
    dim: int | None = None
    n_mean: float | None = None
    v_min: float | None = None
    chi2inv_1: float | None = None
    chi2inv_2: float | None = None
    chi2inv_3: float | None = None
    f_q: float | None = None
    chi2inv_mai: float | None = None
    status: str = "ok"
    # Derived quantities kept in memory only (not part of the CSV schema).
    sigma2: float = 0.0
    t_opt: float | None = None
    gap: float | None = None
    sql: float = SQL

    def column_values(self) -> list:
        return [
            self.delta,
            self.epsilon,
            self.kerr,
            self.gamma,
            self.kt,
            self.dim,
            self.n_mean,
            self.v_min,
            self.chi2inv_1,
            self.chi2inv_2,
            self.chi2inv_3,
            self.f_q,
            self.chi2inv_mai,
            self.status,
        ]


@dataclass
class ScalingFit:
    """Slope of F_Q = a N + 4 over the tail of the pre-maximum series."""

    epsilon_over_k: float
    a: float
    fit_window: float = 0.2
    points: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class WignerSnapshot:
    name: str
    x_grid: np.ndarray
    p_grid: np.ndarray
    w: np.ndarray
    phi_opt: float
    theta_opt: float


@dataclass
class SweepResult:
    experiment: str
    rows: list[SweepRow]
    optima: list[SweepRow] | None = None
    fits: list[ScalingFit] | None = None
    snapshots: list[WignerSnapshot] | None = None


# ---------------------------------------------------------------------------
# per-point evaluation and dimension policy


def _time_of(kerr: float, kt: float) -> float:
    return kt / kerr if kerr > 0.0 else kt


def _initial_dim(delta: float, epsilon: float, kerr: float, t: float) -> int:
    """Starting Fock dimension for the doubling search."""
    if kerr > 0.0:
        # Kerr confinement bounds <n> near (|delta| + 2 epsilon)/kerr.
        guess = 32.0 + 4.0 * (abs(delta) + 2.0 * epsilon) / kerr
    else:
        # Free squeezing: <n> = sinh^2(2 epsilon t).
        r = 2.0 * abs(epsilon) * t
        guess = 32.0 + 8.0 * math.sinh(min(r, 4.0)) ** 2
    return int(min(max(32, 16 * math.ceil(guess / 16.0)), 2048))


def _point_row(
    delta: float,
    epsilon: float,
    kerr: float,
    gamma: float,
    kt: float,
    sigma2: float,
    dim: int,
    with_linear: bool = True,
    with_k2: bool = False,
    with_k3: bool = False,
    with_qfi: bool = True,
    with_mai: bool = True,
    evolve_method: str = "expm",
) -> SweepRow:
    p = HamiltonianParams(delta=delta, epsilon=epsilon, kerr=kerr)
    t = _time_of(kerr, kt)
    vacuum = QuantumState.vacuum(dim)
    if gamma == 0.0:
        state = dynamics.evolve_unitary(vacuum, p, t)
    else:
        state = dynamics.evolve_lindblad(
            vacuum, p, LossParams(gamma), t, method=evolve_method
        )
    _, _, n_mean = fock.ladder_moments(state)
    v_min, _ = dynamics.min_variance(state)
    row = SweepRow(
        delta=delta,
        epsilon=epsilon,
        kerr=kerr,
        gamma=gamma,
        kt=kt,
        dim=dim,
        n_mean=float(n_mean),
        v_min=v_min,
        sigma2=sigma2,
    )
    noise = DetectionNoise(sigma2)
    if with_linear:
        row.chi2inv_1 = metrology.noisy_linear_sensitivity(state, noise).value
    if with_k2:
        row.chi2inv_2 = metrology.moment_sensitivity(state, 2).value
    if with_k3:
        row.chi2inv_3 = metrology.moment_sensitivity(state, 3).value
    if with_qfi:
        row.f_q = metrology.qfi_max(state).value
    if with_mai:
        rep = metrology.mai_sensitivity(
            p,
            t,
            loss=LossParams(gamma),
            noise=noise,
            dim=dim,
            evolve_method=evolve_method,
        )
        row.chi2inv_mai = rep.value
        row.status = rep.status
    return row


def _row_figures(row: SweepRow) -> np.ndarray:
    """Figures monitored by the dimension policy; missing entries are NaN."""
    vals = [
        row.n_mean,
        row.v_min,
        row.chi2inv_1,
        row.chi2inv_2,
        row.chi2inv_3,
        row.f_q,
        row.chi2inv_mai,
    ]
    return np.array([np.nan if v is None else v for v in vals], dtype=float)


def evaluate_point(
    delta: float,
    epsilon: float,
    kerr: float,
    gamma: float,
    kt: float,
    sigma2: float = 0.0,
    dim: int | None = None,
    **flags,
) -> SweepRow:
    """Evaluate one grid point; dim=None doubles until figures stabilise."""
    if dim is not None:
        return _point_row(delta, epsilon, kerr, gamma, kt, sigma2, dim, **flags)
    rows: dict[int, SweepRow] = {}

    def monitored(d: int) -> np.ndarray:
        row = _point_row(delta, epsilon, kerr, gamma, kt, sigma2, d, **flags)
        rows[d] = row
        return _row_figures(row)

    start = _initial_dim(delta, epsilon, kerr, _time_of(kerr, kt))
    _, used = fock.converge_dim(monitored, start_dim=start, rel_tol=AUTO_DIM_RTOL)
    return rows[used]


def _group_dim(
    delta: float,
    epsilon: float,
    kerr: float,
    gamma: float,
    kt_values,
    sigma2: float,
    **flags,
) -> int:
    """Converged dimension for a dissipative group, probed at the largest Kt."""
    kt_ref = max(kt_values)
    row = evaluate_point(delta, epsilon, kerr, gamma, kt_ref, sigma2, dim=None, **flags)
    return int(row.dim)


def _map(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# experiment runners


def run_fig1(
    cfg: ExperimentConfig, dim: int | None = None, threads: int = 1, **_ignored
) -> SweepResult:
    """V_min(t) traces over the kerr axis plus an optimal-squeezing table.

    Traces fix (delta, epsilon) = (delta[0], 2) and sweep kerr x kt; the
    optima table sweeps the epsilon axis (per unit K) at each delta, reporting
    chi^-2_opt = 1/V_min(t_opt) with kt = K t_opt in the kt column.
    """
    rows: list[SweepRow] = []
    delta0 = cfg.delta[0]
    for kerr in cfg.kerr:
        p = HamiltonianParams(delta=delta0, epsilon=FIG1_TRACE_EPSILON, kerr=kerr)
        t_grid = np.array([_time_of(kerr, kt) for kt in cfg.kt])
        trace = dynamics.squeezing_trace(p, t_grid, dim=dim)
        evals, evecs = dynamics.eigensystem(trace.dim, p)
        c0 = evecs.conj().T[:, 0]
        for i, kt in enumerate(cfg.kt):
            psi = evecs @ (np.exp(-1j * evals * t_grid[i]) * c0)
            state = QuantumState.from_ket(psi, check_tail=False)
            _, _, n_mean = fock.ladder_moments(state)
            rows.append(
                SweepRow(
                    delta=delta0,
                    epsilon=FIG1_TRACE_EPSILON,
                    kerr=kerr,
                    gamma=0.0,
                    kt=float(kt),
                    dim=trace.dim,
                    n_mean=float(n_mean),
                    v_min=float(trace.v_min[i]),
                    chi2inv_1=float(1.0 / trace.v_min[i]) if trace.v_min[i] > 0 else None,
                )
            )

    def optimum(point: tuple[float, float]) -> SweepRow | None:
        d, eps = point
        p = HamiltonianParams(delta=d, epsilon=eps, kerr=FIG1_OPTIMA_KERR)
        try:
            _, t_opt = dynamics.optimal_squeezing(p, dim=dim)
        except NoInteriorMinimumError:
            return None
        row = evaluate_point(
            d,
            eps,
            FIG1_OPTIMA_KERR,
            0.0,
            kt=FIG1_OPTIMA_KERR * t_opt,
            dim=dim,
            with_qfi=False,
            with_mai=False,
        )
        row.t_opt = t_opt
        return row

    points = [(d, eps) for d in cfg.delta for eps in cfg.epsilon]
    optima = [row for row in _map(optimum, points, threads) if row is not None]
    return SweepResult(experiment="fig1", rows=rows, optima=optima)


def run_fig2(
    cfg: ExperimentConfig,
    dim: int | None = None,
    threads: int = 1,
    with_k3: bool = False,
) -> SweepResult:
    """Sensitivity maps over (delta, epsilon) at fixed Kt."""
    kerr = cfg.kerr[0]
    gamma = cfg.gamma[0]
    kt = cfg.kt[0]
    sigma2 = cfg.sigma2[0]

    def job(point: tuple[float, float]) -> SweepRow:
        d, eps = point
        row = evaluate_point(d, eps, kerr, gamma, kt, sigma2, dim=dim, with_k3=with_k3)
        if row.f_q:
            row.gap = (row.f_q - row.chi2inv_1) / row.f_q
        return row

    points = [(d, eps) for d in cfg.delta for eps in cfg.epsilon]
    rows = _map(job, points, threads)
    return SweepResult(experiment="fig2", rows=rows)


def _check_lossless_ordering(rows: list[SweepRow], slack: float = 1e-6) -> None:
    for row in rows:
        if row.gamma != 0.0 or row.chi2inv_mai is None:
            continue
        ordered = (
            row.chi2inv_1 <= row.chi2inv_mai + slack
            and row.chi2inv_mai <= row.f_q + slack
        )
        if not ordered:
            raise SensitivityOrderingError(
                f"kt={row.kt}: chi2inv_1={row.chi2inv_1}, "
                f"chi2inv_mai={row.chi2inv_mai}, f_q={row.f_q}"
            )


def _fig3_snapshots(
    delta: float,
    epsilon: float,
    kerr: float,
    dim: int | None,
    grid: PhaseGrid,
) -> list[WignerSnapshot]:
    """Phase-space views of the echo protocol: prepared, displaced, reversed."""
    gamma = SNAPSHOT_GAMMA * kerr
    if dim is None:
        probe = evaluate_point(
            delta, epsilon, kerr, gamma, SNAPSHOT_KT, dim=None, with_mai=False
        )
        dim = int(probe.dim)
    p = HamiltonianParams(delta=delta, epsilon=epsilon, kerr=kerr)
    loss = LossParams(gamma)
    t = _time_of(kerr, SNAPSHOT_KT)

    prepared = dynamics.evolve_lindblad(QuantumState.vacuum(dim), p, loss, t)
    report = metrology.linear_sensitivity(prepared)
    alpha = -1j * SNAPSHOT_DISPLACEMENT * cmath.exp(1j * report.phi_opt) / math.sqrt(2.0)
    d_op = fock.displacement(dim, alpha).matrix
    displaced = QuantumState.from_density_matrix(
        d_op @ prepared.density_matrix() @ d_op.conj().T
    )
    reversed_state = dynamics.evolve_lindblad(displaced, p, loss, t, reverse=True)

    def snap(name: str, state: QuantumState) -> WignerSnapshot:
        return WignerSnapshot(
            name=name,
            x_grid=grid.x_values,
            p_grid=grid.p_values,
            w=wigner(state, grid),
            phi_opt=float(report.phi_opt),
            theta_opt=float(report.theta_opt),
        )

    return [
        snap("prepared", prepared),
        snap("displaced", displaced),
        snap("reversed", reversed_state),
    ]


def run_fig3(
    cfg: ExperimentConfig,
    dim: int | None = None,
    threads: int = 1,
    with_k3: bool = False,
    snapshot_grid: PhaseGrid = SNAPSHOT_GRID,
    snapshots: bool = True,
) -> SweepResult:
    """Sensitivities vs Kt per loss rate, plus echo-protocol Wigner snapshots.

    Lossless rows must satisfy chi^-2 <= chi^-2_MAI <= F_Q (1e-6 slack);
    snapshots are taken at Kt = 0.4, gamma/K = 0.1 regardless of the gamma
    axis, matching the protocol illustration.
    """
    delta = cfg.delta[0]
    epsilon = cfg.epsilon[0]
    kerr = cfg.kerr[0]
    sigma2 = cfg.sigma2[0]
    flags = {"with_k3": with_k3}
    rows: list[SweepRow] = []
    snapshot_dim = dim
    for gamma in cfg.gamma:
        if gamma == 0.0 or dim is not None:
            group_dim = dim
        else:
            group_dim = _group_dim(delta, epsilon, kerr, gamma, cfg.kt, sigma2, **flags)
            if gamma == SNAPSHOT_GAMMA * kerr:
                snapshot_dim = group_dim
        rows.extend(
            _map(
                lambda kt: evaluate_point(
                    delta, epsilon, kerr, gamma, kt, sigma2, dim=group_dim, **flags
                ),
                cfg.kt,
                threads,
            )
        )
    _check_lossless_ordering(rows)
    snaps = (
        _fig3_snapshots(delta, epsilon, kerr, snapshot_dim, snapshot_grid)
        if snapshots
        else None
    )
    return SweepResult(experiment="fig3", rows=rows, snapshots=snaps)


def _first_maximum(values: np.ndarray) -> int | None:
    for i in range(1, values.shape[0] - 1):
        if values[i + 1] < values[i] and values[i] >= values[i - 1]:
            return i
    return None


def _scaling_series(dim: int, p: HamiltonianParams, t_grid: np.ndarray):
    """Mean excitation number and QFI along the vacuum trajectory."""
    evals, evecs = dynamics.eigensystem(dim, p)
    c0 = evecs.conj().T[:, 0]
    n_mean = np.empty(t_grid.shape[0])
    f_q = np.empty(t_grid.shape[0])
    for i, t in enumerate(t_grid):
        psi = evecs @ (np.exp(-1j * evals * t) * c0)
        state = QuantumState.from_ket(psi, check_tail=False)
        n_mean[i] = fock.ladder_moments(state)[2]
        cov = fock.quadrature_covariance(state)
        half_trace = (cov[0, 0] + cov[1, 1]) / 2.0
        radius = math.hypot((cov[0, 0] - cov[1, 1]) / 2.0, cov[0, 1])
        f_q[i] = 4.0 * (half_trace + radius)
    return n_mean, f_q


def _fit_slope(n_mean: np.ndarray, f_q: np.ndarray, window: float) -> float:
    count = int(round(window * n_mean.shape[0]))
    if count < 4:
        raise ScalingFitError(
            f"fewer than 4 points in the fit window ({count}); refine the kt grid"
        )
    n_w = n_mean[-count:]
    f_w = f_q[-count:]
    return float(np.sum(n_w * (f_w - 4.0)) / np.sum(n_w * n_w))


def run_scaling(
    cfg: ExperimentConfig, dim: int | None = None, threads: int = 1, **_ignored
) -> SweepResult:
    """F_Q(N) series per epsilon with the slope of F_Q = a N + 4.

    The series is truncated at the first F_Q maximum; the slope is fitted on
    the last 20% of the truncated points.
    """
    if any(d != 0.0 for d in cfg.delta):
        raise ConfigError("the scaling experiment requires delta = 0")
    kerr = cfg.kerr[0]
    t_grid = np.array([_time_of(kerr, kt) for kt in cfg.kt])
    rows: list[SweepRow] = []
    fits: list[ScalingFit] = []

    def run_one(epsilon: float) -> tuple[list[SweepRow], ScalingFit]:
        p = HamiltonianParams(delta=0.0, epsilon=epsilon, kerr=kerr)
        series: dict[int, tuple[np.ndarray, np.ndarray, float]] = {}

        def monitored(d: int) -> np.ndarray:
            n_mean, f_q = _scaling_series(d, p, t_grid)
            i_max = _first_maximum(f_q)
            if i_max is None:
                raise ScalingFitError(
                    f"no F_Q maximum for epsilon/K = {epsilon / kerr}; extend the kt grid"
                )
            a = _fit_slope(n_mean[: i_max + 1], f_q[: i_max + 1], 0.2)
            series[d] = (n_mean[: i_max + 1], f_q[: i_max + 1], a)
            return np.array([a, n_mean[i_max], f_q[i_max]])

        if dim is not None:
            monitored(dim)
            used = dim
        else:
            start = _initial_dim(0.0, epsilon, kerr, float(t_grid[-1]))
            _, used = fock.converge_dim(monitored, start_dim=start, rel_tol=AUTO_DIM_RTOL)
        n_mean, f_q, a = series[used]
        fit = ScalingFit(
            epsilon_over_k=epsilon / kerr,
            a=a,
            fit_window=0.2,
            points=[(float(n), float(f)) for n, f in zip(n_mean, f_q)],
        )
        eps_rows = [
            SweepRow(
                delta=0.0,
                epsilon=epsilon,
                kerr=kerr,
                gamma=0.0,
                kt=float(cfg.kt[i]),
                dim=used,
                n_mean=float(n_mean[i]),
                f_q=float(f_q[i]),
            )
            for i in range(n_mean.shape[0])
        ]
        return eps_rows, fit

    for eps_rows, fit in _map(run_one, cfg.epsilon, threads):
        rows.extend(eps_rows)
        fits.append(fit)
    return SweepResult(experiment="scaling", rows=rows, fits=fits)


def _parabolic_vertex(x: np.ndarray, y: np.ndarray, i: int) -> float | None:
    """Vertex of the parabola through points i-1, i, i+1; None if degenerate."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    if abs(denom) < 1e-300:
        return None
    vertex = x1 - 0.5 * ((x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)) / denom
    if not (min(x0, x2) < vertex < max(x0, x2)):
        return None
    return float(vertex)


def run_loss_robustness(
    cfg: ExperimentConfig, dim: int | None = None, threads: int = 1, **_ignored
) -> SweepResult:
    """Per-gamma maxima over Kt of chi^-2, chi^-2_MAI, and F_Q.

    Each quantity is maximised on the kt grid and refined once through the
    parabola of the bracketing points.  The emitted kt column and the v_min/N
    entries refer to the echo optimum; chi2inv_1 and f_q columns carry their
    own maxima.
    """
    delta = cfg.delta[0]
    epsilon = cfg.epsilon[0]
    kerr = cfg.kerr[0]
    sigma2 = cfg.sigma2[0]
    kt_grid = np.array(cfg.kt)
    rows: list[SweepRow] = []
    for gamma in cfg.gamma:
        group_dim = dim
        if group_dim is None:
            group_dim = _group_dim(delta, epsilon, kerr, gamma, cfg.kt, sigma2)
        grid_rows = _map(
            lambda kt: evaluate_point(
                delta, epsilon, kerr, gamma, kt, sigma2, dim=group_dim
            ),
            cfg.kt,
            threads,
        )

        def refined_max(getter, **flags) -> tuple[float, float, SweepRow]:
            values = np.array(
                [np.nan if getter(r) is None else getter(r) for r in grid_rows]
            )
            i_best = int(np.nanargmax(values))
            best_val = float(values[i_best])
            best_kt = float(kt_grid[i_best])
            best_row = grid_rows[i_best]
            if 0 < i_best < len(grid_rows) - 1:
                vertex = _parabolic_vertex(kt_grid, values, i_best)
                if vertex is not None:
                    row_v = evaluate_point(
                        delta, epsilon, kerr, gamma, vertex, sigma2, dim=group_dim, **flags
                    )
                    val_v = getter(row_v)
                    if val_v is not None and val_v > best_val:
                        best_val, best_kt, best_row = float(val_v), vertex, row_v
            return best_val, best_kt, best_row

        chi_max, _, _ = refined_max(
            lambda r: r.chi2inv_1, with_qfi=False, with_mai=False
        )
        fq_max, _, _ = refined_max(
            lambda r: r.f_q, with_linear=False, with_mai=False
        )
        mai_max, mai_kt, mai_row = refined_max(
            lambda r: r.chi2inv_mai, with_linear=False, with_qfi=False
        )
        rows.append(
            SweepRow(
                delta=delta,
                epsilon=epsilon,
                kerr=kerr,
                gamma=gamma,
                kt=mai_kt,
                dim=group_dim,
                n_mean=mai_row.n_mean,
                v_min=mai_row.v_min,
                chi2inv_1=chi_max,
                f_q=fq_max,
                chi2inv_mai=mai_max,
                status=mai_row.status,
                sigma2=sigma2,
            )
        )
    return SweepResult(experiment="loss-robustness", rows=rows)


def run_custom(
    cfg: ExperimentConfig,
    dim: int | None = None,
    threads: int = 1,
    with_k3: bool = False,
) -> SweepResult:
    """Full cross product of the config axes; sigma2 varies fastest."""
    flags = {"with_k2": True, "with_k3": with_k3}
    rows: list[SweepRow] = []
    for delta in cfg.delta:
        for epsilon in cfg.epsilon:
            for kerr in cfg.kerr:
                for gamma in cfg.gamma:
                    group_dim = dim
                    if group_dim is None and gamma > 0.0:
                        group_dim = _group_dim(
                            delta, epsilon, kerr, gamma, cfg.kt, cfg.sigma2[0], **flags
                        )
                    points = [(kt, s2) for kt in cfg.kt for s2 in cfg.sigma2]
                    rows.extend(
                        _map(
                            lambda ps: evaluate_point(
                                delta, epsilon, kerr, gamma, ps[0], ps[1],
                                dim=group_dim, **flags,
                            ),
                            points,
                            threads,
                        )
                    )
    return SweepResult(experiment="custom", rows=rows)


def run_wigner(
    cfg: ExperimentConfig,
    dim: int | None = None,
    grid: PhaseGrid = DEFAULT_GRID,
    **_ignored,
) -> SweepResult:
    """Wigner snapshot of one prepared state with its optimal angles."""
    delta = cfg.delta[0]
    epsilon = cfg.epsilon[0]
    kerr = cfg.kerr[0]
    gamma = cfg.gamma[0]
    kt = cfg.kt[0]
    if dim is None:
        probe = evaluate_point(delta, epsilon, kerr, gamma, kt, dim=None, with_mai=False)
        dim = int(probe.dim)
    p = HamiltonianParams(delta=delta, epsilon=epsilon, kerr=kerr)
    t = _time_of(kerr, kt)
    vacuum = QuantumState.vacuum(dim)
    if gamma == 0.0:
        state = dynamics.evolve_unitary(vacuum, p, t)
    else:
        state = dynamics.evolve_lindblad(vacuum, p, LossParams(gamma), t)
    report = metrology.linear_sensitivity(state)
    snapshot = WignerSnapshot(
        name="state",
        x_grid=grid.x_values,
        p_grid=grid.p_values,
        w=wigner(state, grid),
        phi_opt=float(report.phi_opt),
        theta_opt=float(report.theta_opt),
    )
    return SweepResult(experiment="wigner", rows=[], snapshots=[snapshot])


_RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "scaling": run_scaling,
    "loss-robustness": run_loss_robustness,
    "custom": run_custom,
    "wigner": run_wigner,
}


def run_experiment(
    cfg: ExperimentConfig,
    dim: int | None = None,
    threads: int = 1,
    with_k3: bool = False,
) -> SweepResult:
    runner = _RUNNERS[cfg.experiment]
    return runner(cfg, dim=dim, threads=threads, with_k3=with_k3)


# ---------------------------------------------------------------------------
# serialization


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row.column_values()))
    return "\n".join(lines) + "\n"


def _json_cell(value):
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    return None if math.isnan(value) else value


def _rows_to_dicts(rows: list[SweepRow]) -> list[dict]:
    return [
        {col: _json_cell(v) for col, v in zip(CSV_COLUMNS, row.column_values())}
        for row in rows
    ]


def _fit_to_dict(fit: ScalingFit) -> dict:
    return {
        "epsilon_over_k": fit.epsilon_over_k,
        "a": fit.a,
        "fit_window": fit.fit_window,
        "points": [[n, f] for n, f in fit.points],
    }


def _snapshot_to_dict(snap: WignerSnapshot) -> dict:
    return {
        "x_grid": [float(x) for x in snap.x_grid],
        "p_grid": [float(p) for p in snap.p_grid],
        "w": [[float(v) for v in row] for row in snap.w],
        "phi_opt": snap.phi_opt,
        "theta_opt": snap.theta_opt,
    }


def result_to_dict(result: SweepResult) -> dict:
    out: dict = {
        "experiment": result.experiment,
        "columns": list(CSV_COLUMNS),
        "rows": _rows_to_dicts(result.rows),
    }
    if result.optima is not None:
        out["optima"] = _rows_to_dicts(result.optima)
    if result.fits is not None:
        out["fits"] = [_fit_to_dict(f) for f in result.fits]
    return out


def emit(result: SweepResult, out_path: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the result files; returns the paths written.

    CSV keeps the pinned column schema; the optima table and scaling fits go
    to sidecar files.  JSON mirrors the schema in one file.  Wigner snapshots
    are always one JSON file each.
    """
    out = Path(out_path)
    written: list[Path] = []
    if result.experiment != "wigner":
        if fmt == "csv":
            out.write_text(rows_to_csv(result.rows))
            written.append(out)
            if result.optima is not None:
                side = out.with_name(out.stem + "_optima" + out.suffix)
                side.write_text(rows_to_csv(result.optima))
                written.append(side)
            if result.fits is not None:
                side = out.with_name(out.stem + "_fits.json")
                side.write_text(
                    json.dumps([_fit_to_dict(f) for f in result.fits], indent=1) + "\n"
                )
                written.append(side)
        elif fmt == "json":
            out.write_text(json.dumps(result_to_dict(result), indent=1) + "\n")
            written.append(out)
        else:
            raise ValueError(f"unknown output format {fmt!r}")
    for snap in result.snapshots or []:
        if result.experiment == "wigner":
            path = out
        else:
            path = out.with_name(f"{out.stem}_wigner_{snap.name}.json")
        path.write_text(json.dumps(_snapshot_to_dict(snap), indent=1) + "\n")
        written.append(path)
    return written
