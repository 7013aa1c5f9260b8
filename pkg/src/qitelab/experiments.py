"""Declarative experiment runner: YAML configs in, result records and
plot-ready CSV series out.

Every run is deterministic given its seed: all child seeds are drawn up
front in a fixed order, so repetitions may execute on worker threads
without affecting the outputs.  Result records are written atomically
(write-temp-then-rename) as JSON; plot data goes to one CSV per figure
analog.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import yaml

from . import __version__
from .backends import (
    CircuitTemplate,
    EnergyEstimate,
    NoiseModel,
    measure_energy,
    prepare_state,
)
from .constants import EIG_CUTOFF_DEFAULT, OVERLAP_THRESHOLD_DEFAULT
from .hamiltonians import (
    DeuteronParams,
    H2CoefficientTable,
    deuteron_hamiltonian,
    h2_hamiltonian,
    h2_local_terms,
    ho_one_body_matrix,
    load_builtin_h2_coefficients,
    load_h2_coefficients,
)
from .luscher import extrapolation_table
from .mitigation import (
    ReadoutCalibration,
    calibrate_readout,
    richardson_extrapolate,
    roem_correct,
)
from .pauli import PauliSum, basis_state, expectation
from .qite import (
    QiteTrajectory,
    build_pool,
    exact_imaginary_time_trajectory,
    qite_run,
    single_step_compress,
)
from .qlanczos import build_krylov, build_krylov_sampled, solve, stabilize

CHEMICAL_ACCURACY = 1.6e-3  # Hartree

_ALGORITHMS = ("exact", "qite", "qite_single_step", "qlanczos", "luscher_table")
_BACKENDS = ("exact", "sampled", "noisy")


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see configs/ for examples)."""

    name: str
    system_type: str                     # "deuteron" | "h2"
    algorithm: str
    n_basis: int = 2                     # deuteron basis size
    bond_lengths: tuple[float, ...] | None = None   # h2; None = whole table
    coefficient_file: str = "builtin"
    initial_state: str | None = None
    delta_tau: float = 0.05
    n_steps: int = 40
    pool: str = "restricted"
    backend: str = "exact"
    shots: int = 8192
    runs: int = 1
    seed: int = 0
    noise_p01: float = 0.0
    noise_p10: float = 0.0
    noise_cnot: float = 0.0
    roem: bool = False
    richardson_enabled: bool = False
    richardson_order: int = 1
    richardson_replications: tuple[int, ...] = (1, 3, 5)
    richardson_operator_study: bool = False
    l_max: int = 4
    trajectory_kind: str = "exact"       # qlanczos backing: "exact" | "qite"
    overlap_threshold: float = OVERLAP_THRESHOLD_DEFAULT
    eig_cutoff: float = EIG_CUTOFF_DEFAULT
    m_convention: str = "reduced"
    luscher_sources: tuple[str, ...] = ("exact", "qite", "qlanczos")
    raw: dict = field(default_factory=dict, compare=False)

    def digest(self) -> str:
        payload = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def noise_model(self, replication: int = 1) -> NoiseModel:
        return NoiseModel.uniform(
            p01=self.noise_p01,
            p10=self.noise_p10,
            cnot_depolarizing=self.noise_cnot,
            replication_factor=replication,
        )


def _require(mapping: Mapping, key: str, kind, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    value = mapping[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _optional(mapping: Mapping, key: str, kind, default, path: str):
    if key not in mapping or mapping[key] is None:
        return default
    return _require(mapping, key, kind, path)


def parse_config_dict(data: dict, name_hint: str = "experiment") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("experiment: top level must be a mapping")
    name = _optional(data, "name", str, name_hint, "experiment")
    system = _require(data, "system", dict, "experiment")
    system_type = _require(system, "type", str, "experiment.system")
    if system_type not in ("deuteron", "h2"):
        raise ConfigError(
            f"experiment.system.type: unknown system {system_type!r}"
        )
    algorithm = _require(data, "algorithm", str, "experiment")
    if algorithm not in _ALGORITHMS:
        raise ConfigError(
            f"experiment.algorithm: {algorithm!r} not one of {_ALGORITHMS}"
        )
    backend = _optional(data, "backend", str, "exact", "experiment")
    if backend not in _BACKENDS:
        raise ConfigError(f"experiment.backend: {backend!r} not one of {_BACKENDS}")

    n_basis = _optional(system, "n_basis", int, 2, "experiment.system")
    bond_lengths = None
    coefficient_file = "builtin"
    if system_type == "h2":
        coefficient_file = _optional(
            system, "coefficients", str, "builtin", "experiment.system"
        )
        raw_lengths = system.get("bond_lengths", "all")
        if raw_lengths != "all":
            if not isinstance(raw_lengths, list) or not all(
                isinstance(v, (int, float)) for v in raw_lengths
            ):
                raise ConfigError(
                    "experiment.system.bond_lengths: expected 'all' or a list of numbers"
                )
            bond_lengths = tuple(float(v) for v in raw_lengths)

    noise = data.get("noise") or {}
    mitigation = data.get("mitigation") or {}
    richardson = mitigation.get("richardson") or {}
    qlanczos = data.get("qlanczos") or {}
    luscher = data.get("luscher") or {}

    replications = richardson.get("replications", [1, 3, 5])
    if not isinstance(replications, list) or not all(
        isinstance(r, int) and r >= 1 and r % 2 == 1 for r in replications
    ):
        raise ConfigError(
            "experiment.mitigation.richardson.replications: "
            "expected a list of odd positive integers"
        )

    config = ExperimentConfig(
        name=name,
        system_type=system_type,
        algorithm=algorithm,
        n_basis=n_basis,
        bond_lengths=bond_lengths,
        coefficient_file=coefficient_file,
        initial_state=_optional(data, "initial_state", str, None, "experiment"),
        delta_tau=_optional(data, "delta_tau", float, 0.05, "experiment"),
        n_steps=_optional(data, "n_steps", int, 40, "experiment"),
        pool=_optional(data, "pool", str, "restricted", "experiment"),
        backend=backend,
        shots=_optional(data, "shots", int, 8192, "experiment"),
        runs=_optional(data, "runs", int, 1, "experiment"),
        seed=_optional(data, "seed", int, 0, "experiment"),
        noise_p01=_optional(noise, "p01", float, 0.0, "experiment.noise"),
        noise_p10=_optional(noise, "p10", float, 0.0, "experiment.noise"),
        noise_cnot=_optional(
            noise, "cnot_depolarizing", float, 0.0, "experiment.noise"
        ),
        roem=_optional(mitigation, "roem", bool, False, "experiment.mitigation"),
        richardson_enabled=_optional(
            richardson, "enabled", bool, False, "experiment.mitigation.richardson"
        ),
        richardson_order=_optional(
            richardson, "order", int, 1, "experiment.mitigation.richardson"
        ),
        richardson_replications=tuple(replications),
        richardson_operator_study=_optional(
            richardson, "operator_study", bool, False,
            "experiment.mitigation.richardson",
        ),
        l_max=_optional(qlanczos, "l_max", int, 4, "experiment.qlanczos"),
        trajectory_kind=_optional(
            qlanczos, "trajectory", str, "exact", "experiment.qlanczos"
        ),
        overlap_threshold=_optional(
            qlanczos, "overlap_threshold", float,
            OVERLAP_THRESHOLD_DEFAULT, "experiment.qlanczos",
        ),
        eig_cutoff=_optional(
            qlanczos, "eig_cutoff", float, EIG_CUTOFF_DEFAULT, "experiment.qlanczos"
        ),
        m_convention=_optional(
            luscher, "m_convention", str, "reduced", "experiment.luscher"
        ),
        luscher_sources=tuple(
            luscher.get("sources", ["exact", "qite", "qlanczos"])
        ),
        raw=data,
    )
    if config.pool not in ("restricted", "full"):
        raise ConfigError(f"experiment.pool: {config.pool!r} not restricted/full")
    if config.trajectory_kind not in ("exact", "qite"):
        raise ConfigError(
            f"experiment.qlanczos.trajectory: {config.trajectory_kind!r} "
            "not exact/qite"
        )
    if config.system_type == "deuteron" and config.n_basis not in (2, 3):
        raise ConfigError("experiment.system.n_basis: deuteron supports 2 or 3")
    return config


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return parse_config_dict(data, name_hint=path.stem)


# --------------------------------------------------------------------------
# building blocks shared by the experiment families


def _load_h2_table(config: ExperimentConfig) -> H2CoefficientTable:
    if config.coefficient_file == "builtin":
        return load_builtin_h2_coefficients()
    return load_h2_coefficients(config.coefficient_file)


def _deuteron_problem(n_basis: int):
    full, groups = deuteron_hamiltonian(n_basis)
    pool = build_pool(n_basis, n_basis - 1, restricted=True)
    label = "1" + "0" * (n_basis - 1)
    return full, groups, pool, label


def _mitigated_energy(
    estimate: EnergyEstimate,
    hamiltonian: PauliSum,
    calibration: ReadoutCalibration,
) -> tuple[float, float]:
    """Recombine a sampled energy with readout-corrected per-term values."""
    energy = 0.0
    variance = 0.0
    for (coefficient, string), term in zip(hamiltonian.terms, estimate.per_term):
        if string.is_identity:
            energy += coefficient
            continue
        value, err = roem_correct(term.raw_counts, calibration, string)
        energy += coefficient * value
        variance += (coefficient * err) ** 2
    return float(energy), float(np.sqrt(variance))


def _richardson_energy(
    source_for_r: Callable[[int], Any],
    hamiltonian: PauliSum,
    replications: Sequence[int],
    order: int,
    shots: int,
    seeds: Sequence[int],
    noise_for_r: Callable[[int], NoiseModel],
    calibration: ReadoutCalibration | None,
) -> tuple[float, float, dict]:
    """Per-term Richardson extrapolation over the replication axis.

    Returns the recombined energy, its standard error, and the per-operator
    series (points and fits) for plotting.
    """
    term_points: dict[str, list[tuple[float, float, float]]] = {}
    estimates = {}
    for r, seed in zip(replications, seeds):
        estimate = measure_energy(
            source_for_r(r), hamiltonian, shots=shots, seed=seed, noise=noise_for_r(r)
        )
        estimates[r] = estimate
        for (coefficient, string), term in zip(hamiltonian.terms, estimate.per_term):
            if string.is_identity:
                continue
            if calibration is not None:
                value, err = roem_correct(term.raw_counts, calibration, string)
            else:
                value, err = term.value, term.std_error
            term_points.setdefault(string.letters, []).append((float(r), value, err))
    energy = 0.0
    variance = 0.0
    series: dict[str, dict] = {}
    for coefficient, string in hamiltonian.terms:
        if string.is_identity:
            energy += coefficient
            continue
        points = term_points[string.letters]
        fit = richardson_extrapolate(points, order=order)
        energy += coefficient * fit.intercept
        variance += (coefficient * fit.intercept_std) ** 2
        series[string.letters] = {
            "points": [list(p) for p in points],
            "intercept": fit.intercept,
            "intercept_std": fit.intercept_std,
            "coefficients": list(fit.coefficients),
        }
    return float(energy), float(np.sqrt(variance)), series


def _h2_sector_reference(hamiltonian: PauliSum, label: str) -> tuple[float, float]:
    """Exact eigenvalues of the symmetry sector containing a basis label."""
    matrix = hamiltonian.matrix()
    if label in ("00", "11"):
        block = np.array(
            [[matrix[0, 0], matrix[0, 3]], [matrix[3, 0], matrix[3, 3]]]
        ).real
    else:
        block = np.array(
            [[matrix[1, 1], matrix[1, 2]], [matrix[2, 1], matrix[2, 2]]]
        ).real
    low, high = np.linalg.eigvalsh(block)
    return float(low), float(high)


def _h2_qite_branch(
    hamiltonian: PauliSum, label: str, config: ExperimentConfig
) -> QiteTrajectory:
    """Noiseless H2 imaginary-time run for one initial-state branch.

    The closed-shell branch (|00> or |11>) keeps the full pool; the
    open-shell branch uses the antisymmetric pair generator, which preserves
    the symmetry sector exactly and so cannot drain into the lower-lying
    sector through rounding noise on long runs.
    """
    restricted = label in ("01", "10")
    pool = build_pool(2, 1, restricted=restricted)
    terms = h2_local_terms(hamiltonian)
    return qite_run(
        basis_state(2, label), terms, config.delta_tau, config.n_steps, pool
    )


# --------------------------------------------------------------------------
# experiment families


def _family_deuteron_sweep(config: ExperimentConfig) -> dict:
    """Energy vs imaginary time for the deuteron, optionally noisy+mitigated."""
    full, groups, pool, label = _deuteron_problem(config.n_basis)
    initial = config.initial_state or label
    trajectory = qite_run(
        basis_state(config.n_basis, initial),
        groups,
        config.delta_tau,
        config.n_steps,
        pool if config.pool == "restricted" else
        build_pool(config.n_basis, config.n_basis - 1, restricted=False),
    )
    betas = [round(s * config.delta_tau, 10) for s in range(config.n_steps + 1)]
    result: dict[str, Any] = {
        "betas": betas,
        "exact_energies": list(trajectory.energies),
        "exact_ground": float(np.linalg.eigvalsh(full.matrix()).min()),
        "trajectory": trajectory.to_json_dict(),
    }
    if config.algorithm == "qite_single_step" or config.backend in ("sampled", "noisy"):
        compression = single_step_compress(trajectory)
        result["compression_fidelities"] = list(compression.fidelities)
        result["template_angles"] = [list(t.angles) for t in compression.templates]
        if config.backend in ("sampled", "noisy"):
            result["hardware_emulation"] = _emulate_sweep(
                config, full, trajectory, compression.templates
            )
    return result


def _emulate_sweep(
    config: ExperimentConfig,
    hamiltonian: PauliSum,
    trajectory: QiteTrajectory,
    templates: Sequence[CircuitTemplate],
) -> dict:
    """Shot-sampled (optionally noisy and mitigated) energies per beta."""
    noisy = config.backend == "noisy"
    noise = config.noise_model() if noisy else None
    master = np.random.default_rng(config.seed)
    run_seeds = [int(s) for s in master.integers(0, 2**62, size=config.runs)]
    replications = config.richardson_replications if config.richardson_enabled else (1,)

    def one_run(run_seed: int) -> list[dict]:
        rng = np.random.default_rng(run_seed)
        calibration = None
        if noisy and config.roem:
            calibration = calibrate_readout(
                config.n_basis, noise, config.shots, seed=int(rng.integers(2**62))
            )
        rows = []
        for step in range(config.n_steps + 1):
            if step == 0:
                # the bare initial state involves no entangling gate
                source_for_r = lambda r: trajectory.states[0]
            else:
                template = templates[step - 1]
                source_for_r = lambda r, t=template: t
            raw_seed = int(rng.integers(2**62))
            raw = measure_energy(
                source_for_r(1),
                hamiltonian,
                shots=config.shots,
                seed=raw_seed,
                noise=noise,
            )
            row = {
                "beta": round(step * config.delta_tau, 10),
                "raw": raw.energy,
                "raw_stderr": raw.std_error,
            }
            if calibration is not None and not (config.richardson_enabled and step > 0):
                corrected, err = _mitigated_energy(raw, hamiltonian, calibration)
                row["mitigated"] = corrected
                row["mitigated_stderr"] = err
                row["provenance"] = "roem"
            if config.richardson_enabled and step > 0:
                seeds = [int(rng.integers(2**62)) for _ in replications]
                energy, err, series = _richardson_energy(
                    source_for_r,
                    hamiltonian,
                    replications,
                    config.richardson_order,
                    config.shots,
                    seeds,
                    lambda r: noise.with_replication(r) if noise else None,
                    calibration,
                )
                row["mitigated"] = energy
                row["mitigated_stderr"] = err
                row["provenance"] = (
                    "roem+richardson" if calibration is not None else "richardson"
                )
                row["richardson_series"] = series
            if "mitigated" not in row:
                row["mitigated"] = row["raw"]
                row["mitigated_stderr"] = row["raw_stderr"]
                row["provenance"] = "raw"
            rows.append(row)
        return rows

    with ThreadPoolExecutor(max_workers=_worker_count()) as executor:
        per_run = list(executor.map(one_run, run_seeds))

    betas = [row["beta"] for row in per_run[0]]
    aggregated = []
    for index, beta in enumerate(betas):
        raw_values = [run[index]["raw"] for run in per_run]
        mit_values = [run[index]["mitigated"] for run in per_run]
        aggregated.append(
            {
                "beta": beta,
                "raw_mean": float(np.mean(raw_values)),
                "raw_stderr": _mean_stderr(raw_values, [run[index]["raw_stderr"] for run in per_run]),
                "mitigated_mean": float(np.mean(mit_values)),
                "mitigated_stderr": _mean_stderr(
                    mit_values, [run[index]["mitigated_stderr"] for run in per_run]
                ),
                "provenance": per_run[0][index]["provenance"],
            }
        )
    return {"per_run": per_run, "aggregated": aggregated, "runs": config.runs}


def _mean_stderr(values: Sequence[float], stderrs: Sequence[float]) -> float:
    """Standard error of the mean over runs.

    Uses the run-to-run spread when there is more than one run (it captures
    both shot noise and any per-run systematics) and falls back to the
    propagated per-run error for a single run.
    """
    if len(values) > 1:
        return float(np.std(values, ddof=1) / np.sqrt(len(values)))
    return float(stderrs[0])


def _family_richardson_study(config: ExperimentConfig) -> dict:
    """Per-operator expectation values against the CNOT replication factor
    at fixed beta (the zero-noise-extrapolation workflow)."""
    full, groups, pool, label = _deuteron_problem(config.n_basis)
    trajectory = qite_run(
        basis_state(config.n_basis, config.initial_state or label),
        groups,
        config.delta_tau,
        config.n_steps,
        pool,
    )
    compression = single_step_compress(trajectory)
    template = compression.templates[-1]
    ideal = prepare_state(template)
    noise = config.noise_model()
    master = np.random.default_rng(config.seed)
    run_seeds = [int(s) for s in master.integers(0, 2**62, size=config.runs)]
    replications = config.richardson_replications

    def one_run(run_seed: int) -> dict:
        rng = np.random.default_rng(run_seed)
        calibration = (
            calibrate_readout(
                config.n_basis, noise, config.shots, seed=int(rng.integers(2**62))
            )
            if config.roem
            else None
        )
        seeds = [int(rng.integers(2**62)) for _ in replications]
        energy, err, series = _richardson_energy(
            lambda r: template,
            full,
            replications,
            config.richardson_order,
            config.shots,
            seeds,
            lambda r: noise.with_replication(r),
            calibration,
        )
        return {"energy": energy, "stderr": err, "series": series}

    with ThreadPoolExecutor(max_workers=_worker_count()) as executor:
        per_run = list(executor.map(one_run, run_seeds))

    energies = [run["energy"] for run in per_run]
    exact_terms = {
        string.letters: expectation(ideal, string)
        for _, string in full.terms
        if not string.is_identity
    }
    return {
        "beta": round(config.n_steps * config.delta_tau, 10),
        "template_angles": list(template.angles),
        "exact_energy": float(expectation(ideal, full)),
        "exact_terms": exact_terms,
        "per_run": per_run,
        "energy_mean": float(np.mean(energies)),
        "energy_stderr": _mean_stderr(energies, [r["stderr"] for r in per_run]),
        "replications": list(replications),
    }


def _family_deuteron_qlanczos(config: ExperimentConfig) -> dict:
    """Krylov-subspace ground energy for the deuteron, noiseless and
    (optionally) shot-sampled with gate and readout noise."""
    full, groups, pool, label = _deuteron_problem(config.n_basis)
    initial = basis_state(config.n_basis, config.initial_state or label)
    if config.trajectory_kind == "exact":
        trajectory = exact_imaginary_time_trajectory(
            initial, full, config.delta_tau, max(config.l_max, config.n_steps)
        )
    else:
        trajectory = qite_run(
            initial, groups, config.delta_tau, max(config.l_max, config.n_steps), pool
        )
    space = stabilize(
        build_krylov(trajectory, config.l_max),
        overlap_threshold=config.overlap_threshold,
        eig_cutoff=config.eig_cutoff,
    )
    noiseless = solve(space)
    result: dict[str, Any] = {
        "exact_ground": float(np.linalg.eigvalsh(full.matrix()).min()),
        "krylov_space": space.to_json_dict(),
        "noiseless": noiseless.to_json_dict(),
    }
    if config.backend in ("sampled", "noisy"):
        qite_traj = qite_run(initial, groups, config.delta_tau, config.l_max, pool)
        templates = single_step_compress(qite_traj).templates
        noise = config.noise_model() if config.backend == "noisy" else None
        master = np.random.default_rng(config.seed)
        run_seeds = [int(s) for s in master.integers(0, 2**62, size=config.runs)]

        def one_run(run_seed: int) -> dict:
            rng = np.random.default_rng(run_seed)
            calibration = (
                calibrate_readout(
                    config.n_basis, noise, config.shots, seed=int(rng.integers(2**62))
                )
                if (config.roem and noise is not None)
                else None
            )
            space_seed = int(rng.integers(2**62))
            out = {}
            for tag, cal in (("raw", None), ("roem", calibration)):
                if tag == "roem" and calibration is None:
                    continue
                sampled_space = build_krylov_sampled(
                    qite_traj,
                    config.l_max,
                    [None, *templates],
                    config.shots,
                    seed=space_seed,
                    noise=noise,
                    calibration=cal,
                )
                solved = solve(
                    stabilize(
                        sampled_space,
                        overlap_threshold=config.overlap_threshold,
                        eig_cutoff=config.eig_cutoff,
                    )
                )
                out[tag] = {
                    "expectation_route": solved.energies_from_expectation[0],
                    "eigenvalue_route": solved.energies_from_eigenvalues[0],
                }
            return out

        with ThreadPoolExecutor(max_workers=_worker_count()) as executor:
            per_run = list(executor.map(one_run, run_seeds))
        sampled: dict[str, Any] = {"per_run": per_run, "runs": config.runs}
        for tag in ("raw", "roem"):
            if tag in per_run[0]:
                for route in ("expectation_route", "eigenvalue_route"):
                    values = [run[tag][route] for run in per_run]
                    sampled[f"{tag}_{route}_mean"] = float(np.mean(values))
                    sampled[f"{tag}_{route}_stderr"] = _mean_stderr(
                        values, [0.0] * len(values)
                    )
        result["sampled"] = sampled
    return result


def _family_h2_sweep(config: ExperimentConfig) -> dict:
    """Dissociation-curve sweep: branch per initial state, energies vs R."""
    table = _load_h2_table(config)
    lengths = config.bond_lengths or table.bond_lengths
    branches = (
        ("00", "10") if config.algorithm != "qlanczos" else ("00", "01")
    )
    rows: dict[str, list[dict]] = {branch: [] for branch in branches}
    for r in lengths:
        hamiltonian = h2_hamiltonian(table, r)
        for branch in branches:
            low, high = _h2_sector_reference(hamiltonian, branch)
            if config.algorithm == "exact":
                rows[branch].append(
                    {"R": r, "exact_low": low, "exact_high": high}
                )
            elif config.algorithm == "qlanczos":
                trajectory = exact_imaginary_time_trajectory(
                    basis_state(2, branch), hamiltonian, config.delta_tau, config.l_max
                )
                solved = solve(
                    stabilize(
                        build_krylov(trajectory, config.l_max),
                        overlap_threshold=config.overlap_threshold,
                        eig_cutoff=config.eig_cutoff,
                    )
                )
                energies = sorted(solved.energies_from_expectation)
                rows[branch].append(
                    {
                        "R": r,
                        "energy_low": energies[0],
                        "energy_high": energies[-1],
                        "exact_low": low,
                        "exact_high": high,
                        "abs_error_low": abs(energies[0] - low),
                        "abs_error_high": abs(energies[-1] - high),
                        "chemical_accuracy": CHEMICAL_ACCURACY,
                    }
                )
            else:
                trajectory = _h2_qite_branch(hamiltonian, branch, config)
                energy = trajectory.energies[-1]
                rows[branch].append(
                    {
                        "R": r,
                        "energy": energy,
                        "exact": low,
                        "abs_error": abs(energy - low),
                        "chemical_accuracy": CHEMICAL_ACCURACY,
                    }
                )
    return {"bond_lengths": list(lengths), "branches": rows}


def _family_luscher_table(config: ExperimentConfig) -> dict:
    """Finite-basis energies from every requested source, extrapolated to
    the infinite oscillator basis at each order."""
    e1 = float(ho_one_body_matrix(DeuteronParams(n_basis=1)).entries[0, 0])
    sources: dict[str, dict[int, float]] = {}
    for source in config.luscher_sources:
        energies = {1: e1}
        for n in (2, 3):
            full, groups, pool, label = _deuteron_problem(n)
            if source == "exact":
                energies[n] = float(np.linalg.eigvalsh(full.matrix()).min())
            elif source == "qite":
                trajectory = qite_run(
                    basis_state(n, label), groups, config.delta_tau,
                    config.n_steps, pool,
                )
                energies[n] = float(trajectory.energies[-1])
            elif source == "qlanczos":
                trajectory = exact_imaginary_time_trajectory(
                    basis_state(n, label), full, config.delta_tau, config.l_max
                )
                solved = solve(
                    stabilize(
                        build_krylov(trajectory, config.l_max),
                        overlap_threshold=config.overlap_threshold,
                        eig_cutoff=config.eig_cutoff,
                    )
                )
                energies[n] = float(solved.ground_energy)
            else:
                raise ConfigError(
                    f"experiment.luscher.sources: unknown source {source!r}"
                )
        sources[source] = energies
    out: dict[str, Any] = {"m_convention": config.m_convention, "rows": {}}
    for source, energies in sources.items():
        table = extrapolation_table(energies, m_convention=config.m_convention)
        out["rows"][source] = {
            str(n): {
                "E_N": energies[n],
                **{order: fit.e_inf for order, fit in fits.items()},
                "fits": {order: fit.to_json_dict() for order, fit in fits.items()},
            }
            for n, fits in table.items()
        }
        out["rows"][source]["inputs"] = {str(k): v for k, v in energies.items()}
    return out


def _dispatch(config: ExperimentConfig) -> dict:
    if config.algorithm == "luscher_table":
        return _family_luscher_table(config)
    if config.system_type == "h2":
        if config.algorithm in ("qite", "exact", "qlanczos"):
            return _family_h2_sweep(config)
        raise ConfigError(
            f"experiment.algorithm: {config.algorithm!r} unsupported for h2"
        )
    if config.algorithm == "exact":
        full, *_ = _deuteron_problem(config.n_basis)
        return {"exact_ground": float(np.linalg.eigvalsh(full.matrix()).min())}
    if config.algorithm in ("qite", "qite_single_step"):
        if config.richardson_operator_study:
            return _family_richardson_study(config)
        return _family_deuteron_sweep(config)
    if config.algorithm == "qlanczos":
        return _family_deuteron_qlanczos(config)
    raise ConfigError(f"experiment.algorithm: {config.algorithm!r} unsupported")


def _worker_count() -> int:
    return max(1, int(os.environ.get("QITELAB_JOBS", "1")))


# --------------------------------------------------------------------------
# records, CSV emission, public entry points


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def run_experiment(
    config: ExperimentConfig | str | Path,
    out_dir: str | Path = ".",
    seed: int | None = None,
    jobs: int | None = None,
) -> Path:
    """Execute one experiment config; returns the record JSON path."""
    if not isinstance(config, ExperimentConfig):
        config = parse_config(config)
    if seed is not None:
        raw = dict(config.raw)
        raw["seed"] = seed
        config = parse_config_dict(raw, name_hint=config.name)
    if jobs is not None:
        os.environ["QITELAB_JOBS"] = str(jobs)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results = _dispatch(config)
    record = {
        "tool": "qitelab",
        "version": __version__,
        "experiment": config.name,
        "config": config.raw,
        "config_digest": config.digest(),
        "started_at": datetime.now(timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.perf_counter() - start, 6),
        "results": results,
    }
    record_path = out_dir / f"{config.name}.json"
    _atomic_write(record_path, json.dumps(record, indent=2, sort_keys=True))
    emit_plot_data([record_path], out_dir)
    return record_path


def emit_plot_data(
    records: Sequence[str | Path], out_dir: str | Path = "."
) -> list[Path]:
    """Regenerate plot CSVs from result records; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if not records:
        print("emit_plot_data: no records given, nothing to do")
        return written
    for record_path in records:
        record = json.loads(Path(record_path).read_text(encoding="utf-8"))
        name = record["experiment"]
        results = record["results"]
        if "betas" in results:
            rows = []
            emulation = results.get("hardware_emulation")
            for index, beta in enumerate(results["betas"]):
                row = [beta, results["exact_energies"][index]]
                if emulation:
                    agg = emulation["aggregated"][index]
                    row += [
                        agg["raw_mean"], agg["raw_stderr"],
                        agg["mitigated_mean"], agg["mitigated_stderr"],
                        agg["provenance"],
                    ]
                rows.append(row)
            header = ["beta", "E_exact"]
            if emulation:
                header += [
                    "E_raw", "raw_stderr", "E_mitigated", "mitigated_stderr",
                    "provenance",
                ]
            path = out_dir / f"{name}_energy_vs_beta.csv"
            _write_csv(path, header, rows)
            written.append(path)
        if "per_run" in results and "exact_terms" in results:
            # aggregate each operator's replication series over the runs;
            # the intercept row sits at replication 0
            rows = []
            operators = list(results["per_run"][0]["series"].keys())
            n_runs = len(results["per_run"])
            for operator in operators:
                n_points = len(results["per_run"][0]["series"][operator]["points"])
                for index in range(n_points):
                    r = results["per_run"][0]["series"][operator]["points"][index][0]
                    values = [
                        run["series"][operator]["points"][index][1]
                        for run in results["per_run"]
                    ]
                    stderrs = [
                        run["series"][operator]["points"][index][2]
                        for run in results["per_run"]
                    ]
                    rows.append(
                        [operator, r, float(np.mean(values)),
                         _mean_stderr(values, stderrs)]
                    )
                intercepts = [
                    run["series"][operator]["intercept"] for run in results["per_run"]
                ]
                intercept_stds = [
                    run["series"][operator]["intercept_std"]
                    for run in results["per_run"]
                ]
                rows.append(
                    [operator, 0.0, float(np.mean(intercepts)),
                     _mean_stderr(intercepts, intercept_stds)]
                )
            path = out_dir / f"{name}_operator_vs_replication.csv"
            _write_csv(path, ["operator", "replication", "value", "stderr"], rows)
            written.append(path)
        if "branches" in results:
            for branch, rows_in in results["branches"].items():
                if not rows_in:
                    continue
                header = list(rows_in[0].keys())
                rows = [[row[key] for key in header] for row in rows_in]
                path = out_dir / f"{name}_branch{branch}.csv"
                _write_csv(path, header, rows)
                written.append(path)
        if "rows" in results and "m_convention" in results:
            rows = []
            for source, table in results["rows"].items():
                for n, entry in table.items():
                    if n == "inputs":
                        continue
                    rows.append(
                        [
                            source,
                            n,
                            entry["E_N"],
                            entry.get("LO", ""),
                            entry.get("NLO", ""),
                            entry.get("N2LO", ""),
                        ]
                    )
            path = out_dir / f"{name}_extrapolation.csv"
            _write_csv(path, ["source", "N", "E_N", "LO", "NLO", "N2LO"], rows)
            written.append(path)
        if "noiseless" in results:
            rows = [
                [
                    "noiseless",
                    "expectation",
                    results["noiseless"]["energies_from_expectation"][0],
                    0.0,
                ],
                [
                    "noiseless",
                    "eigenvalue",
                    results["noiseless"]["energies_from_eigenvalues"][0],
                    0.0,
                ],
            ]
            sampled = results.get("sampled")
            if sampled:
                for tag in ("raw", "roem"):
                    key = f"{tag}_expectation_route_mean"
                    if key in sampled:
                        rows.append(
                            [
                                tag,
                                "expectation",
                                sampled[key],
                                sampled[f"{tag}_expectation_route_stderr"],
                            ]
                        )
                        rows.append(
                            [
                                tag,
                                "eigenvalue",
                                sampled[f"{tag}_eigenvalue_route_mean"],
                                sampled[f"{tag}_eigenvalue_route_stderr"],
                            ]
                        )
            path = out_dir / f"{name}_qlanczos.csv"
            _write_csv(path, ["provenance", "route", "energy", "stderr"], rows)
            written.append(path)
    return written


def run_calibration(
    noise_config: str | Path, out_dir: str | Path = ".", seed: int | None = None
) -> Path:
    """Standalone readout calibration from a small YAML description."""
    path = Path(noise_config)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    qubits = _require(data, "qubit_count", int, "calibration")
    shots = _optional(data, "shots", int, 8192, "calibration")
    seed = seed if seed is not None else _optional(data, "seed", int, 0, "calibration")
    noise_section = data.get("noise") or {}
    noise = NoiseModel.uniform(
        p01=_optional(noise_section, "p01", float, 0.0, "calibration.noise"),
        p10=_optional(noise_section, "p10", float, 0.0, "calibration.noise"),
    )
    calibration = calibrate_readout(qubits, noise, shots, seed=seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{path.stem}_calibration.json"
    _atomic_write(out_path, json.dumps(calibration.to_json_dict(), indent=2, sort_keys=True))
    return out_path
