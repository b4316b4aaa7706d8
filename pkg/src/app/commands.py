"""
Command handlers behind the ifock CLI.

Every handler takes a validated RunConfig and returns a CommandResult: the
CSV rows as a DataFrame, the exit code and an optional one-line summary for
stderr. Row order is fixed by the configuration, so the same config always
produces the same bytes.
"""

import logging
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.algebra.errors import ConfigError, DegenerateShell
from src.algebra.noise_algebra import evaluate_plan, reduce_word, word_from_symbols
from src.algebra.partitions import (
    enumerate_pairings,
    format_epsilon,
    is_noncrossing,
    is_nontrivial,
    nesting_depth,
    wigner_pairing,
)
from src.app.config import Config, RunConfig
from src.physics.interacting_fock import ModuleVector, vacuum_moment
from src.physics.moment_engine import (
    CorrelatorSpec,
    bose_moment,
    convergence_study,
    limit_moment,
)
from src.physics.spectral_model import pairing_kernel, shell_roots

logger = logging.getLogger(__name__)

CROSSCHECK_THRESHOLD = 1e-4
FLOAT_FORMAT = "%.17g"
LIMIT_ROUTES = ("theorem1", "fock", "noise")


@dataclass
class CommandResult:
    frame: pd.DataFrame
    exit_code: int = 0
    summary: Optional[str] = None


def write_csv(frame: pd.DataFrame, path: Optional[str]) -> None:
    """CSV with a header row, 17 significant digits and \\n line endings; stdout when path is None."""
    target = sys.stdout if path is None else path
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _spec(config: RunConfig, p: float) -> CorrelatorSpec:
    return CorrelatorSpec(config.epsilon, tuple(config.position_times()), tuple(config.factors()), [p])


def _route_evaluators(config: RunConfig) -> Dict[str, Callable[[float], complex]]:
    """One p -> value callable per limit route; the p-independent parts are built once."""
    config.require("dispersion", "epsilon", "times", "form_factors")
    pp, disp = config.phys, config.dispersion
    times, factors = config.position_times(), config.factors()
    word = word_from_symbols(config.epsilon, times, factors)
    plan = reduce_word(word)
    element = vacuum_moment(
        config.epsilon, [ModuleVector.chi(t, g) for t, g in zip(times, factors)], pp, disp
    )
    return {
        "theorem1": lambda p: limit_moment(_spec(config, p), pp, disp).value,
        "fock": lambda p: element.evaluate(p),
        "noise": lambda p: evaluate_plan(plan, pp, disp, p),
    }


def _at_probe(p: float, compute: Callable[[], complex]) -> complex:
    try:
        return complex(compute())
    except DegenerateShell as exc:
        exc.p = p
        raise


def run_partition(config: RunConfig) -> CommandResult:
    """Non-triviality, the Wigner pairing with nesting depths and the Wick pairing count."""
    config.require("epsilon")
    eps = config.epsilon
    columns = ["pair_index", "mbar", "m", "depth"]
    count = len(enumerate_pairings(eps, max_length=Config.IFOCK_MAX_PAIRING_LENGTH))
    if not is_nontrivial(eps):
        logger.info("Trivial sequence", extra={"eps": format_epsilon(eps)})
        return CommandResult(pd.DataFrame(columns=columns), summary="trivial")

    pairing = wigner_pairing(eps)
    rows = [
        {"pair_index": i, "mbar": mbar, "m": m, "depth": nesting_depth(pairing, (mbar, m))}
        for i, (mbar, m) in enumerate(pairing.pairs, start=1)
    ]
    summary = f"non-trivial; wigner pairing {pairing.label()}; {count} pairings"
    logger.info("Partition", extra={"eps": format_epsilon(eps), "pairings": count})
    return CommandResult(pd.DataFrame(rows, columns=columns), summary=summary)


def run_moment(config: RunConfig) -> CommandResult:
    """Limit correlator per probe momentum and route."""
    evaluators = _route_evaluators(config)
    routes = LIMIT_ROUTES if config.route == "all" else (config.route,)
    rows = []
    for p in config.probe_p.values:
        for route in routes:
            value = _at_probe(p, lambda: evaluators[route](p))
            rows.append({"p": p, "re": value.real, "im": value.imag, "route": route})
    return CommandResult(pd.DataFrame(rows, columns=["p", "re", "im", "route"]))


def run_bose_moment(config: RunConfig) -> CommandResult:
    """Responseless limit correlator per probing frequency."""
    config.require("dispersion", "epsilon", "times", "form_factors", "omega_probe")
    times, factors = config.position_times(), config.factors()
    count = len(enumerate_pairings(config.epsilon, max_length=Config.IFOCK_MAX_PAIRING_LENGTH))
    rows = []
    for omega in config.omega_probe.values:
        value = bose_moment(config.epsilon, times, factors, omega, config.phys, config.dispersion)
        rows.append({"omega_probe": omega, "re": value.real, "im": value.imag, "n_pairings": count})
    return CommandResult(pd.DataFrame(rows, columns=["omega_probe", "re", "im", "n_pairings"]))


def run_prelimit(config: RunConfig) -> CommandResult:
    """
    Finite-coupling correlator per lambda, split over Wick pairings, followed
    by a lambda = 0 row holding the limit.
    """
    config.require("dispersion", "epsilon", "times", "form_factors", "lambda_list")
    if len(config.probe_p.values) != 1:
        raise ConfigError(f"prelimit needs exactly one probe momentum, got {len(config.probe_p.values)}")
    p = config.probe_p.values[0]
    spec = _spec(config, p)
    try:
        study = convergence_study(spec, config.phys, config.dispersion, config.lambda_list)
    except DegenerateShell as exc:
        exc.p = p
        raise

    columns = ["lambda", "pairing_id", "re", "im", "crossing_flag"]
    rows = []
    for row in study:
        for pairing, value in row.per_pairing.items():
            rows.append({
                "lambda": row.lam, "pairing_id": pairing.label(),
                "re": value.real, "im": value.imag,
                "crossing_flag": 0 if is_noncrossing(pairing) else 1,
            })
        rows.append({"lambda": row.lam, "pairing_id": "total",
                     "re": row.total.real, "im": row.total.imag, "crossing_flag": None})
    if study:
        limit = study[0].limit
        rows.append({"lambda": 0.0, "pairing_id": "limit",
                     "re": limit.real, "im": limit.imag, "crossing_flag": None})
    frame = pd.DataFrame(rows, columns=columns)
    frame["crossing_flag"] = frame["crossing_flag"].astype("Int64")
    return CommandResult(frame)


def max_relative_deviation(values: Sequence[complex]) -> float:
    """Largest pairwise |a - b| / max(|a|, |b|); 0 when every value vanishes."""
    worst = 0.0
    for i, a in enumerate(values):
        for b in values[i + 1:]:
            scale = max(abs(a), abs(b))
            if scale > 0:
                worst = max(worst, abs(a - b) / scale)
    return worst


def run_crosscheck(config: RunConfig) -> CommandResult:
    """All three limit routes per probe momentum; exit 1 above CROSSCHECK_THRESHOLD."""
    evaluators = _route_evaluators(config)
    rows = []
    worst = 0.0
    for p in config.probe_p.values:
        values = {route: _at_probe(p, lambda: evaluators[route](p)) for route in LIMIT_ROUTES}
        deviation = max_relative_deviation(list(values.values()))
        worst = max(worst, deviation)
        row = {"p": p}
        for route in LIMIT_ROUTES:
            row[f"{route}_re"] = values[route].real
            row[f"{route}_im"] = values[route].imag
        row["max_rel_dev"] = deviation
        rows.append(row)

    columns = ["p"] + [f"{r}_{part}" for r in LIMIT_ROUTES for part in ("re", "im")] + ["max_rel_dev"]
    exit_code = 0
    if worst > CROSSCHECK_THRESHOLD:
        logger.error("Routes disagree", extra={"max_rel_dev": worst, "threshold": CROSSCHECK_THRESHOLD})
        exit_code = 1
    else:
        logger.info("Routes agree", extra={"max_rel_dev": worst})
    return CommandResult(pd.DataFrame(rows, columns=columns), exit_code, f"max_rel_dev {worst:.3e}")


def run_kernel_scan(config: RunConfig) -> CommandResult:
    """(f|g)_p over the probe grid; tangent shells are reported as rows, not failures."""
    config.require("dispersion", "form_factors")
    pp, disp = config.phys, config.dispersion
    f, g = (config.form_factors[i] for i in config.kernel_factors)
    rows: List[dict] = []
    for p in config.probe_p.values:
        try:
            roots = shell_roots(pp, disp, p)
            value = pairing_kernel(pp, disp, f, g, p)
        except DegenerateShell as exc:
            logger.warning("Degenerate shell in scan", extra={"p": p, "k": exc.k, "jacobian": exc.jacobian})
            rows.append({"p": p, "re": np.nan, "im": np.nan, "n_roots": 0,
                         "min_jacobian": exc.jacobian, "status": "degenerate"})
            continue
        min_jacobian = min((r.jacobian for r in roots), default=np.nan)
        rows.append({"p": p, "re": value.real, "im": value.imag, "n_roots": len(roots),
                     "min_jacobian": min_jacobian, "status": "ok"})
    columns = ["p", "re", "im", "n_roots", "min_jacobian", "status"]
    return CommandResult(pd.DataFrame(rows, columns=columns))


COMMANDS: Dict[str, Callable[[RunConfig], CommandResult]] = {
    "partition": run_partition,
    "moment": run_moment,
    "bose-moment": run_bose_moment,
    "prelimit": run_prelimit,
    "crosscheck": run_crosscheck,
    "kernel-scan": run_kernel_scan,
}
