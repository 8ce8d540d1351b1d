"""Paired ablation runs sharing one seed, executed concurrently in worker processes."""
import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

from logging_utils import get_logger, setup_logging
from models.schemas import RunMetrics, Scenario, VelocitySource
from orchestration.orchestrator import RunResult, run_scenario
from utils.file_utils import write_comparison
from utils.metrics import comparison_table

logger = get_logger()


class AblationToggle(str, Enum):
    CONTACT_FACTOR = "contact_factor"
    VELOCITY_SOURCE = "velocity_source"
    NONE = "none"


@dataclass
class AblationResult:
    runs: List[Tuple[str, RunMetrics]]
    table: pd.DataFrame
    exit_codes: List[int]

    @property
    def exit_code(self) -> int:
        return max(self.exit_codes) if self.exit_codes else 0


def ablation_variants(scenario: Scenario, toggle: AblationToggle) -> List[Tuple[str, Scenario]]:
    """
    The (label, scenario) pair for a toggle; the baseline comes first.

    Only estimator or feedback options change between the two, never the seed.
    """
    estimator = scenario.estimator
    if toggle is AblationToggle.CONTACT_FACTOR:
        enabled = estimator.model_copy(update={"enabled": True})
        return [
            ("contact_factors_off", scenario.model_copy(update={
                "estimator": enabled.model_copy(update={"contact_factors": False})})),
            ("contact_factors_on", scenario.model_copy(update={
                "estimator": enabled.model_copy(update={"contact_factors": True})})),
        ]
    if toggle is AblationToggle.VELOCITY_SOURCE:
        return [
            ("ground_truth", scenario.model_copy(update={
                "estimator": estimator.model_copy(update={"enabled": False}),
                "velocity_source": VelocitySource.GROUND_TRUTH})),
            ("estimator", scenario.model_copy(update={
                "estimator": estimator.model_copy(update={"enabled": True}),
                "velocity_source": VelocitySource.ESTIMATOR})),
        ]
    off = scenario.model_copy(update={
        "estimator": estimator.model_copy(update={"enabled": True, "contact_factors": False})})
    return [("off_a", off), ("off_b", off)]


def _run_worker(scenario: Scenario, out_dir: Optional[str], log_level: str) -> Tuple[RunMetrics, int]:
    if out_dir:
        setup_logging(log_level, str(Path(out_dir) / "logs" / "bench.log"), console_output=False)
    result: RunResult = run_scenario(scenario, Path(out_dir) if out_dir else None)
    return result.metrics, result.exit_code


async def _run_pair(variants: List[Tuple[str, Scenario]], out_dir: Optional[Path],
                    max_workers: int, log_level: str) -> List[Tuple[RunMetrics, int]]:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            loop.run_in_executor(pool, _run_worker, scenario,
                                 str(out_dir / label) if out_dir is not None else None, log_level)
            for label, scenario in variants
        ]
        # gather preserves submission order, so results stay deterministic
        return await asyncio.gather(*futures)


def run_ablation(scenario: Scenario, toggle: AblationToggle = AblationToggle.CONTACT_FACTOR,
                 out_dir: Optional[Path] = None, max_workers: int = 2) -> AblationResult:
    """
    Run the paired scenarios for a toggle and compare their contact-interval velocity errors.

    Args:
        scenario: Base scenario; its seed is shared by both runs
        toggle: Which option differs between the runs
        out_dir: Root for per-run output directories and the comparison CSV
        max_workers: Worker processes

    Returns:
        Both runs' metrics, the comparison table and their exit codes
    """
    variants = ablation_variants(scenario, toggle)
    logger.info(f"Ablation '{toggle.value}' on '{scenario.name}': "
                f"{' vs '.join(label for label, _ in variants)} (seed {scenario.seed})")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    log_level = logging.getLevelName(logger.getEffectiveLevel())
    run_root = Path(out_dir) if out_dir is not None else None
    results = asyncio.run(_run_pair(variants, run_root, max_workers, log_level))
    runs = [(label, metrics) for (label, _), (metrics, _) in zip(variants, results)]
    table = comparison_table(runs, improvement_applicable=toggle is not AblationToggle.VELOCITY_SOURCE)
    if out_dir is not None:
        write_comparison(table, Path(out_dir) / "comparison.csv")
    return AblationResult(runs=runs, table=table, exit_codes=[code for _, code in results])
