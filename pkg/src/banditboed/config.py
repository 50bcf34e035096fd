"""Campaign configuration: one flat key=value file, strictly parsed.

Defaults reproduce the reference experimental settings for each task
(arms, trials, blocks, network widths, training schedule, and the
evaluation budget).  Parsing is strict: unknown keys and malformed values
are errors, never silently replaced by defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .critic import SUB_HIDDEN
from .design_opt import BoBudget
from .mi import TrainConfig
from .priors import PriorSpec

SCHEMA_VERSION = 1

TASKS = ("md", "pe:wslts", "pe:aeg", "pe:gls")

# task -> (blocks, epochs, weight_decay, summary_dim, head_hidden)
_TASK_DEFAULTS = {
    "md": (2, 200, 1e-3, 6, (32, 32)),
    "pe:wslts": (3, 400, 1e-4, 8, (64, 32)),
    "pe:aeg": (3, 300, 1e-3, 6, (64, 32)),
    "pe:gls": (3, 300, 1e-3, 8, (64, 32)),
}


@dataclass
class CampaignConfig:
    schema_version: int = SCHEMA_VERSION
    task: str = "md"
    n_arms: int = 3
    n_trials: int = 30
    n_blocks: int = 2
    n_sim: int = 50_000
    n_val: int = 10_000
    lr: float = 1e-3
    weight_decay: float = 1e-3
    epochs: int = 200
    scheduler_factor: float = 0.5
    scheduler_patience: int = 25
    min_lr: float = 1e-6
    batch_size: int = 0
    summary_dim: int = 6
    sub_hidden: tuple[int, ...] = SUB_HIDDEN
    head_hidden: tuple[int, ...] = (32, 32)
    budget_total: int = 400
    budget_initial: int = 80
    convergence_window: int = 100
    convergence_tol: float = 0.005
    gp_refit_every: int = 5
    n_candidates: int = 4096
    seed: int = 1
    parallelism: int = 1
    out_dir: str = "runs/campaign"

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if not (2 <= self.n_arms):
            raise ValueError("n_arms must be >= 2")
        if self.n_blocks < 1 or self.n_trials < 1:
            raise ValueError("n_blocks and n_trials must be >= 1")
        if not (1 <= self.n_val < self.n_sim):
            raise ValueError(f"need 1 <= n_val < n_sim, got {self.n_val}/{self.n_sim}")
        if self.budget_initial > self.budget_total:
            raise ValueError("budget_initial cannot exceed budget_total")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @classmethod
    def for_task(cls, task: str, **overrides) -> "CampaignConfig":
        """Reference defaults for a task, with explicit overrides on top."""
        if task not in _TASK_DEFAULTS:
            raise ValueError(f"task must be one of {TASKS}, got {task!r}")
        blocks, epochs, wd, summary, head = _TASK_DEFAULTS[task]
        base = dict(
            task=task, n_blocks=blocks, epochs=epochs, weight_decay=wd,
            summary_dim=summary, head_hidden=head,
        )
        base.update(overrides)
        return cls(**base)

    # -- derived pieces ----------------------------------------------------

    def prior_spec(self) -> PriorSpec:
        if self.task == "md":
            return PriorSpec(task="md")
        return PriorSpec(task="pe", model=self.task.split(":", 1)[1])

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            scheduler_factor=self.scheduler_factor,
            scheduler_patience=self.scheduler_patience,
            min_lr=self.min_lr,
            batch_size=self.batch_size,
        )

    def budget(self) -> BoBudget:
        return BoBudget(
            total=self.budget_total,
            initial=self.budget_initial,
            window=self.convergence_window,
            tol=self.convergence_tol,
        )


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, text: str, target_type) -> object:
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
        # tuple of ints
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise ValueError(f"malformed value for {name!r}: {text!r}") from err


def serialize_config(config: CampaignConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(config, f.name))}" for f in fields(config)]
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> CampaignConfig:
    """Parse a key=value config; unknown keys and bad values are errors."""
    field_types = {f.name: f.type for f in fields(CampaignConfig)}
    type_map = {
        "int": int, "float": float, "str": str, "tuple[int, ...]": tuple,
    }
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in field_types:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, val, type_map[field_types[key]])
    return CampaignConfig(**values)


def load_config(path: str | Path) -> CampaignConfig:
    return parse_config(Path(path).read_text())


def save_config(config: CampaignConfig, path: str | Path) -> None:
    Path(path).write_text(serialize_config(config))
