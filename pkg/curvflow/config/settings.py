import json
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.exceptions import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TensorSettings(_Section):
    tol: float = 1e-12


class JetSettings(_Section):
    default_degree: int = Field(6, ge=2)
    perturbation: float = 0.1
    complex_step: float = 1e-20
    identity_tol: float = 1e-8


class CatalogSettings(_Section):
    structure_constant: float = Field(2.0, gt=0)


class FlowControls(_Section):
    """Integration controls and event thresholds for one trajectory"""

    horizon: float = Field(10.0, gt=0)
    rtol: float = 1e-9
    atol: float = 1e-9
    initial_step: float = 1e-3
    min_step: float = 1e-14
    max_step: float = 1e3
    max_steps: int = 200000
    safety: float = 0.9
    max_factor: float = 5.0
    min_factor: float = 0.2
    monotonicity_tol: float = 1e-9
    blowup_threshold: float = 1e6
    collapse_threshold: float = 1e-6
    curvature_bound: float = 1e3
    conv_tol: float = 1e-10
    stop_on_converged: bool = True
    quasi_window: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _check_steps(self) -> "FlowControls":
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("require 0 < min_step <= initial_step <= max_step")
        return self


class SymbolSettings(_Section):
    threshold_atol: float = 1e-4


class EstimatesSettings(_Section):
    grids: List[int] = [64, 128, 256]
    band_limit: int = 8
    corpus_size: int = 200
    seed: int = 0
    spectral_tol: float = 1e-13


class MonitoringSettings(_Section):
    status_interval_seconds: int = 5
    log_level: str = "INFO"
    telemetry_enabled: bool = True
    metrics_path: Optional[str] = None


class OutputSettings(_Section):
    output_dir: str = "./runs"
    emit_pi2_units: bool = True


class Settings(_Section):
    tensor: TensorSettings = TensorSettings()
    jet: JetSettings = JetSettings()
    catalog: CatalogSettings = CatalogSettings()
    flow: FlowControls = FlowControls()
    symbol: SymbolSettings = SymbolSettings()
    estimates: EstimatesSettings = EstimatesSettings()
    monitoring: MonitoringSettings = MonitoringSettings()
    output: OutputSettings = OutputSettings()

    @classmethod
    def load_from_file(cls, filepath: str) -> "Settings":
        """Load settings from a YAML or JSON file"""
        return cls._validated(_read_structured(filepath), filepath)

    @classmethod
    def _validated(cls, data, source: str):
        try:
            return cls.model_validate(data or {})
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration in {source}: {e}") from e


class ExperimentConfig(_Section):
    """One experiment run; the published schema of the command-line surface"""

    subcommand: Literal[
        "identities", "symbol", "functionals", "flow", "blowup", "sweep", "estimates"
    ]
    model: Optional[str] = None
    family: Optional[str] = None
    params: Dict[str, float] = {}
    alpha: float = 0.5
    alphas: List[float] = []
    theta0: Optional[List[float]] = None
    theta0s: List[List[float]] = []
    controls: FlowControls = FlowControls()
    seeds: List[int] = [0]
    n: int = 4
    degree: int = 6
    a: Optional[float] = None
    atol: Optional[float] = None
    xi: Optional[List[float]] = None
    count: int = 5
    workers: int = Field(4, ge=1)
    inequality: Optional[str] = None
    grids: List[int] = []
    band_limit: Optional[int] = None
    estimate_params: Dict[str, Any] = {}
    output: Optional[str] = None

    @classmethod
    def load_from_file(cls, filepath: str) -> "ExperimentConfig":
        """Load an experiment description from a YAML or JSON file"""
        data = _read_structured(filepath)
        try:
            return cls.model_validate(data or {})
        except ValidationError as e:
            raise ConfigError(f"Invalid experiment config in {filepath}: {e}") from e


def _read_structured(filepath: str):
    with open(filepath, "r", encoding="utf-8") as f:
        if filepath.endswith(".json"):
            return json.load(f)
        if filepath.endswith((".yaml", ".yml")):
            return yaml.safe_load(f)
    raise ConfigError(f"Unsupported file format: {filepath}")


# Default settings instance
settings = Settings()
