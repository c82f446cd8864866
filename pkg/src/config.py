"""Configuration management for CardioVAE."""

from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .dsp.spectral import check_cola
from .exceptions import ConfigError, InvalidArgumentError
from .signals.siggen import HeartParams, LungParams
from .vae.model import VAEArchitecture
from .vae.trainer import TrainingConfig


class RunConfig(BaseSettings):
    """Every tunable of a pipeline run, loaded from a flat config file and the environment."""

    model_config = SettingsConfigDict(
        env_prefix="CARDIOVAE_",
        case_sensitive=False,
        extra="forbid",
        validate_default=True,
    )

    # Analysis
    sample_rate: int = Field(default=4000, gt=0)
    n_fft: int = Field(default=256)
    hop: int = Field(default=64)
    floor: float = Field(default=1e-5, gt=0)

    # Synthetic corpus
    duration: float = Field(default=60.0, gt=0)
    heart_rate_bpm: float = Field(default=60.0, gt=0)
    heart_s1_freq: float = Field(default=70.0, gt=0)
    heart_s2_freq: float = Field(default=120.0, gt=0)
    heart_s1_s2_interval: float = Field(default=0.3, gt=0)
    heart_decay: float = Field(default=35.0, gt=0)
    heart_jitter_pct: float = Field(default=0.0, ge=0, lt=50)
    lung_breaths_per_min: float = Field(default=12.0, gt=0)
    lung_band_low: float = Field(default=150.0, gt=0)
    lung_band_high: float = Field(default=800.0, gt=0)
    lung_inhale_exhale_ratio: float = Field(default=0.5, gt=0)
    heart_gain: float = Field(default=1.0)
    lung_gain: float = Field(default=0.6)
    wav_encoding: str = Field(default="float32")

    # Model
    latent_dim: int = Field(default=8, ge=1)
    hidden_sizes: List[int] = Field(default=[64, 32])
    beta: float = Field(default=1.0, ge=0)

    # Training
    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps_hat: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=200, ge=1)
    kl_warmup_epochs: int = Field(default=0, ge=0)
    snapshot_stride: int = Field(default=10, ge=1)
    checkpoint_stride: int = Field(default=10, ge=1)

    # Latent analysis and separation
    cluster_count: int = Field(default=2, ge=1, le=4)
    perplexity: float = Field(default=30.0, gt=0)
    tsne_iters: int = Field(default=1000, ge=250)
    tsne_learning_rate: float = Field(default=200.0, gt=0)
    tsne_max_points: int = Field(default=1500, ge=4)
    restarts: int = Field(default=10, ge=1)
    separation_mode: str = Field(default="wiener")

    seed: int = Field(default=7, ge=0)

    # Logging
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="json")

    @field_validator("hidden_sizes", mode="before")
    @classmethod
    def _split_hidden_sizes(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("hidden_sizes")
    @classmethod
    def _check_hidden_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(h < 1 for h in value):
            raise ValueError(f"hidden sizes must be a non-empty list of positive ints, got {value}")
        return value

    @field_validator("n_fft")
    @classmethod
    def _check_n_fft(cls, value: int) -> int:
        if value < 4 or value & (value - 1):
            raise ValueError(f"n_fft must be a power of two >= 4, got {value}")
        return value

    @field_validator("wav_encoding")
    @classmethod
    def _check_encoding(cls, value: str) -> str:
        if value not in ("pcm16", "float32"):
            raise ValueError(f"wav_encoding must be pcm16 or float32, got {value!r}")
        return value

    @field_validator("separation_mode")
    @classmethod
    def _check_mode(cls, value: str) -> str:
        if value not in ("hard", "wiener"):
            raise ValueError(f"separation_mode must be hard or wiener, got {value!r}")
        return value

    @field_validator("log_format")
    @classmethod
    def _check_log_format(cls, value: str) -> str:
        if value not in ("json", "console"):
            raise ValueError(f"log_format must be json or console, got {value!r}")
        return value

    @model_validator(mode="after")
    def _check_cross_field(self) -> "RunConfig":
        try:
            check_cola(self.n_fft, self.hop)
        except InvalidArgumentError as exc:
            raise ValueError(str(exc)) from exc
        nyquist = self.sample_rate / 2
        for name in ("heart_s1_freq", "heart_s2_freq", "lung_band_low", "lung_band_high"):
            if getattr(self, name) >= nyquist:
                raise ValueError(f"{name} {getattr(self, name)} Hz must lie below Nyquist {nyquist} Hz")
        if self.heart_s1_s2_interval >= 60.0 / self.heart_rate_bpm:
            raise ValueError(
                f"heart_s1_s2_interval {self.heart_s1_s2_interval} s must be shorter "
                f"than the beat period {60.0 / self.heart_rate_bpm:g} s"
            )
        if self.lung_band_low >= self.lung_band_high:
            raise ValueError("lung_band_low must be below lung_band_high")
        if self.duration * self.sample_rate < self.n_fft:
            raise ValueError("duration is shorter than one analysis window")
        return self

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def heart_params(self) -> HeartParams:
        return HeartParams(
            rate_bpm=self.heart_rate_bpm,
            s1_freq=self.heart_s1_freq,
            s2_freq=self.heart_s2_freq,
            s1_s2_interval=self.heart_s1_s2_interval,
            decay=self.heart_decay,
            jitter_pct=self.heart_jitter_pct,
        )

    @property
    def lung_params(self) -> LungParams:
        return LungParams(
            breaths_per_min=self.lung_breaths_per_min,
            band_low=self.lung_band_low,
            band_high=self.lung_band_high,
            inhale_exhale_ratio=self.lung_inhale_exhale_ratio,
        )

    @property
    def architecture(self) -> VAEArchitecture:
        return VAEArchitecture(
            input_dim=self.n_bins,
            latent_dim=self.latent_dim,
            hidden_sizes=tuple(self.hidden_sizes),
        )

    @property
    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            beta=self.beta,
            seed=self.seed,
            beta1=self.beta1,
            beta2=self.beta2,
            eps_hat=self.eps_hat,
            snapshot_stride=self.snapshot_stride,
            kl_warmup_epochs=self.kl_warmup_epochs,
        )

    def to_text(self) -> str:
        """Render in the flat ``key = value`` format accepted by :func:`load_config`."""
        lines = []
        for key, value in self.model_dump().items():
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(values: Optional[Dict[str, object]] = None) -> RunConfig:
    """Validate explicit values (environment fills the rest) into a RunConfig."""
    try:
        return RunConfig(**(values or {}))
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from exc


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """Load a flat config file (optional) and apply explicit overrides on top."""
    values: Dict[str, object] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        values.update(parse_config_text(text, str(path)))
    if overrides:
        values.update(overrides)
    return build_config(values)
