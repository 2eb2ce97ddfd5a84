"""
Experiment configuration: presets and the ``key = value`` config file format.

Config files are line oriented. ``#`` starts a comment, blank lines are
ignored, list values are comma separated and DNN settings use a ``dip.``
prefix::

    # desk-scale run
    preset = desk
    snr_db = 0, 5, 10
    estimators = ls, lmmse, dip
    dip.iterations = 300
    dip.upsample = 2x1, 2x1, 1x1, 1x1, 1x1

A ``preset`` line (if any) must come first; later keys override it.
Unknown keys raise :class:`~risdip.errors.UnknownKey`.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import ChannelModel, PathlossModel, ScenarioGeometry
from .dip import DipConfig
from .errors import ConfigError, UnknownKey
from .frame import ImpairmentConfig

__all__ = [
    "ExperimentConfig",
    "paper_preset",
    "desk_preset",
    "PRESETS",
    "read_config",
    "write_config",
    "parse_config",
    "format_config",
]

ESTIMATORS = ("onoff", "ls", "lmmse", "dip")
METRIC_MODES = ("dg_block", "effective")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full scenario, estimator and Monte-Carlo parameterisation."""

    n_users: int = 4
    n_antennas: int = 32
    n_elements: int = 225
    n_subsurfaces: int = 15
    n_subcarriers: int = 64
    n_pilots: int = 16
    n_symbols: int = 16
    taps_direct: int = 6
    taps_ue_ris: int = 2
    taps_ris_bs: int = 5
    d0: float = 50.0
    d_h: tuple = (52.0, 53.0, 51.0, 52.0)
    d_v: tuple = (2.0, 3.0, 2.0, 3.0)
    carrier_ghz: float = 6.0
    element_spacing: float = 0.5
    bs_corr: float = 0.7
    ris_level: str = "element"
    pl_intercept: float = 32.4
    pl_ris_slope: float = 21.0
    pl_direct_slope: float = 31.9
    pattern: str = "dft"
    zc_root: int = 1
    interpolation: str = "linear"
    impairments: bool = False
    kappa_ue: float = 0.0
    kappa_bs: float = 0.0
    phase_noise: float = float(np.pi)
    phase_noise_mode: str = "symbol"
    ue_distortion_scope: str = "band"
    tx_power_dbm: float = 20.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    snr_reference: str = "received"
    trials: int = 100
    seed: int = 0
    estimators: tuple = ESTIMATORS
    covariance: str = "oracle"
    covariance_trials: int = 500
    metric_modes: tuple = METRIC_MODES
    output: str = "results.csv"
    dip: DipConfig = field(default_factory=DipConfig)

    def __post_init__(self):
        def bad(msg):
            raise ConfigError(msg)

        if self.n_symbols != self.n_subsurfaces + 1:
            bad(f"n_symbols must equal n_subsurfaces + 1 ({self.n_subsurfaces + 1})")
        if self.n_pilots < 2 or self.n_pilots > self.n_subcarriers:
            bad("n_pilots must lie in [2, n_subcarriers]")
        if self.n_users > self.n_subcarriers // self.n_pilots:
            bad(f"{self.n_users} users exceed the comb spacing {self.n_subcarriers // self.n_pilots}")
        if len(self.d_h) < self.n_users or len(self.d_v) < self.n_users:
            bad("need d_h and d_v entries for every user")
        if self.n_elements % self.n_subsurfaces:
            bad("n_subsurfaces must divide n_elements")
        if max(self.taps_direct, self.taps_ue_ris, self.taps_ris_bs) + 1 > self.n_subcarriers:
            bad("tap counts exceed the number of subcarriers")
        for est in self.estimators:
            if est not in ESTIMATORS:
                bad(f"unknown estimator {est!r}; choose from {ESTIMATORS}")
        for mode in self.metric_modes:
            if mode not in METRIC_MODES:
                bad(f"unknown metric mode {mode!r}")
        choices = {"pattern": ("dft",), "ris_level": ("element", "subsurface"),
                   "interpolation": ("linear", "cubic"),
                   "phase_noise_mode": ("symbol", "frame"),
                   "ue_distortion_scope": ("band", "comb"),
                   "snr_reference": ("received", "transmit"),
                   "covariance": ("oracle", "analytic")}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                bad(f"{key} must be one of {allowed}")
        if self.trials < 1:
            bad("trials must be >= 1")
        if not self.snr_db:
            bad("snr_db must not be empty")
        if self.covariance == "oracle" and "lmmse" in self.estimators and self.covariance_trials < 100:
            bad("covariance_trials must be >= 100")
        if not 0 <= self.phase_noise <= np.pi:
            bad("phase_noise must lie in [0, pi]")

    def geometry(self) -> ScenarioGeometry:
        return ScenarioGeometry(
            d0=self.d0, d_h=tuple(self.d_h[:self.n_users]), d_v=tuple(self.d_v[:self.n_users]),
            carrier_ghz=self.carrier_ghz, n_antennas=self.n_antennas,
            n_elements=self.n_elements, n_subsurfaces=self.n_subsurfaces,
            element_spacing=self.element_spacing)

    def channel_model(self) -> ChannelModel:
        pl = PathlossModel(self.pl_intercept, self.pl_ris_slope, self.pl_direct_slope)
        return ChannelModel(self.geometry(),
                            (self.taps_direct, self.taps_ue_ris, self.taps_ris_bs),
                            self.bs_corr, self.ris_level, pl)

    def impairment_config(self) -> ImpairmentConfig:
        if not self.impairments:
            return ImpairmentConfig()
        return ImpairmentConfig(self.kappa_ue, self.kappa_bs, self.phase_noise,
                                self.phase_noise_mode, self.ue_distortion_scope)

    @property
    def tx_power(self) -> float:
        return 10.0 ** ((self.tx_power_dbm - 30.0) / 10.0)


def paper_preset(**overrides) -> ExperimentConfig:
    """Full-scale scenario: U=4, K=32, 15x15 RIS in 15 sub-surfaces, N=64, T=16."""
    return replace(ExperimentConfig(), **overrides)


def desk_preset(**overrides) -> ExperimentConfig:
    """Reduced scenario that keeps every structural property of the full one."""
    base = ExperimentConfig(
        n_users=2, n_antennas=8, n_elements=16, n_subsurfaces=4,
        n_subcarriers=32, n_pilots=8, n_symbols=5,
        taps_direct=3, taps_ue_ris=1, taps_ris_bs=2,
        d_h=(52.0, 53.0), d_v=(2.0, 3.0), interpolation="cubic",
        snr_db=(0.0, 5.0, 10.0, 15.0), trials=50, covariance_trials=1000,
        dip=DipConfig(width=16, iterations=500))
    return replace(base, **overrides)


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def _parse_scalar(text, like):
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _parse_list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _parse_dip_value(name, text):
    if name == "width":
        parts = _parse_list(text)
        return int(parts[0]) if len(parts) == 1 else tuple(int(p) for p in parts)
    if name == "input_size":
        return None if text.lower() == "auto" else tuple(int(p) for p in _parse_list(text))
    if name == "upsample":
        if text.lower() == "auto":
            return None
        return tuple(tuple(int(v) for v in p.lower().split("x")) for p in _parse_list(text))
    like = {f.name: f.default for f in fields(DipConfig)}[name]
    return _parse_scalar(text, like)


def _parse_value(name, text):
    like = {f.name: f.default for f in fields(ExperimentConfig) if f.name != "dip"}[name]
    if isinstance(like, tuple):
        inner = like[0] if like else ""
        return tuple(_parse_scalar(p, inner) for p in _parse_list(text))
    return _parse_scalar(text, like)


def parse_config(text: str, base: ExperimentConfig = None) -> ExperimentConfig:
    """
    Parse config-file text into an :class:`ExperimentConfig`.

    Keys are applied on top of ``base`` (default: the full-scale defaults)
    unless the text names its own ``preset``.
    """
    top = {f.name for f in fields(ExperimentConfig)} - {"dip"}
    dip_names = {f.name for f in fields(DipConfig)}
    base = ExperimentConfig() if base is None else base
    values, dip_values = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key == "preset":
                if values or dip_values:
                    raise ConfigError(f"line {lineno}: preset must precede other keys")
                if val not in PRESETS:
                    raise ConfigError(f"line {lineno}: unknown preset {val!r}")
                base = PRESETS[val]()
            elif key.startswith("dip."):
                name = key[4:]
                if name not in dip_names:
                    raise UnknownKey(key, lineno)
                dip_values[name] = _parse_dip_value(name, val)
            elif key in top:
                values[key] = _parse_value(key, val)
            else:
                raise UnknownKey(key, lineno)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    try:
        dip = replace(base.dip, **dip_values)
        return replace(base, dip=dip, **values)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def read_config(path, base: ExperimentConfig = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join("x".join(str(i) for i in p) for p in v)
        return ", ".join(_format_value(p) for p in v)
    return str(v)


def format_config(config: ExperimentConfig) -> str:
    """Serialise every field, so that ``parse_config(format_config(c)) == c``."""
    lines = []
    for f in fields(ExperimentConfig):
        if f.name == "dip":
            continue
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    for f in fields(DipConfig):
        v = getattr(config.dip, f.name)
        if v is None:
            v = "auto"
        lines.append(f"dip.{f.name} = {_format_value(v)}")
    return "\n".join(lines) + "\n"


def write_config(config: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(config))

