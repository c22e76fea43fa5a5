"""Experiment configuration: YAML schema, validation, and object builders."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .channel import GF2, FiniteStateChannel, MemoryChannel, ModulationMap, to_fsc
from .noise import (BivariateGaussianNoise, BivariateStudentNoise,
                    GilbertElliottNoise)

EXPERIMENT_KINDS = ("metrics", "polarize", "theorem4", "rate", "ber",
                    "fig3", "fig4")


class ConfigError(ValueError):
    """Schema violation in an experiment configuration."""


_TOP_KEYS = {"experiment", "noise", "modulation", "lengths", "samples",
             "seed", "output_dir", "amplitudes", "rate", "quantization",
             "t0_grid", "indices", "plots"}
_REQUIRED = {"experiment", "noise", "output_dir"}
_NOISE_KEYS = {
    "gaussian": {"type", "var", "rho", "sigma"},
    "student": {"type", "sigma_row", "nu"},
    "gilbert_elliott": {"type", "transition", "error_probs"},
}
_MOD_KEYS = {"type", "amplitude", "a0", "a1"}


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    noise: dict
    output_dir: str
    modulation: dict = field(default_factory=dict)
    lengths: tuple = ()
    samples: int = 10_000
    seed: int = 0
    amplitudes: tuple = ()
    rate: float | None = None
    quantization: dict = field(default_factory=dict)
    t0_grid: tuple = ()
    indices: tuple = ()
    plots: bool = False


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    _reject_unknown(raw, _TOP_KEYS, "config")
    missing = _REQUIRED - set(raw)
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    kind = raw["experiment"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; "
                          f"expected one of {EXPERIMENT_KINDS}")
    noise = raw["noise"]
    if not isinstance(noise, dict) or "type" not in noise:
        raise ConfigError("noise section must be a mapping with a 'type'")
    ntype = noise["type"]
    if ntype not in _NOISE_KEYS:
        raise ConfigError(f"unknown noise type {ntype!r}")
    _reject_unknown(noise, _NOISE_KEYS[ntype], f"noise({ntype})")
    mod = raw.get("modulation", {})
    if mod:
        _reject_unknown(mod, _MOD_KEYS, "modulation")
    quant = raw.get("quantization", {})
    if quant:
        _reject_unknown(quant, {"bins", "out_bins"}, "quantization")
    lengths = tuple(int(v) for v in raw.get("lengths", ()))
    for L in lengths:
        if L < 2 or L & (L - 1):
            raise ConfigError(f"lengths must be powers of 2 >= 2, got {L}")
    samples = int(raw.get("samples", 10_000))
    if samples < 100:
        raise ConfigError("samples must be at least 100")
    rate = raw.get("rate")
    if rate is not None:
        rate = float(rate)
        if not 0.0 < rate <= 1.0:
            raise ConfigError("rate must lie in (0, 1]")
    cfg = ExperimentConfig(
        kind=kind, noise=dict(noise), output_dir=str(raw["output_dir"]),
        modulation=dict(mod), lengths=lengths, samples=samples,
        seed=int(raw.get("seed", 0)),
        amplitudes=tuple(float(a) for a in raw.get("amplitudes", ())),
        rate=rate, quantization=dict(quant),
        t0_grid=tuple(float(t) for t in raw.get("t0_grid", ())),
        indices=tuple(int(i) for i in raw.get("indices", ())),
        plots=bool(raw.get("plots", False)))
    # physics parameters must be explicit
    build_noise(cfg)
    return cfg


def build_noise(cfg: ExperimentConfig):
    n = cfg.noise
    t = n["type"]
    try:
        if t == "gaussian":
            if "sigma" in n:
                return BivariateGaussianNoise(n["sigma"])
            if "rho" not in n:
                raise ConfigError("gaussian noise needs 'rho' (and 'var') "
                                  "or an explicit 'sigma'")
            return BivariateGaussianNoise.from_rho(float(n["rho"]),
                                                   float(n.get("var", 1.0)))
        if t == "student":
            if "sigma_row" not in n or "nu" not in n:
                raise ConfigError("student noise needs 'sigma_row' and 'nu'")
            return BivariateStudentNoise.from_first_row(
                [float(v) for v in n["sigma_row"]], float(n["nu"]))
        if "transition" not in n or "error_probs" not in n:
            raise ConfigError("gilbert_elliott noise needs 'transition' "
                              "and 'error_probs'")
        return GilbertElliottNoise(n["transition"], n["error_probs"])
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"invalid noise parameters: {e}") from e


def build_modulation(cfg: ExperimentConfig, amplitude: float | None = None):
    m = cfg.modulation
    t = m.get("type", "gf2" if cfg.noise["type"] == "gilbert_elliott"
              else "antipodal")
    if t == "gf2":
        return GF2
    if t == "antipodal":
        a = amplitude if amplitude is not None else m.get("amplitude")
        if a is None:
            raise ConfigError("antipodal modulation needs an amplitude")
        return ModulationMap.antipodal(float(a))
    if t == "levels":
        if "a0" not in m or "a1" not in m:
            raise ConfigError("levels modulation needs a0 and a1")
        return ModulationMap(float(m["a0"]), float(m["a1"]))
    raise ConfigError(f"unknown modulation type {t!r}")


def build_channel(cfg: ExperimentConfig, amplitude: float | None = None):
    """MemoryChannel for continuous noise, else the noise process itself."""
    noise = build_noise(cfg)
    if isinstance(noise, GilbertElliottNoise):
        return noise
    mod = build_modulation(cfg, amplitude)
    if mod == GF2:
        raise ConfigError("gf2 modulation requires gilbert_elliott noise")
    return MemoryChannel(noise, mod)


def build_fsc(cfg: ExperimentConfig, amplitude: float | None = None
              ) -> FiniteStateChannel:
    ch = build_channel(cfg, amplitude)
    if isinstance(ch, GilbertElliottNoise):
        return to_fsc(ch, mod=build_modulation(cfg, amplitude))
    bins = cfg.quantization.get("bins")
    if bins is None:
        raise ConfigError("continuous noise requires quantization.bins "
                          "for trellis experiments")
    return to_fsc(ch, bins=int(bins),
                  out_bins=cfg.quantization.get("out_bins"))
