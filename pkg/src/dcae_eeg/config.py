"""Run configuration: a strict JSON document with defaults for every field."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .dcae.model import DcaeConfig
from .errors import ConfigError
from .synthgen import SynthSpec


@dataclass
class Paths:
    corpus_dir: str = "corpus"
    work_dir: str = "work"


@dataclass
class Pipeline:
    fs: float = 256.0
    band_lo: float = 0.5
    band_hi: float = 70.0
    notch_hz: float = 60.0
    notch_bw: float = 2.0
    window_s: float = 2.0
    overlap: float = 0.5
    clip: float = 1.0
    bin_width_uv: float = 1.0
    dev_fraction: float = 0.2
    eval_fraction: float = 0.2


@dataclass
class Training:
    epochs: int = 50
    batch_size: int = 256
    lr: float = 0.001
    seed: int = 0
    flip_p: float = 0.5


@dataclass
class Experiment:
    loss_modes: list = field(default_factory=lambda: ["TS", "TS_FT", "TS_STFT"])
    seeds: list = field(default_factory=lambda: [0])
    stft_tolerance: float = 0.15


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    pipeline: Pipeline = field(default_factory=Pipeline)
    model: dict = field(default_factory=lambda: DcaeConfig().to_dict())
    training: Training = field(default_factory=Training)
    experiment: Experiment = field(default_factory=Experiment)
    synth: dict = field(default_factory=lambda: SynthSpec().to_dict())

    def model_config(self, loss_mode=None):
        d = dict(self.model)
        if loss_mode is not None:
            d["loss_mode"] = loss_mode
        return DcaeConfig.from_dict(d)

    def synth_spec(self, seed=None):
        d = dict(self.synth)
        if seed is not None:
            d["seed"] = seed
        return SynthSpec(**d)

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def _build(cls, doc, where):
    if not isinstance(doc, dict):
        raise ConfigError("%s must be an object" % where)
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise ConfigError("unknown keys in %s: %s" % (where, ", ".join(unknown)))
    kwargs = {}
    defaults = cls()
    for name, value in doc.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, "%s.%s" % (where, name))
        elif isinstance(current, dict) and name in ("model", "synth"):
            merged = dict(current)
            extra = sorted(set(value) - set(current))
            if extra:
                raise ConfigError("unknown keys in %s.%s: %s" % (where, name, ", ".join(extra)))
            merged.update(value)
            kwargs[name] = merged
        else:
            kwargs[name] = value
    return cls(**kwargs)


# Named presets. "tiny" is the desk-scale comparison setting; "smoke" only
# checks that every stage runs.
_TINY_MODEL = {"widths": [8, 16, 16]}
PROFILES = {
    "full": {},
    "tiny": {
        "model": _TINY_MODEL,
        "training": {"epochs": 20, "batch_size": 32},
        "experiment": {"seeds": [0, 1, 2]},
        "synth": {"n_files": 60, "duration_s": 60.0},
    },
    "smoke": {
        "model": _TINY_MODEL,
        "training": {"epochs": 2, "batch_size": 32},
        "synth": {"n_files": 4, "duration_s": 20.0},
    },
}


def _merge(base, top):
    out = dict(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, profile=None):
    """Load a JSON config (missing keys take defaults, unknown keys are rejected).

    ``profile`` names a preset from :data:`PROFILES`; keys in the file win over it.
    """
    if profile is not None and profile not in PROFILES:
        raise ConfigError("unknown profile %r (choose from %s)" % (profile, ", ".join(PROFILES)))
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    if profile is not None:
        doc = _merge(PROFILES[profile], doc)
    cfg = _build(RunConfig, doc, "config")
    try:
        cfg.model_config()
        cfg.synth_spec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
