"""Run configuration: a YAML tree of per-module sections plus named presets."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import yaml

from .edges import EdgeConfig
from .errors import InvalidInputError
from .events import IweConfig
from .objectives import ObjectiveConfig
from .optimizer import HandoverConfig, PyramidSpec, SolverConfig


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha: float = 20.0
    beta: float = 35.0
    gamma: float = 0.0025


@dataclass(frozen=True)
class RunConfig:
    objective: ObjectiveWeights = ObjectiveWeights()
    iwe: IweConfig = IweConfig()
    edges: EdgeConfig = EdgeConfig()
    pyramid: PyramidSpec = PyramidSpec()
    handover: HandoverConfig = HandoverConfig()
    solver: SolverConfig = SolverConfig()
    n_events: int = 30_000
    events_only: bool = False

    def __post_init__(self):
        if self.n_events < 1:
            raise InvalidInputError("n_events must be >= 1")

    def objective_config(self) -> ObjectiveConfig:
        o = self.objective
        beta = 0.0 if self.events_only else o.beta
        return ObjectiveConfig(o.alpha, beta, o.gamma, self.iwe)

    def to_dict(self) -> dict:
        def plain(v):
            if isinstance(v, (frozenset, set)):
                return sorted(v)
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            return v

        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                out[f.name] = {k: plain(x) for k, x in dataclasses.asdict(v).items()}
            else:
                out[f.name] = v
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict | None, base: "RunConfig | None" = None) -> "RunConfig":
        """Overlay ``data`` on ``base`` (defaults when omitted); unknown keys are errors."""
        base = base or cls()
        data = data or {}
        if not isinstance(data, dict):
            raise InvalidInputError("config root must be a mapping")
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name in known:
            cur = getattr(base, name)
            if name not in data:
                kwargs[name] = cur
                continue
            val = data[name]
            if dataclasses.is_dataclass(cur):
                if not isinstance(val, dict):
                    raise InvalidInputError(f"section {name!r} must be a mapping")
                sub = {f.name for f in dataclasses.fields(cur)}
                bad = set(val) - sub
                if bad:
                    raise InvalidInputError(f"unknown keys in {name!r}: {sorted(bad)}")
                merged = {**dataclasses.asdict(cur), **val}
                if name == "pyramid":
                    merged["levels"] = tuple(tuple(lv) for lv in merged["levels"])
                try:
                    kwargs[name] = type(cur)(**merged)
                except TypeError as exc:
                    raise InvalidInputError(f"bad section {name!r}: {exc}") from None
            else:
                kwargs[name] = type(cur)(val)
        return cls(**kwargs)

    @classmethod
    def load(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise InvalidInputError(f"{path}: {exc}") from None
        return cls.from_dict(data, base)


def _preset(alpha, beta, gamma, n_events, low, high) -> RunConfig:
    return RunConfig(objective=ObjectiveWeights(alpha, beta, gamma),
                     edges=EdgeConfig(canny_low=low, canny_high=high), n_events=n_events)


PRESETS = {
    "mvsec-indoor": _preset(20.0, 35.0, 0.0025, 30_000, 100.0, 200.0),
    "mvsec-outdoor": _preset(20.0, 35.0, 0.0025, 40_000, 30.0, 80.0),
    "ecd": _preset(60.0, 60.0, 0.0, 30_000, 100.0, 200.0),
    "dsec": _preset(2000.0, 4000.0, 0.0, 1_500_000, 30.0, 80.0),
}


def get_preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
