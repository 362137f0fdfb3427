"""Flat ``key = value`` configuration with typed defaults and env overrides.

Lines are ``key = value``; ``#`` starts a comment.  Every key may also be set
through the environment as ``SDGFUSE_`` plus the key upper-cased with dots
replaced by underscores (``cg.omega`` -> ``SDGFUSE_CG_OMEGA``).  Precedence:
defaults, then file, then environment.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

ENV_PREFIX = "SDGFUSE_"


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    if not vals:
        raise ValueError("expected a comma-separated list of integers")
    return vals


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t

    return parse


def _residuals(text: str) -> str:
    t = text.strip()
    if t in ("zero", "lidar") or (t.startswith("file:") and len(t) > 5):
        return t
    raise ValueError(f"expected zero, lidar or file:PATH, got {t!r}")


def _str(text: str) -> str:
    return text.strip()


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _odd3(v):
    return v >= 3 and v % 2 == 1


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    check: object = None
    rule: str = ""
    help: str = ""


SCHEMA: dict[str, Key] = {
    "census_window": Key(int, 5, _odd3, "odd and >= 3", "census window (px)"),
    "context_radii": Key(_int_list, (4, 16), lambda v: all(r >= 1 for r in v), "radii >= 1",
                         "box-mean context radii at 1/4 resolution"),
    "cost.census_w": Key(float, 1.0, _nonneg, ">= 0", "census term weight"),
    "cost.grad_w": Key(float, 0.25, _nonneg, ">= 0", "gradient term weight"),
    "cost.max_cost": Key(float, 2.0, _pos, "> 0", "matching cost ceiling"),
    "propagation.window": Key(int, 9, _odd3, "odd and >= 3", "window size P"),
    "propagation.dilation": Key(float, 1.0, _pos, "> 0", "lattice step (px at 1/4)"),
    "propagation.offset_source": Key(_choice("zero", "edge_aware", "external"), "edge_aware", None, "",
                                     "zero, edge_aware or external"),
    "propagation.offsets_path": Key(_str, "", None, "", "PFM stack for the external source"),
    "propagation.edge_scale": Key(float, 0.2, _pos, "> 0", "gradient giving full window shrink"),
    "propagation.temperature": Key(float, 1.0, _pos, "> 0", "softmax temperature"),
    "propagation.normalize": Key(_bool, True, None, "", "divide D_p by C_p"),
    "cg.k": Key(float, 2.0, _pos, "> 0", "modulation peak height"),
    "cg.omega": Key(float, 8.0, _pos, "> 0", "modulation width (full-res px)"),
    "cg.rho": Key(float, 0.4, lambda v: 0.0 <= v <= 1.0, "in [0, 1]", "confidence gate"),
    "cg.enable": Key(_bool, True, None, "", "apply the Gaussian modulation"),
    "volume.d_max": Key(int, 192, lambda v: v >= 8, ">= 8", "disparity count at full resolution"),
    "volume.hint_weight": Key(float, 0.5, _nonneg, ">= 0", "hint-consistency weight"),
    "volume.tau": Key(float, 4.0, _pos, "> 0", "hint-consistency saturation"),
    "volume.temperature": Key(float, 1.2, _pos, "> 0", "soft-argmin temperature"),
    "agg.p1": Key(float, 0.02, _nonneg, ">= 0", "small-step penalty"),
    "agg.p2": Key(float, 64.0, _nonneg, ">= 0", "large-step penalty"),
    "agg.paths": Key(int, 8, lambda v: v in (4, 8), "4 or 8", "paths at the coarsest level"),
    "agg.fine_paths": Key(int, 4, lambda v: v in (4, 8), "4 or 8", "paths at finer levels"),
    "agg.lambda_u": Key(float, 3.0, _nonneg, ">= 0", "uncertainty multiplier"),
    "agg.r_min": Key(float, 4.0, _nonneg, ">= 0", "minimum half-range"),
    "agg.edge_scale": Key(float, 0.05, _pos, "> 0", "intensity step halving p2"),
    "agg.fill_out_of_view": Key(_bool, True, None, "", "use hints where the match leaves the image"),
    "pyramid.levels": Key(int, 3, lambda v: v >= 1, ">= 1", "cascade levels from 1/4 down"),
    "upsample.sigma_range": Key(float, 0.05, _nonneg, ">= 0 (0 = bilinear)", "range kernel width"),
    "ddc.residuals": Key(_residuals, "lidar", None, "", "zero, lidar or file:DIR"),
    "ddc.d_eps": Key(float, 0.1, _pos, "> 0", "singular disparity threshold"),
}


def env_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


class Config:
    """Validated values for every schema key."""

    def __init__(self, values: dict | None = None):
        self._values = {k: spec.default for k, spec in SCHEMA.items()}
        for k, v in (values or {}).items():
            self.set(k, v)
        self.validate()

    def set(self, key: str, value, where: str = "") -> None:
        if key not in SCHEMA:
            raise ConfigError(f"{where}unknown config key {key!r}")
        spec = SCHEMA[key]
        if isinstance(value, str):
            try:
                value = spec.parse(value)
            except ValueError as exc:
                raise ConfigError(f"{where}{key}: {exc}") from None
        if spec.check is not None and not spec.check(value):
            raise ConfigError(f"{where}{key} = {value!r} violates: {spec.rule}")
        self._values[key] = value

    def validate(self) -> None:
        v = self._values
        if v["agg.p1"] > v["agg.p2"]:
            raise ConfigError(f"agg.p1 ({v['agg.p1']}) must not exceed agg.p2 ({v['agg.p2']})")
        if v["census_window"] % 2 == 0:
            raise ConfigError("census_window must be odd")
        if v["propagation.offset_source"] == "external" and not v["propagation.offsets_path"]:
            raise ConfigError("propagation.offset_source = external needs propagation.offsets_path")

    def __getitem__(self, key: str):
        return self._values[key]

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self._values.items()}

    def dumps(self) -> str:
        lines = []
        for k, spec in SCHEMA.items():
            v = self._values[k]
            text = ",".join(str(x) for x in v) if isinstance(v, tuple) else str(v).lower() \
                if isinstance(v, bool) else str(v)
            lines.append(f"{k} = {text}")
        return "\n".join(lines) + "\n"


def parse_text(text: str, source: str = "<config>", env=None) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        where = f"{source}:{lineno}: "
        if not sep:
            raise ConfigError(f"{where}expected 'key = value', got {raw.strip()!r}")
        cfg.set(key.strip(), value.strip(), where)
    env = os.environ if env is None else env
    for key in SCHEMA:
        name = env_name(key)
        if name in env:
            cfg.set(key, env[name], f"${name}: ")
    for name in env:
        if name.startswith(ENV_PREFIX) and name not in _ENV_KEYS and name not in _ENV_RESERVED:
            raise ConfigError(f"${name}: unknown config key")
    cfg.validate()
    return cfg


def parse_config(path=None, env=None) -> Config:
    """Read ``path`` (``None`` gives defaults plus environment overrides)."""
    if path is None:
        return parse_text("", env=env)
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), os.fspath(path), env)


def help_text() -> str:
    width = max(len(k) for k in SCHEMA)
    rows = []
    for k, spec in SCHEMA.items():
        d = spec.default
        d = ",".join(map(str, d)) if isinstance(d, tuple) else d
        rows.append(f"  {k.ljust(width)}  {d!s:<10}  {spec.help}")
    return "config keys (default, meaning):\n" + "\n".join(rows)


_ENV_KEYS = {env_name(k) for k in SCHEMA}
# process-level switches that share the prefix but are not config keys
_ENV_RESERVED = {"SDGFUSE_BACKEND", "SDGFUSE_NO_EXT"}
