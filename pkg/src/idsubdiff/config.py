"""Scenario configuration files (TOML).

Every section and key is checked against a fixed schema; unknown keys are
errors. ``dump_config`` writes the fully resolved scenario back out so that
loading the result reproduces it field by field.
"""

import math
from dataclasses import dataclass, field

import tomli
import tomli_w

from . import coeff_lang
from .errors import ConfigError, ParseError, SubdiffError
from .exponents import Family, LawSpec
from .path_engine import DEFAULT_MAX_STEPS, Scenario
from .sampler import NoiseKind, NoiseSpec

OUTPUT_FORMATS = ("moments", "density", "report")

# section -> key -> (kind, required)
_SCHEMA = {
    "law": {"family": ("str", True), "alpha": ("num", False), "lambda": ("num", False),
            "mixture": ("pairs", False)},
    "noise": {"kind": ("str", True), "beta": ("num", False), "rate": ("num", False),
              "jump_law": ("str", False), "jump_mean": ("num", False),
              "jump_sd": ("num", False), "p": ("num", False)},
    "coefficients": {"F": ("str", False), "sigma": ("str", False), "E": ("str", False),
                     "lipschitz_bound": ("num", False), "x_box": ("numlist", False)},
    "grid": {"delta": ("num", True), "t_max": ("num", True), "obs_times": ("numlist", True),
             "max_steps": ("int", False)},
    "ensemble": {"n_paths": ("int", True), "seed": ("int", True)},
    "output": {"directory": ("str", False), "formats": ("strlist", False),
               "bins": ("int", False), "density_range": ("numlist", False)},
}
_REQUIRED_SECTIONS = ("law", "grid", "ensemble")


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "results"
    formats: tuple = OUTPUT_FORMATS
    bins: int | None = None
    density_range: tuple | None = None


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    output: OutputSpec = field(default_factory=OutputSpec)
    lipschitz_bound: float = 100.0
    x_box: tuple = (-10.0, 10.0)


def _typed(section, key, value, kind):
    where = f"[{section}] {key}"

    def num(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where}: expected a finite number, got {v!r}")
        return float(v)

    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if kind == "num":
        return num(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list, got {value!r}")
    if kind == "numlist":
        return tuple(num(v) for v in value)
    if kind == "strlist":
        if not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where}: expected a list of strings")
        return tuple(value)
    # pairs
    if not all(isinstance(v, list) and len(v) == 2 for v in value):
        raise ConfigError(f"{where}: expected a list of [weight, order] pairs")
    return tuple((num(w), num(b)) for w, b in value)


def _validate(doc):
    out = {}
    for section in doc:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; allowed: {sorted(_SCHEMA)}")
        if not isinstance(doc[section], dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in doc[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]; "
                                  f"allowed: {sorted(_SCHEMA[section])}")
    for section in _REQUIRED_SECTIONS:
        if section not in doc:
            raise ConfigError(f"missing required section [{section}]")
    for section, schema in _SCHEMA.items():
        table = doc.get(section, {})
        values = {}
        for key, (kind, required) in schema.items():
            if key in table:
                values[key] = _typed(section, key, table[key], kind)
            elif required and section in doc:
                raise ConfigError(f"missing required key {key!r} in [{section}]")
        out[section] = values
    return out


def _law(sec):
    try:
        family = Family(sec["family"])
    except ValueError:
        raise ConfigError(f"[law] family must be one of {[f.value for f in Family]}") from None
    allowed = {Family.STABLE: {"alpha"}, Family.TEMPERED: {"alpha", "lambda"},
               Family.DISTRIBUTED: {"mixture"}}[family]
    extra = set(sec) - allowed - {"family"}
    if extra:
        raise ConfigError(f"[law] keys {sorted(extra)} do not apply to family {family.value!r}")
    missing = allowed - set(sec)
    if missing:
        raise ConfigError(f"[law] family {family.value!r} needs {sorted(missing)}")
    if family is Family.STABLE:
        return LawSpec.stable(sec["alpha"])
    if family is Family.TEMPERED:
        return LawSpec.tempered(sec["alpha"], sec["lambda"])
    return LawSpec.distributed(sec["mixture"])


def _noise(sec):
    if not sec:
        return NoiseSpec.none()
    try:
        kind = NoiseKind(sec["kind"])
    except ValueError:
        raise ConfigError(f"[noise] kind must be one of {[k.value for k in NoiseKind]}") from None
    allowed = {NoiseKind.NONE: set(), NoiseKind.SYMMETRIC_STABLE: {"beta"},
               NoiseKind.COMPOUND_POISSON: {"rate", "jump_law", "jump_mean", "jump_sd", "p"}}[kind]
    extra = set(sec) - allowed - {"kind"}
    if extra:
        raise ConfigError(f"[noise] keys {sorted(extra)} do not apply to kind {kind.value!r}")
    if kind is NoiseKind.NONE:
        return NoiseSpec.none()
    if kind is NoiseKind.SYMMETRIC_STABLE:
        if "beta" not in sec:
            raise ConfigError("[noise] symmetric_stable needs beta")
        return NoiseSpec.symmetric_stable(sec["beta"])
    if "rate" not in sec:
        raise ConfigError("[noise] compound_poisson needs rate")
    params = {k: sec[k] for k in ("jump_law", "jump_mean", "jump_sd", "p") if k in sec}
    try:
        return NoiseSpec.compound_poisson(sec["rate"], **params)
    except ValueError as exc:
        if isinstance(exc, SubdiffError):
            raise
        raise ConfigError(f"[noise] jump_law must be 'gaussian' or 'two_point': {exc}") from None


def _expr(sec, key):
    source = sec.get(key, "0")
    try:
        return coeff_lang.parse(source, {"x", "t"})
    except ParseError as exc:
        raise ConfigError(f"[coefficients] {key} = {source!r}: {exc}") from exc


def config_from_dict(doc):
    """Build a :class:`RunConfig` from an already-parsed TOML document."""
    v = _validate(doc)
    coeffs = v["coefficients"]
    F, sigma, E = (_expr(coeffs, k) for k in ("F", "sigma", "E"))
    if E.depends_on("x"):
        raise ConfigError(f"[coefficients] E = {E.source!r} depends on x; the jump "
                          "coefficient may depend on t only (space-dependent E is not supported)")
    E = coeff_lang.parse(E.source, {"t"})
    grid, ens = v["grid"], v["ensemble"]
    try:
        scn = Scenario(law=_law(v["law"]), noise=_noise(v["noise"]), F=F, sigma=sigma, E=E,
                       t_max=grid["t_max"], delta=grid["delta"], obs_times=grid["obs_times"],
                       n_paths=ens["n_paths"], master_seed=ens["seed"],
                       max_steps=grid.get("max_steps", DEFAULT_MAX_STEPS))
    except ConfigError:
        raise
    except SubdiffError as exc:
        raise ConfigError(str(exc)) from exc
    o = v["output"]
    formats = o.get("formats", OUTPUT_FORMATS)
    bad = set(formats) - set(OUTPUT_FORMATS)
    if bad:
        raise ConfigError(f"[output] unknown formats {sorted(bad)}; allowed: {list(OUTPUT_FORMATS)}")
    rng = o.get("density_range")
    if rng is not None and (len(rng) != 2 or not rng[1] > rng[0]):
        raise ConfigError("[output] density_range must be [low, high] with low < high")
    bins = o.get("bins")
    if bins is not None and bins < 2:
        raise ConfigError("[output] bins must be at least 2")
    box = coeffs.get("x_box", (-10.0, 10.0))
    if len(box) != 2 or not box[1] > box[0]:
        raise ConfigError("[coefficients] x_box must be [low, high] with low < high")
    bound = coeffs.get("lipschitz_bound", 100.0)
    if not bound > 0:
        raise ConfigError("[coefficients] lipschitz_bound must be positive")
    out = OutputSpec(directory=o.get("directory", "results"), formats=tuple(formats),
                     bins=bins, density_range=rng)
    return RunConfig(scenario=scn, output=out, lipschitz_bound=bound, x_box=box)


def loads_config(text):
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    return config_from_dict(doc)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def config_to_dict(cfg):
    scn = cfg.scenario
    law = {"family": scn.law.family.value}
    if scn.law.family is Family.DISTRIBUTED:
        law["mixture"] = [list(c) for c in scn.law.mixture]
    else:
        law["alpha"] = scn.law.alpha
        if scn.law.family is Family.TEMPERED:
            law["lambda"] = scn.law.lam
    n = scn.noise
    noise = {"kind": n.kind.value}
    if n.kind is NoiseKind.SYMMETRIC_STABLE:
        noise["beta"] = n.beta
    elif n.kind is NoiseKind.COMPOUND_POISSON:
        noise.update(rate=n.rate, jump_law=n.jump_law.value, jump_mean=n.jump_mean,
                     jump_sd=n.jump_sd, p=n.p)
    output = {"directory": cfg.output.directory, "formats": list(cfg.output.formats)}
    if cfg.output.bins is not None:
        output["bins"] = cfg.output.bins
    if cfg.output.density_range is not None:
        output["density_range"] = list(cfg.output.density_range)
    return {
        "law": law,
        "noise": noise,
        "coefficients": {"F": scn.F.source, "sigma": scn.sigma.source, "E": scn.E.source,
                         "lipschitz_bound": cfg.lipschitz_bound, "x_box": list(cfg.x_box)},
        "grid": {"delta": scn.delta, "t_max": scn.t_max, "obs_times": list(scn.obs_times),
                 "max_steps": scn.max_steps},
        "ensemble": {"n_paths": scn.n_paths, "seed": scn.master_seed},
        "output": output,
    }


def dump_config(cfg):
    """TOML text of the fully resolved configuration."""
    return tomli_w.dumps(config_to_dict(cfg))


def lipschitz_check(cfg):
    """Advisory slope check of F and sigma over the configured x box."""
    scn = cfg.scenario
    t_box = (0.0, scn.t_max)
    return {label: coeff_lang.lipschitz_guard(expr, cfg.x_box, t_box, cfg.lipschitz_bound, label)
            for label, expr in (("F", scn.F), ("sigma", scn.sigma))}
