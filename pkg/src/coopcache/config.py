"""Flat ``key = value`` experiment configuration in human units.

Densities are per km^2, powers dBm/MHz (transmit power also W/MHz or total
W), bandwidth MHz and backhaul delay ms. Conversion to the internal SI units
happens in :meth:`ExperimentConfig.network`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .model import FileLibrary, NetworkParams, dbm_to_watt, extend_interference, per_km2
from .montecarlo import SimConfig
from .popularity import ZipfParams, load_trace, zipf_popularity

SWEEP_VARS = ("C", "rho", "lambda", "nu", "D_BH", "K")
SCHEME_NAMES = ("greedy", "hitmax", "noncoop")
POWER_UNITS = ("W_per_MHz", "dBm_per_MHz", "W_total")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text):
    out = []
    for part in (p.strip() for p in text.replace(";", ",").split(",")):
        if not part:
            continue
        if ":" in part:
            lo, hi = (int(x) for x in part.split(":"))
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    # network
    rho_per_km2: float = 50.0
    lambda_per_km2: float = 500.0
    P_T: float = 1.0
    P_T_unit: str = "W_per_MHz"
    alpha: float = 4.0
    sigma2_dbm_per_mhz: float = -105.0
    interference_dbm_per_mhz: tuple = (-75.0, -70.0, -68.0)
    interference_policy: str = "hold"
    W_mhz: float = 10.0
    D_BH_ms: float = 200.0
    K: int = 3
    # library
    popularity: str = "zipf"
    F: int = 1000
    nu: float = 1.0
    trace_path: str = ""
    s: int = 1000
    L_bits: float = 1000.0
    # placement and sweeps
    C: int = 50000
    scheme: str = "greedy"
    schemes: tuple = SCHEME_NAMES
    sweep_var: str = "C"
    sweep_values: tuple = (1000.0, 5000.0, 20000.0, 50000.0, 100000.0, 200000.0, 500000.0)
    K_range: tuple = tuple(range(1, 11))
    D_BH_sweep_ms: tuple = ()
    # monte carlo
    sim_region_side_m: float = 2000.0
    sim_drops: int = 100
    sim_users: int = 100
    sim_mode: str = "load"
    seed: int = 0
    lambda_sweep_per_km2: tuple = (250.0, 500.0, 1000.0)
    workers: int = 1

    def __post_init__(self):
        checks = [
            ("P_T_unit", self.P_T_unit in POWER_UNITS, f"one of {POWER_UNITS}"),
            ("interference_policy", self.interference_policy in ("hold", "strict"), "hold or strict"),
            ("popularity", self.popularity in ("zipf", "trace"), "zipf or trace"),
            ("trace_path", self.popularity != "trace" or bool(self.trace_path), "required for trace popularity"),
            ("scheme", self.scheme in SCHEME_NAMES, f"one of {SCHEME_NAMES}"),
            ("schemes", bool(self.schemes) and set(self.schemes) <= set(SCHEME_NAMES), f"subset of {SCHEME_NAMES}"),
            ("sweep_var", self.sweep_var in SWEEP_VARS, f"one of {SWEEP_VARS}"),
            ("sim_mode", self.sim_mode in ("load", "request"), "load or request"),
            ("K", self.K >= 1, "must be >= 1"),
            ("C", self.C >= 0, "must be >= 0"),
            ("workers", self.workers >= 1, "must be >= 1"),
            ("K_range", bool(self.K_range) and min(self.K_range) >= 1, "positive cluster sizes"),
            ("interference_dbm_per_mhz", bool(self.interference_dbm_per_mhz), "need at least one value"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, f"{getattr(self, key)!r} invalid ({msg})")

    # conversions ------------------------------------------------------------

    def transmit_density(self):
        """Transmit power in W/MHz."""
        if self.P_T_unit == "W_per_MHz":
            return self.P_T
        if self.P_T_unit == "dBm_per_MHz":
            return float(dbm_to_watt(self.P_T))
        return self.P_T / self.W_mhz

    def interference_dbm(self, K=None):
        K = self.K if K is None else K
        try:
            return extend_interference(self.interference_dbm_per_mhz, K, self.interference_policy)
        except ValueError as err:
            raise ConfigError("interference_dbm_per_mhz", str(err)) from None

    def network(self, K=None) -> NetworkParams:
        K = self.K if K is None else K
        try:
            return NetworkParams(
                rho=per_km2(self.rho_per_km2),
                lam=per_km2(self.lambda_per_km2),
                P_T=self.transmit_density(),
                alpha=self.alpha,
                sigma2=float(dbm_to_watt(self.sigma2_dbm_per_mhz)),
                I=tuple(float(x) for x in dbm_to_watt(self.interference_dbm(K))),
                W=self.W_mhz * 1e6,
                D_BH=self.D_BH_ms / 1e3,
                K=K,
            )
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError("network", str(err)) from None

    def library(self) -> FileLibrary:
        if self.popularity == "zipf":
            try:
                pop = zipf_popularity(ZipfParams(self.F, self.nu))
            except ValueError as err:
                raise ConfigError("nu" if "nu" in str(err) else "F", str(err)) from None
        else:
            pop = load_trace(Path(self.trace_path))
        try:
            return FileLibrary(pop, self.s, self.L_bits)
        except ValueError as err:
            raise ConfigError("s", str(err)) from None

    def sim(self) -> SimConfig:
        try:
            return SimConfig(self.sim_region_side_m, self.sim_drops, self.sim_users, self.seed)
        except ValueError as err:
            raise ConfigError("sim", str(err)) from None

    def with_sweep_value(self, value):
        """Copy with the sweep variable set to ``value`` (given in human units)."""
        key = {"rho": "rho_per_km2", "lambda": "lambda_per_km2", "D_BH": "D_BH_ms"}.get(self.sweep_var, self.sweep_var)
        if key in ("C", "K"):
            if float(value) != int(value):
                raise ConfigError("sweep_values", f"{self.sweep_var} needs integers, got {value!r}")
            value = int(value)
        return dataclasses.replace(self, **{key: value})

    def items(self):
        return [(f.name, _fmt(getattr(self, f.name))) for f in fields(self)]


_PARSERS = {}
for _f in fields(ExperimentConfig):
    _default = _f.default
    if _f.name in ("schemes",):
        _PARSERS[_f.name] = _names
    elif _f.name in ("K_range",):
        _PARSERS[_f.name] = _ints
    elif isinstance(_default, tuple):
        _PARSERS[_f.name] = _floats
    elif isinstance(_default, bool):
        _PARSERS[_f.name] = lambda t: t.lower() in ("1", "true", "yes")
    elif isinstance(_default, int):
        _PARSERS[_f.name] = int
    elif isinstance(_default, float):
        _PARSERS[_f.name] = float
    else:
        _PARSERS[_f.name] = str


def parse_pairs(pairs, source="config"):
    """``[(key, text)]`` to typed values; errors name the key."""
    out = {}
    for key, text in pairs:
        if key not in _PARSERS:
            raise ConfigError(key, f"unknown key in {source}")
        try:
            out[key] = _PARSERS[key](text.strip())
        except ValueError:
            raise ConfigError(key, f"cannot parse {text.strip()!r}") from None
    return out


def read_config_text(text, source="config"):
    pairs, seen = [], set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value' in {source}")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in seen:
            raise ConfigError(key, f"given twice in {source}")
        seen.add(key)
        pairs.append((key, value))
    return parse_pairs(pairs, source)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Defaults, then the file, then ``key=value`` overrides (which win)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError("config", f"cannot read {path}: {err.strerror}") from None
        values.update(read_config_text(text, str(path)))
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value))
    values.update(parse_pairs(pairs, "overrides"))
    return ExperimentConfig(**values)
