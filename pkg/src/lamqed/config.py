"""Run configuration: INI-like sections of key = value pairs.

Frequencies are ordinary Hz (suffixes Hz/kHz/MHz/GHz accepted), powers
are dBm (optional "dBm" suffix), everything else is a plain number or
string.  Unknown sections or keys are rejected with line numbers, and
every value is range-checked when the typed objects are built.
"""

from dataclasses import dataclass

import numpy as np

from .calibration import V_P_DEFAULT, NetworkModel
from .errors import ConfigError
from .jpa import JpaModel
from .system import (BareParams, DampingRates, default_bare_params,
                     default_damping_rates)
from .units import TWO_PI, dbm_to_watts

_BARE = default_bare_params()
_DAMP = default_damping_rates()

_FREQ, _POWER, _FLOAT, _INT, _STR, _FREQ_LIST = range(6)

# (section, key) -> (type, default); _REQUIRED means no default
_REQUIRED = object()
_SCHEMA = {
    ("device", "f_ge_bare"): (_FREQ, _BARE.wbar_ge / TWO_PI),
    ("device", "f_gf_bare"): (_FREQ, _BARE.wbar_gf / TWO_PI),
    ("device", "f_r_bare"): (_FREQ, _BARE.wbar_r / TWO_PI),
    ("device", "g_ge"): (_FREQ, _BARE.g_ge / TWO_PI),
    ("device", "g_ef"): (_FREQ, _BARE.g_ef / TWO_PI),
    ("device", "gamma_c"): (_FREQ, _BARE.gamma_c / TWO_PI),
    ("damping", "kappa1"): (_FREQ, _DAMP.kappa1 / TWO_PI),
    ("damping", "kappa2"): (_FREQ, _DAMP.kappa2 / TWO_PI),
    ("damping", "gamma"): (_FREQ, _DAMP.gamma / TWO_PI),
    ("drive", "delta_f_d"): (_FREQ, _REQUIRED),
    ("drive", "p_d"): (_POWER, None),
    ("probe", "p_p"): (_POWER, -146.2),
    ("probe", "f_p"): (_FREQ, None),
    ("sweep", "p_d_min"): (_POWER, -90.0),
    ("sweep", "p_d_max"): (_POWER, -70.0),
    ("sweep", "n_p_d"): (_INT, 41),
    ("sweep", "f_p_min"): (_FREQ, 10.664e9),
    ("sweep", "f_p_max"): (_FREQ, 10.700e9),
    ("sweep", "n_f_p"): (_INT, 73),
    ("sweep", "branch"): (_INT, 4),
    ("sweep", "delta_list"): (_FREQ_LIST,
                              (-76e6, -70e6, -64e6, -56e6, -48e6)),
    ("spectrum", "half_width"): (_FREQ, 40e6),
    ("spectrum", "spacing"): (_FREQ, 50e3),
    ("spectrum", "window_half_width"): (_FREQ, 30e6),
    ("calibration", "z0"): (_FLOAT, 50.0),
    ("calibration", "z_cpw"): (_FLOAT, 52.1),
    ("calibration", "length"): (_FLOAT, 2.15e-3),
    ("calibration", "v_p"): (_FLOAT, V_P_DEFAULT),
    ("calibration", "c_in"): (_FLOAT, 15e-15),
    ("calibration", "c_c"): (_FLOAT, 4e-15),
    ("calibration", "c_j"): (_FLOAT, 8.5e-15),
    ("calibration", "i0"): (_FLOAT, 0.689e-6),
    ("calibration", "delta_max"): (_FLOAT, 1.5),
    ("calibration", "n_backbone"): (_INT, 200),
    ("calibration", "x_guess"): (_FLOAT, 1.0),
    ("calibration", "i0_guess"): (_FLOAT, 0.7e-6),
    ("calibration", "z_guess"): (_FLOAT, 50.0),
    ("calibration", "data"): (_STR, None),
    ("jpa", "f_pump"): (_FREQ, 2.0 * 10.6485e9),
    ("jpa", "rbw"): (_FREQ, 10e3),
    ("jpa", "g_s_db"): (_FLOAT, 21.0),
    ("jpa", "g_i_db"): (_FLOAT, 21.0),
    ("jpa", "p_s"): (_POWER, -147.52027),
    ("jpa", "p_p"): (_POWER, -146.2),
    ("jpa", "f_p"): (_FREQ, 10.681e9),
    ("jpa", "f_s"): (_FREQ, 10.6157e9),
    ("jpa", "linewidth"): (_FREQ, 1.210e6),
    ("jpa", "f_span"): (_FREQ, 30e6),
    ("jpa", "n_f"): (_INT, 3001),
    ("jpa", "gain_uncertainty_db"): (_FLOAT, 0.5),
    ("jpa", "data"): (_STR, None),
    ("output", "prefix"): (_STR, ""),
}

_FREQ_SUFFIX = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def _parse_number(raw, kind, where):
    text = raw.replace("−", "-").strip()
    parts = text.split()
    if kind == _FREQ:
        scale = 1.0
        if len(parts) == 2 and parts[1].lower() in _FREQ_SUFFIX:
            scale = _FREQ_SUFFIX[parts[1].lower()]
            parts = parts[:1]
        if len(parts) != 1:
            raise ConfigError("%s: expected a frequency like '10.681 GHz' "
                              "or plain Hz, got %r" % (where, raw))
        try:
            return float(parts[0]) * scale
        except ValueError:
            raise ConfigError("%s: not a number: %r" % (where, raw)) from None
    if kind == _POWER:
        if len(parts) == 2 and parts[1].lower() == "dbm":
            parts = parts[:1]
        if len(parts) != 1:
            raise ConfigError("%s: expected a power in dBm, got %r"
                              % (where, raw))
        try:
            return float(parts[0])
        except ValueError:
            raise ConfigError("%s: not a number: %r" % (where, raw)) from None
    if len(parts) != 1:
        raise ConfigError("%s: unexpected unit suffix in %r" % (where, raw))
    try:
        return int(parts[0]) if kind == _INT else float(parts[0])
    except ValueError:
        raise ConfigError("%s: not a%s number: %r"
                          % (where, "n integer" if kind == _INT else "",
                             raw)) from None


def _parse_value(raw, kind, where):
    if kind == _STR:
        return raw.strip()
    if kind == _FREQ_LIST:
        items = [s for s in raw.split(",") if s.strip()]
        if not items:
            raise ConfigError("%s: empty list" % where)
        return tuple(_parse_number(s, _FREQ, where) for s in items)
    return _parse_number(raw, kind, where)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: every schema key has a value."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    # ---------------------------------------------------- typed builders

    def bare_params(self) -> BareParams:
        v = self.values
        return BareParams(wbar_ge=TWO_PI * v[("device", "f_ge_bare")],
                          wbar_gf=TWO_PI * v[("device", "f_gf_bare")],
                          wbar_r=TWO_PI * v[("device", "f_r_bare")],
                          g_ge=TWO_PI * v[("device", "g_ge")],
                          g_ef=TWO_PI * v[("device", "g_ef")],
                          gamma_c=TWO_PI * v[("device", "gamma_c")])

    def damping_rates(self) -> DampingRates:
        v = self.values
        return DampingRates(kappa1=TWO_PI * v[("damping", "kappa1")],
                            kappa2=TWO_PI * v[("damping", "kappa2")],
                            gamma=TWO_PI * v[("damping", "gamma")])

    def delta_omega_d(self):
        return TWO_PI * self.values[("drive", "delta_f_d")]

    def drive_power_watts(self):
        p = self.values[("drive", "p_d")]
        return None if p is None else float(dbm_to_watts(p))

    def probe_power_watts(self):
        return float(dbm_to_watts(self.values[("probe", "p_p")]))

    def network_model(self) -> NetworkModel:
        v = self.values
        return NetworkModel(z0=v[("calibration", "z0")],
                            z_cpw=v[("calibration", "z_cpw")],
                            l=v[("calibration", "length")],
                            v_p=v[("calibration", "v_p")],
                            c_in=v[("calibration", "c_in")],
                            c_c=v[("calibration", "c_c")],
                            c_j=v[("calibration", "c_j")],
                            i0=v[("calibration", "i0")])

    def jpa_model(self) -> JpaModel:
        v = self.values
        return JpaModel(omega_a=TWO_PI * v[("jpa", "f_pump")],
                        b=TWO_PI * v[("jpa", "rbw")],
                        g_s=10.0 ** (v[("jpa", "g_s_db")] / 10.0),
                        g_i=10.0 ** (v[("jpa", "g_i_db")] / 10.0))

    # ---------------------------------------------------- echo for CSVs

    def echo_lines(self):
        """Deterministic 'section.key = value' lines for CSV metadata."""
        lines = []
        for (section, key) in sorted(self.values):
            value = self.values[(section, key)]
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ",".join("%.12g" % x for x in value)
            elif isinstance(value, float):
                text = "%.12g" % value
            else:
                text = str(value)
            lines.append("%s.%s = %s" % (section, key, text))
        return lines


def _required_keys():
    return ["[%s] %s" % (s, k) for (s, k), (_, d) in sorted(_SCHEMA.items())
            if d is _REQUIRED]


def parse_config(text) -> RunConfig:
    """Parse and validate configuration text.

    Raises ConfigError with the offending line number for syntax
    errors, unknown sections/keys, duplicate keys, bad units, and
    missing required keys; an empty config lists the required keys.
    """
    sections = {s for (s, _) in _SCHEMA}
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in sections:
                raise ConfigError("line %d: unknown section [%s]"
                                  % (lineno, section))
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value', got %r"
                              % (lineno, raw))
        if section is None:
            raise ConfigError("line %d: key outside any [section]" % lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip().lower()
        if (section, key) not in _SCHEMA:
            raise ConfigError("line %d: unknown key '%s' in section [%s]"
                              % (lineno, key, section))
        if (section, key) in values:
            raise ConfigError("line %d: duplicate key '%s' in section [%s]"
                              % (lineno, key, section))
        kind, _ = _SCHEMA[(section, key)]
        where = "line %d: %s.%s" % (lineno, section, key)
        values[(section, key)] = _parse_value(raw_value, kind, where)

    if not values:
        raise ConfigError("config is empty; required keys: %s"
                          % ", ".join(_required_keys()))
    missing = [(s, k) for (s, k), (_, d) in _SCHEMA.items()
               if d is _REQUIRED and (s, k) not in values]
    if missing:
        raise ConfigError("missing required keys: %s"
                          % ", ".join("[%s] %s" % sk for sk in sorted(missing)))
    for sk, (_, default) in _SCHEMA.items():
        if sk not in values:
            values[sk] = default

    cfg = RunConfig(values=values)
    # materialize the typed objects now so invariant violations surface
    # as config errors with the key spelled out
    try:
        cfg.bare_params()
        cfg.damping_rates()
        cfg.network_model()
        cfg.jpa_model()
    except Exception as exc:
        raise ConfigError("invalid parameter values: %s" % exc) from exc
    for grid_key, n_key in ((("sweep", "p_d_min"), ("sweep", "n_p_d")),
                            (("sweep", "f_p_min"), ("sweep", "n_f_p"))):
        if values[n_key] < 1:
            raise ConfigError("%s.%s must be >= 1" % n_key)
    if values[("jpa", "n_f")] < 4:
        raise ConfigError("jpa.n_f must be >= 4")
    return cfg


def probe_grid(cfg: RunConfig):
    """Probe-frequency grid (rad/s) from the sweep section."""
    lo = cfg[("sweep", "f_p_min")]
    hi = cfg[("sweep", "f_p_max")]
    n = cfg[("sweep", "n_f_p")]
    if n == 1:
        return TWO_PI * np.array([lo])
    if not hi > lo:
        raise ConfigError("sweep.f_p_max must exceed sweep.f_p_min")
    return TWO_PI * np.linspace(lo, hi, n)


def drive_grid_dbm(cfg: RunConfig):
    """Drive-power grid (dBm) from the sweep section."""
    lo = cfg[("sweep", "p_d_min")]
    hi = cfg[("sweep", "p_d_max")]
    n = cfg[("sweep", "n_p_d")]
    if n == 1:
        return np.array([lo])
    if not hi > lo:
        raise ConfigError("sweep.p_d_max must exceed sweep.p_d_min")
    return np.linspace(lo, hi, n)
