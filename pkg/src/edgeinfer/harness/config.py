"""Experiment configuration: flat ``key = value`` text with one section per experiment.

Example::

    [experiment]
    name = shuffle_dof
    master_seed = 2020
    trials = 100

    [shuffle_dof]
    K = 5, 10, 15, 20, 25
    N_f = 5
    F = 2

Only the ``[experiment]`` section and the section named by ``name`` may
appear. Every key is validated; unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from ..errors import ConfigError

EXPERIMENTS = ("shuffle_dof", "edge_power", "irs_power")
MAX_SEED = 2**64 - 1


# value parsers -----------------------------------------------------------------


def _int(raw):
    try:
        return int(raw, 0)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _float(raw):
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None


def _bool(raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _str(raw):
    return raw.strip()


def _list(item):
    def parse(raw):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a comma-separated list")
        return tuple(item(p) for p in parts)

    return parse


def _range_list(raw):
    """``a:b:step`` inclusive range or comma list of numbers."""
    if ":" in raw:
        parts = [p.strip() for p in raw.split(":")]
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {raw!r}")
        a, b, st = (_float(p) for p in parts)
        if st <= 0 or b < a:
            raise ValueError(f"invalid range {raw!r}")
        n = int(round((b - a) / st))
        return tuple(round(a + i * st, 12) for i in range(n + 1))
    return _list(_float)(raw)


# checks --------------------------------------------------------------------------


def _positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    return all(x > 0 for x in vals) or "must be positive"


def _nonneg(v):
    vals = v if isinstance(v, tuple) else (v,)
    return all(x >= 0 for x in vals) or "must be nonnegative"


def _at_least(n):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        return all(x >= n for x in vals) or f"must be >= {n}"

    return check


def _choice(*opts):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        return all(x in opts for x in vals) or f"must be one of {', '.join(opts)}"

    return check


def _distinct(v):
    return len(set(v)) == len(v) or "must not repeat values"


def _seed(v):
    return 0 <= v <= MAX_SEED or "must be a 64-bit unsigned integer"


def _finite(v):
    vals = v if isinstance(v, tuple) else (v,)
    return all(x == x and abs(x) != float("inf") for x in vals) or "must be finite"


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    checks: tuple = ()
    doc: str = ""


# schema ------------------------------------------------------------------------

EXPERIMENT_KEYS = {
    "name": Key(_str, None, (_choice(*EXPERIMENTS),), "experiment type"),
    "master_seed": Key(_int, 2020, (_seed,), "master seed for all trials"),
    "trials": Key(_int, 100, (_positive,), "Monte Carlo trials per sweep point"),
    "workers": Key(_int, 1, (_positive,), "worker processes"),
    "record_timing": Key(_bool, False, (), "write wall_ms into trials.csv (breaks byte-identical reruns)"),
}

_EDGE_COMMON = {
    "sinr_db": Key(_range_list, (0.0, 2.0, 4.0, 6.0, 8.0, 10.0), (_finite, _distinct), "target SINR sweep in dB"),
    "N_ap": Key(_int, 3, (_positive,), "number of APs"),
    "L": Key(_int, 5, (_positive,), "antennas per AP"),
    "K_u": Key(_int, 10, (_positive,), "single-antenna users"),
    "P_max": Key(_float, 1.0, (_positive,), "per-AP transmit budget in W"),
    "P_c": Key(_float, 0.45, (_nonneg,), "computation power per task in W"),
    "noise_dbm": Key(_float, -100.0, (_finite,), "receiver noise power in dBm"),
    "eta": Key(_float, 1.0, (_positive,), "power amplifier efficiency"),
    "side": Key(_float, 200.0, (_positive,), "square side in m"),
    "antenna_gain_db": Key(_float, 10.0, (_finite,), "gain on AP-user and AP-IRS links in dB"),
    "power_method": Key(_str, "auto", (_choice("auto", "conic"),), "power-min solver path"),
    "max_rounds": Key(_int, 5, (_positive,), "alternating rounds"),
    "power_tol": Key(_float, 1e-6, (_nonneg,), "keep-best improvement threshold in W"),
    "num_restarts": Key(_int, 3, (_positive,), "random phase draws tried before declaring round 1 infeasible"),
    "R": Key(_int, 1, (_positive,), "best-of-R random phase draws"),
    "num_randomizations": Key(_int, 200, (_nonneg,), "SDR Gaussian randomizations"),
    "eps_rank1": Key(_float, 1e-4, (_positive,), "DC rank-one tolerance relative to Tr V"),
    "max_dc_iter": Key(_int, 30, (_positive,), "DC iterations per phase update"),
}

SECTION_KEYS = {
    "shuffle_dof": {
        "K": Key(_list(_int), (5, 10, 15, 20, 25), (_at_least(2), _distinct), "device counts"),
        "N_f": Key(_int, 5, (_positive,), "number of files"),
        "F": Key(_int, 2, (_positive,), "files stored per device"),
        "algorithms": Key(_list(_str), ("nuclear", "dc"), (_choice("nuclear", "dc"), _distinct), "rank solvers"),
        "irs_elements": Key(_int, 0, (_nonneg,), "IRS elements on device links (0 = none)"),
        "irs_draws": Key(_int, 1, (_positive,), "random IRS phase draws, best kept"),
        "beta": Key(_float, 0.5, (_positive,), "IRS cascade variance"),
        "decoders": Key(_str, "message", (_choice("message", "receiver"),), "decoder row layout"),
        "eps_dc": Key(_float, 1e-4, (_positive,), "Ky Fan tail certifying a rank"),
        "max_dc_iter": Key(_int, 50, (_positive,), "DC steps per rank"),
        "dc_restarts": Key(_int, 1, (_nonneg,), "fresh random DC starts per rank before moving on"),
    },
    "edge_power": {
        **_EDGE_COMMON,
        "M": Key(_list(_int), (0, 25), (_nonneg, _distinct), "IRS sizes compared"),
        "phase_method": Key(_str, "random", (_choice("dc", "sdr", "random"),), "phase update used when M > 0"),
    },
    "irs_power": {
        **_EDGE_COMMON,
        "M": Key(_int, 25, (_positive,), "IRS elements"),
        "methods": Key(_list(_str), ("dc", "sdr", "random"), (_choice("dc", "sdr", "random"), _distinct), "phase methods"),
    },
}

SWEEP_KEY = {"shuffle_dof": "K", "edge_power": "sinr_db", "irs_power": "sinr_db"}


@dataclass
class ExperimentConfig:
    experiment: str
    master_seed: int
    trials: int
    workers: int = 1
    record_timing: bool = False
    params: dict = field(default_factory=dict)

    @property
    def sweep_var(self):
        return SWEEP_KEY[self.experiment]

    @property
    def sweep_values(self):
        return self.params[self.sweep_var]

    def as_text(self):
        """Canonical config text (round-trips through :func:`parse_config`)."""
        lines = ["[experiment]", f"name = {self.experiment}", f"master_seed = {self.master_seed}"]
        lines += [f"trials = {self.trials}", f"workers = {self.workers}"]
        lines += [f"record_timing = {str(self.record_timing).lower()}", "", f"[{self.experiment}]"]
        for k in SECTION_KEYS[self.experiment]:
            v = self.params[k]
            lines.append(f"{k} = {', '.join(map(str, v)) if isinstance(v, tuple) else v}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "workers": self.workers,
            "record_timing": self.record_timing,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()},
        }


def _apply(schema, raw, where):
    out = {}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"[{where}] unknown key(s): {', '.join(unknown)}; allowed: {', '.join(schema)}")
    for key, spec in schema.items():
        if key in raw:
            try:
                val = spec.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"[{where}] {key}: {exc}") from None
        else:
            val = spec.default
        if val is None:
            raise ConfigError(f"[{where}] missing required key {key!r}")
        for check in spec.checks:
            ok = check(val)
            if ok is not True:
                raise ConfigError(f"[{where}] {key} = {raw.get(key, val)!r}: {ok}")
        out[key] = val
    return out


def parse_config(text, overrides=None):
    """Validate config text; ``overrides`` maps keys to raw string values.

    Override keys are looked up in the experiment section first, then in the
    ``[experiment]`` section.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (K vs k)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    head_raw = dict(cp["experiment"])
    name = head_raw.get("name", "").strip()
    if name not in EXPERIMENTS:
        raise ConfigError(f"[experiment] name must be one of {', '.join(EXPERIMENTS)}, got {name!r}")
    extra = sorted(set(cp.sections()) - {"experiment", name})
    if extra:
        raise ConfigError(f"unexpected section(s): {', '.join(extra)}")
    body_raw = dict(cp[name]) if name in cp else {}
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k in EXPERIMENT_KEYS:
            head_raw[k] = str(v)
        elif k in SECTION_KEYS[name]:
            body_raw[k] = str(v)
        else:
            raise ConfigError(f"unknown override {k!r}")
    head = _apply(EXPERIMENT_KEYS, head_raw, "experiment")
    body = _apply(SECTION_KEYS[name], body_raw, name)
    if name == "shuffle_dof" and body["F"] > body["N_f"]:
        raise ConfigError(f"[shuffle_dof] F = {body['F']} exceeds N_f = {body['N_f']}")
    return ExperimentConfig(
        experiment=name,
        master_seed=head["master_seed"],
        trials=head["trials"],
        workers=head["workers"],
        record_timing=head["record_timing"],
        params=body,
    )


def load_config(path, overrides=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
