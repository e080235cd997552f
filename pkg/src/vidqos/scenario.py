"""Scenario files: TOML or JSON documents describing users, system and runs.

Units in files are Hz, bits/s, seconds, and dB for SNR (converted to linear
internally).  Validation is strict: unknown keys are rejected, and every
error names the full key path of the offending entry.  Parse errors keep
the parser's own line/column information.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .cellsim import CellScenario, DmosMap, QosClass
from .errors import ScenarioError
from .fading import EmpiricalSamples, FadingDistribution, Rayleigh
from .qos import DEFAULT_COHERENCE_TIME_S, QosTarget
from .ratequality import LogCurve, RateQualityCurve, ShiftedPowerCurve, TabulatedCurve


@dataclass(frozen=True)
class UserSpec:
    user_id: str
    target: QosTarget
    dist: FadingDistribution
    curve: RateQualityCurve


@dataclass(frozen=True)
class SystemConfig:
    total_bandwidth_hz: float
    coherence_time_s: float = DEFAULT_COHERENCE_TIME_S


@dataclass(frozen=True)
class GridSpec:
    values: tuple[float, ...]


@dataclass(frozen=True)
class SseSweep:
    mean_snr_db: float
    delay_bounds_s: GridSpec
    violation_probs: GridSpec


@dataclass(frozen=True)
class ServiceRegionSweep:
    user_ids: tuple[str, str]
    snr_min_db: float
    snr_max_db: float
    n_points: int


@dataclass(frozen=True)
class DensitySweep:
    densities_per_m2: tuple[float, ...]
    realizations: int


@dataclass(frozen=True)
class SweepConfig:
    sse: SseSweep | None = None
    service_region: ServiceRegionSweep | None = None
    density: DensitySweep | None = None


@dataclass(frozen=True)
class AdmitConfig:
    new_user: UserSpec
    policy: str = "sum"


@dataclass(frozen=True)
class ValidateConfig:
    policy: str = "sum"
    n_blocks: int = 10**6
    seed: int = 0
    margin: float = 1.5


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "out"
    figures: bool = True


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    users: tuple[UserSpec, ...] = ()
    cell: CellScenario | None = None
    sweep: SweepConfig | None = None
    admit: AdmitConfig | None = None
    validate: ValidateConfig = ValidateConfig()
    output: OutputConfig = OutputConfig()
    dmos: DmosMap = DmosMap()
    seed: int = 0


def _expect_table(node, where: str) -> dict:
    if not isinstance(node, dict):
        raise ScenarioError(f"expected a table/object, got {type(node).__name__}", where)
    return node


def _reject_unknown(node: dict, allowed: set[str], where: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)}", where)


def _get(node: dict, key: str, where: str, kind, *, required=True, default=None):
    if key not in node:
        if required:
            raise ScenarioError("missing required key", f"{where}.{key}")
        return default
    value = node[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    if kind is dict and isinstance(value, dict):
        return value
    raise ScenarioError(f"expected {kind.__name__}, got {type(value).__name__}", f"{where}.{key}")


def _parse_fading(node: dict, where: str) -> FadingDistribution:
    kind = _get(node, "kind", where, str)
    if kind == "rayleigh":
        _reject_unknown(node, {"kind", "mean_snr_db"}, where)
        snr_db = _get(node, "mean_snr_db", where, float)
        return Rayleigh(10.0 ** (snr_db / 10.0))
    if kind == "empirical":
        _reject_unknown(node, {"kind", "samples"}, where)
        samples = _get(node, "samples", where, list)
        try:
            return EmpiricalSamples(tuple(float(s) for s in samples))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad samples: {exc}", f"{where}.samples") from exc
    raise ScenarioError(f"unknown fading kind {kind!r}", f"{where}.kind")


def _parse_curve(node: dict, min_rate_bps: float, where: str) -> RateQualityCurve:
    kind = _get(node, "kind", where, str)
    try:
        if kind == "logarithmic":
            _reject_unknown(node, {"kind", "gain", "ref_rate_bps"}, where)
            return LogCurve(
                gain=_get(node, "gain", where, float),
                ref_rate_bps=_get(node, "ref_rate_bps", where, float),
                min_rate_bps=min_rate_bps,
            )
        if kind == "shifted_power":
            _reject_unknown(node, {"kind", "max_quality", "scale", "exponent", "ref_rate_bps"}, where)
            return ShiftedPowerCurve(
                max_quality=_get(node, "max_quality", where, float),
                scale=_get(node, "scale", where, float),
                exponent=_get(node, "exponent", where, float),
                ref_rate_bps=_get(node, "ref_rate_bps", where, float),
                min_rate_bps=min_rate_bps,
            )
        if kind == "tabulated":
            _reject_unknown(node, {"kind", "points"}, where)
            raw = _get(node, "points", where, list)
            points = []
            for i, pair in enumerate(raw):
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise ScenarioError("each point must be [rate_bps, quality]", f"{where}.points[{i}]")
                points.append((float(pair[0]), float(pair[1])))
            return TabulatedCurve(tuple(points), min_rate_bps=min_rate_bps)
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(str(exc), where) from exc
    raise ScenarioError(f"unknown curve kind {kind!r}", f"{where}.kind")


def _parse_user(node: dict, where: str) -> UserSpec:
    _expect_table(node, where)
    _reject_unknown(node, {"id", "delay_bound_s", "violation_prob", "min_rate_bps", "fading", "curve"}, where)
    uid = _get(node, "id", where, str)
    try:
        target = QosTarget(
            delay_bound_s=_get(node, "delay_bound_s", where, float),
            violation_prob=_get(node, "violation_prob", where, float),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), where) from exc
    min_rate = _get(node, "min_rate_bps", where, float)
    if min_rate < 0:
        raise ScenarioError("min_rate_bps must be >= 0", f"{where}.min_rate_bps")
    dist = _parse_fading(_get(node, "fading", where, dict), f"{where}.fading")
    curve = _parse_curve(_get(node, "curve", where, dict), min_rate, f"{where}.curve")
    return UserSpec(uid, target, dist, curve)


def _parse_grid(node, where: str) -> GridSpec:
    if isinstance(node, list):
        vals = tuple(float(v) for v in node)
        if not vals:
            raise ScenarioError("grid list is empty", where)
        return GridSpec(vals)
    node = _expect_table(node, where)
    _reject_unknown(node, {"min", "max", "n", "log"}, where)
    lo = _get(node, "min", where, float)
    hi = _get(node, "max", where, float)
    n = _get(node, "n", where, int)
    use_log = _get(node, "log", where, bool, required=False, default=False)
    if n < 2 or not lo < hi:
        raise ScenarioError("grid needs n >= 2 and min < max", where)
    if use_log:
        if lo <= 0:
            raise ScenarioError("log grid needs min > 0", where)
        ratio = (hi / lo) ** (1.0 / (n - 1))
        vals = tuple(lo * ratio**i for i in range(n))
    else:
        step = (hi - lo) / (n - 1)
        vals = tuple(lo + step * i for i in range(n))
    return GridSpec(vals)


def _parse_cell(node: dict, total_bandwidth_hz: float, seed: int, where: str) -> CellScenario:
    _expect_table(node, where)
    allowed = {
        "radius_m", "density_per_m2", "tx_power_w", "pathloss_const_db",
        "pathloss_exponent", "noise_psd_w_per_hz", "ref_bandwidth_hz",
        "min_distance_m", "per_user_power", "seed", "classes", "curves",
    }
    _reject_unknown(node, allowed, where)
    classes = []
    for i, cnode in enumerate(_get(node, "classes", where, list)):
        cw = f"{where}.classes[{i}]"
        _expect_table(cnode, cw)
        _reject_unknown(cnode, {"name", "delay_bound_s", "violation_prob", "fraction"}, cw)
        try:
            target = QosTarget(
                _get(cnode, "delay_bound_s", cw, float),
                _get(cnode, "violation_prob", cw, float),
            )
        except ValueError as exc:
            raise ScenarioError(str(exc), cw) from exc
        classes.append(QosClass(_get(cnode, "name", cw, str), target, _get(cnode, "fraction", cw, float)))
    curves = []
    for i, knode in enumerate(_get(node, "curves", where, list)):
        kw = f"{where}.curves[{i}]"
        _expect_table(knode, kw)
        _reject_unknown(knode, {"weight", "min_rate_bps", "curve"}, kw)
        weight = _get(knode, "weight", kw, float, required=False, default=1.0)
        min_rate = _get(knode, "min_rate_bps", kw, float)
        curve = _parse_curve(_get(knode, "curve", kw, dict), min_rate, f"{kw}.curve")
        curves.append((curve, weight))
    try:
        return CellScenario(
            cell_radius_m=_get(node, "radius_m", where, float),
            user_density_per_m2=_get(node, "density_per_m2", where, float),
            tx_power_w=_get(node, "tx_power_w", where, float),
            pathloss_const_db=_get(node, "pathloss_const_db", where, float),
            pathloss_exponent=_get(node, "pathloss_exponent", where, float),
            noise_psd_w_per_hz=_get(node, "noise_psd_w_per_hz", where, float),
            total_bandwidth_hz=total_bandwidth_hz,
            qos_mix=tuple(classes),
            curve_catalog=tuple(curves),
            rng_seed=_get(node, "seed", where, int, required=False, default=seed),
            ref_bandwidth_hz=_get(node, "ref_bandwidth_hz", where, float, required=False),
            min_distance_m=_get(node, "min_distance_m", where, float, required=False, default=1.0),
            per_user_power=_get(node, "per_user_power", where, bool, required=False, default=True),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), where) from exc


def _parse_sweep(node: dict, users: tuple[UserSpec, ...], where: str) -> SweepConfig:
    _expect_table(node, where)
    _reject_unknown(node, {"sse", "service_region", "density"}, where)
    sse = None
    if "sse" in node:
        w = f"{where}.sse"
        sub = _expect_table(node["sse"], w)
        _reject_unknown(sub, {"mean_snr_db", "delay_bounds_s", "violation_probs"}, w)
        for key in ("delay_bounds_s", "violation_probs"):
            if key not in sub:
                raise ScenarioError("missing required key", f"{w}.{key}")
        sse = SseSweep(
            mean_snr_db=_get(sub, "mean_snr_db", w, float),
            delay_bounds_s=_parse_grid(sub["delay_bounds_s"], f"{w}.delay_bounds_s"),
            violation_probs=_parse_grid(sub["violation_probs"], f"{w}.violation_probs"),
        )
    region = None
    if "service_region" in node:
        w = f"{where}.service_region"
        sub = _expect_table(node["service_region"], w)
        _reject_unknown(sub, {"users", "snr_min_db", "snr_max_db", "n"}, w)
        pair = _get(sub, "users", w, list)
        if len(pair) != 2 or not all(isinstance(u, str) for u in pair):
            raise ScenarioError("expected two user ids", f"{w}.users")
        known = {u.user_id for u in users}
        for uid in pair:
            if uid not in known:
                raise ScenarioError(f"unknown user id {uid!r}", f"{w}.users")
        region = ServiceRegionSweep(
            user_ids=(pair[0], pair[1]),
            snr_min_db=_get(sub, "snr_min_db", w, float),
            snr_max_db=_get(sub, "snr_max_db", w, float),
            n_points=_get(sub, "n", w, int),
        )
        if region.n_points < 2 or not region.snr_min_db < region.snr_max_db:
            raise ScenarioError("need n >= 2 and snr_min_db < snr_max_db", w)
    density = None
    if "density" in node:
        w = f"{where}.density"
        sub = _expect_table(node["density"], w)
        _reject_unknown(sub, {"densities_per_m2", "realizations"}, w)
        vals = _get(sub, "densities_per_m2", w, list)
        density = DensitySweep(
            densities_per_m2=tuple(float(v) for v in vals),
            realizations=_get(sub, "realizations", w, int, required=False, default=1),
        )
        if not density.densities_per_m2 or density.realizations < 1:
            raise ScenarioError("need at least one density and one realization", w)
    return SweepConfig(sse=sse, service_region=region, density=density)


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file (.toml or .json)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            doc = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"TOML parse error: {exc}", str(path)) from exc
    elif path.suffix.lower() == ".json":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                str(path),
            ) from exc
    else:
        raise ScenarioError(f"unsupported scenario format {path.suffix!r} (use .toml or .json)")
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> Scenario:
    _expect_table(doc, "<root>")
    _reject_unknown(
        doc,
        {"system", "users", "cell", "sweep", "admit", "validate", "output", "dmos", "seed"},
        "<root>",
    )
    seed = _get(doc, "seed", "<root>", int, required=False, default=0)

    sysnode = _expect_table(_get(doc, "system", "<root>", dict), "system")
    _reject_unknown(sysnode, {"total_bandwidth_hz", "coherence_time_s"}, "system")
    system = SystemConfig(
        total_bandwidth_hz=_get(sysnode, "total_bandwidth_hz", "system", float),
        coherence_time_s=_get(sysnode, "coherence_time_s", "system", float,
                              required=False, default=DEFAULT_COHERENCE_TIME_S),
    )
    if system.total_bandwidth_hz <= 0 or system.coherence_time_s <= 0:
        raise ScenarioError("bandwidth and coherence time must be > 0", "system")

    users: list[UserSpec] = []
    seen: set[str] = set()
    for i, unode in enumerate(doc.get("users", [])):
        spec = _parse_user(unode, f"users[{i}]")
        if spec.user_id in seen:
            raise ScenarioError(f"duplicate user id {spec.user_id!r}", f"users[{i}].id")
        seen.add(spec.user_id)
        users.append(spec)

    cell = None
    if "cell" in doc:
        cell = _parse_cell(doc["cell"], system.total_bandwidth_hz, seed, "cell")

    sweep = None
    if "sweep" in doc:
        sweep = _parse_sweep(doc["sweep"], tuple(users), "sweep")
        if sweep.density is not None and cell is None:
            raise ScenarioError("density sweep requires a [cell] section", "sweep.density")

    admit = None
    if "admit" in doc:
        w = "admit"
        node = _expect_table(doc["admit"], w)
        _reject_unknown(node, {"policy", "new_user"}, w)
        policy = _get(node, "policy", w, str, required=False, default="sum")
        if policy not in ("sum", "fair"):
            raise ScenarioError(f"policy must be 'sum' or 'fair', got {policy!r}", f"{w}.policy")
        new_user = _parse_user(_get(node, "new_user", w, dict), f"{w}.new_user")
        if new_user.user_id in seen:
            raise ScenarioError(f"new user id {new_user.user_id!r} collides with an existing user",
                                f"{w}.new_user.id")
        admit = AdmitConfig(new_user=new_user, policy=policy)

    validate = ValidateConfig()
    if "validate" in doc:
        w = "validate"
        node = _expect_table(doc["validate"], w)
        _reject_unknown(node, {"policy", "n_blocks", "seed", "margin"}, w)
        policy = _get(node, "policy", w, str, required=False, default="sum")
        if policy not in ("sum", "fair"):
            raise ScenarioError(f"policy must be 'sum' or 'fair', got {policy!r}", f"{w}.policy")
        validate = ValidateConfig(
            policy=policy,
            n_blocks=_get(node, "n_blocks", w, int, required=False, default=10**6),
            seed=_get(node, "seed", w, int, required=False, default=seed),
            margin=_get(node, "margin", w, float, required=False, default=1.5),
        )

    output = OutputConfig()
    if "output" in doc:
        w = "output"
        node = _expect_table(doc["output"], w)
        _reject_unknown(node, {"out_dir", "figures"}, w)
        output = OutputConfig(
            out_dir=_get(node, "out_dir", w, str, required=False, default="out"),
            figures=_get(node, "figures", w, bool, required=False, default=True),
        )

    dmos = DmosMap()
    if "dmos" in doc:
        w = "dmos"
        node = _expect_table(doc["dmos"], w)
        _reject_unknown(node, {"scale", "offset"}, w)
        dmos = DmosMap(
            scale=_get(node, "scale", w, float, required=False, default=-2.0),
            offset=_get(node, "offset", w, float, required=False, default=20.0),
        )

    return Scenario(
        system=system,
        users=tuple(users),
        cell=cell,
        sweep=sweep,
        admit=admit,
        validate=validate,
        output=output,
        dmos=dmos,
        seed=seed,
    )
