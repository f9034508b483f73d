"""Run settings from a ``key = value`` file.

Recognized keys (all optional; defaults describe a 20 MW / 12.5 MWh NMC pack)::

    # stress function
    form = power_law            # or tabulated, with breakpoints = table.csv
    k = 5.24e-4
    alpha = 2.03
    # battery
    charge_rating = 20          # MW, bounds charging power
    discharge_rating = 20       # MW, bounds discharging power
    energy_rating = 12.5        # MWh
    soc_min = 0.15
    soc_max = 0.95
    e0 = 1.875                  # MWh, default soc_min * energy_rating
    e_final = 1.875             # MWh, default e0
    eta_ch = 0.95
    eta_dis = 0.95
    replacement_cost_per_mwh = 300000   # or replacement_cost = <total $>
    shelf_life_years = 10
    # market
    settlement_minutes = 60     # average prices onto this interval first
    horizon_hours = 24
    reserve = false
    sustainability_time = 1     # h
    sustainability = stored     # or capacity
    epsilon_reserve = 0.1       # MW
    relax_v = auto              # auto, true or false
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dispatch import CAPACITY, STORED_ENERGY, BatteryParams, MarketScenario
from .errors import ValidationError
from .market import read_config
from .stress import StressFunction, stress_from_config

CASE_STUDY = {
    "form": "power_law",
    "k": "5.24e-4",
    "alpha": "2.03",
    "charge_rating": "20",
    "discharge_rating": "20",
    "energy_rating": "12.5",
    "soc_min": "0.15",
    "soc_max": "0.95",
    "eta_ch": "0.95",
    "eta_dis": "0.95",
    "replacement_cost_per_mwh": "300000",
    "shelf_life_years": "10",
}

_KNOWN = set(CASE_STUDY) | {
    "breakpoints", "e0", "e_final", "replacement_cost", "settlement_minutes", "horizon_hours",
    "reserve", "sustainability_time", "sustainability", "epsilon_reserve", "relax_v",
}


@dataclass(frozen=True)
class Settings:
    phi: StressFunction
    battery: BatteryParams
    scenario: MarketScenario  # prices left empty
    settlement_minutes: int | None
    horizon_hours: float


def _float(cfg: dict[str, str], key: str) -> float:
    try:
        return float(cfg[key])
    except ValueError:
        raise ValidationError(f"config key {key!r}: {cfg[key]!r} is not a number") from None


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"config key {key!r}: expected true/false, got {text!r}")


def settings_from_dict(cfg: dict[str, str], base_dir: Path | None = None) -> Settings:
    unknown = sorted(set(cfg) - _KNOWN)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(CASE_STUDY)
    merged.update(cfg)
    if merged.get("form") == "tabulated":
        merged.pop("k", None)
        merged.pop("alpha", None)
    phi = stress_from_config(merged, base_dir)

    E_rate = _float(merged, "energy_rating")
    if "replacement_cost" in cfg:
        R = _float(merged, "replacement_cost")
    else:
        R = _float(merged, "replacement_cost_per_mwh") * E_rate
    battery = BatteryParams(
        charge_rating=_float(merged, "charge_rating"),
        discharge_rating=_float(merged, "discharge_rating"),
        E_rate=E_rate,
        soc_min=_float(merged, "soc_min"),
        soc_max=_float(merged, "soc_max"),
        E0=_float(merged, "e0") if "e0" in merged else None,
        E_final=_float(merged, "e_final") if "e_final" in merged else None,
        eta_ch=_float(merged, "eta_ch"),
        eta_dis=_float(merged, "eta_dis"),
        R=R,
        shelf_life_years=_float(merged, "shelf_life_years"),
    )

    bound = merged.get("sustainability", "stored").strip().lower()
    bound = {"stored": STORED_ENERGY, STORED_ENERGY: STORED_ENERGY, CAPACITY: CAPACITY}.get(bound, bound)
    relax = merged.get("relax_v", "auto").strip().lower()
    scenario = MarketScenario(
        (),
        S=_float(merged, "sustainability_time") if "sustainability_time" in merged else 1.0,
        epsilon_reserve=_float(merged, "epsilon_reserve") if "epsilon_reserve" in merged else 0.1,
        reserve_enabled=_bool(merged["reserve"], "reserve") if "reserve" in merged else False,
        sustainability_bound=bound,
        relax_v=None if relax == "auto" else _bool(relax, "relax_v"),
    )
    settlement = int(_float(merged, "settlement_minutes")) if "settlement_minutes" in merged else None
    horizon = _float(merged, "horizon_hours") if "horizon_hours" in merged else 24.0
    return Settings(phi, battery, scenario, settlement, horizon)


def load_settings(path: str | Path | None) -> Settings:
    if path is None:
        return settings_from_dict({})
    path = Path(path)
    return settings_from_dict(read_config(path), path.parent)
