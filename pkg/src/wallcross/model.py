"""Model files: lattice, chambers, named central charges and run parameters."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .integrals import QuadSpec
from .lattice import CentralCharge, Lattice
from .stability import Spectrum


class ModelError(ValueError):
    """Malformed model; the message starts with the JSON path of the fault."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _rational(x, path) -> Fraction:
    if isinstance(x, bool):
        raise ModelError(path, "expected a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelError(path, f"cannot parse rational {x!r}") from None
    raise ModelError(path, "rationals are integers or 'p/q' strings")


def _rational_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _complex(x, path) -> complex:
    if (isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                    for v in x)):
        return complex(float(x[0]), float(x[1]))
    raise ModelError(path, "complex numbers are [re, im] pairs")


@dataclass
class Chamber:
    omega: dict                 # charge -> Fraction (as written, before doubling)
    doubled: bool = True

    def spectrum(self, label: str = "") -> Spectrum:
        return Spectrum(self.omega, self.doubled, label)


@dataclass
class NamedZ:
    values: list                # complex per basis element
    chamber: str
    positive: bool = True

    def central_charge(self) -> CentralCharge:
        return CentralCharge(self.values)


@dataclass
class Model:
    pairing: list
    chambers: dict
    central_charges: dict
    params: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.pairing)

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.pairing)

    def z(self, name: str | None = None) -> tuple:
        """(name, CentralCharge, Spectrum) for a named entry (default: the first)."""
        if name is None:
            name = next(iter(self.central_charges))
        if name not in self.central_charges:
            raise ModelError("$.central_charges", f"no entry named {name!r}")
        e = self.central_charges[name]
        return name, e.central_charge(), self.chambers[e.chamber].spectrum(e.chamber)

    def z_for_chamber(self, chamber: str) -> tuple:
        for name, e in self.central_charges.items():
            if e.chamber == chamber:
                return self.z(name)
        raise ModelError("$.central_charges", f"no central charge in chamber {chamber!r}")

    def quad(self) -> QuadSpec:
        return QuadSpec(**self.params.get("quad", {}))

    def param(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        return {
            "lattice": {"rank": self.rank, "pairing": [list(r) for r in self.pairing]},
            "chambers": {k: {"doubled": c.doubled,
                             "omega": [{"charge": list(a), "value": _rational_str(v)}
                                       for a, v in sorted(c.omega.items())]}
                         for k, c in self.chambers.items()},
            "central_charges": {k: {"values": [[v.real, v.imag] for v in e.values], "chamber": e.chamber,
                                    "positive": e.positive}
                                for k, e in self.central_charges.items()},
            "params": self.params,
        }


def parse_model(d) -> Model:
    if not isinstance(d, dict):
        raise ModelError("$", "model must be a JSON object")
    for key in ("lattice", "chambers", "central_charges"):
        if key not in d:
            raise ModelError(f"$.{key}", "missing")
    lat = d["lattice"]
    pairing = lat.get("pairing") if isinstance(lat, dict) else None
    if not isinstance(pairing, list) or not pairing:
        raise ModelError("$.lattice.pairing", "expected a square integer matrix")
    n = len(pairing)
    if lat.get("rank", n) != n:
        raise ModelError("$.lattice.rank", f"rank {lat.get('rank')} does not match the pairing size {n}")
    for i, row in enumerate(pairing):
        if not isinstance(row, list) or len(row) != n or not all(isinstance(x, int) for x in row):
            raise ModelError(f"$.lattice.pairing[{i}]", "expected a row of integers")
    for i in range(n):
        for j in range(n):
            if pairing[i][j] != -pairing[j][i]:
                raise ModelError(f"$.lattice.pairing[{i}][{j}]", "pairing is not skew-symmetric")
    chambers = {}
    if not isinstance(d["chambers"], dict) or not d["chambers"]:
        raise ModelError("$.chambers", "expected a nonempty object")
    for name, c in d["chambers"].items():
        p = f"$.chambers.{name}"
        if not isinstance(c, dict) or not isinstance(c.get("omega"), list):
            raise ModelError(f"{p}.omega", "expected a list of {charge, value}")
        om = {}
        for k, e in enumerate(c["omega"]):
            q = f"{p}.omega[{k}]"
            a = e.get("charge") if isinstance(e, dict) else None
            if not isinstance(a, list) or len(a) != n or not all(isinstance(x, int) for x in a):
                raise ModelError(f"{q}.charge", f"expected {n} integers")
            if not any(a):
                raise ModelError(f"{q}.charge", "zero charge")
            om[tuple(a)] = _rational(e.get("value"), f"{q}.value")
        doubled = c.get("doubled", True)
        if not isinstance(doubled, bool):
            raise ModelError(f"{p}.doubled", "expected a boolean")
        try:
            Spectrum(om, doubled)
        except ValueError as exc:
            raise ModelError(f"{p}.omega", str(exc)) from None
        chambers[name] = Chamber(om, doubled)
    zs = {}
    if not isinstance(d["central_charges"], dict) or not d["central_charges"]:
        raise ModelError("$.central_charges", "expected a nonempty object")
    for name, e in d["central_charges"].items():
        p = f"$.central_charges.{name}"
        if not isinstance(e, dict) or not isinstance(e.get("values"), list) or len(e["values"]) != n:
            raise ModelError(f"{p}.values", f"expected {n} [re, im] pairs")
        vals = [_complex(v, f"{p}.values[{k}]") for k, v in enumerate(e["values"])]
        ch = e.get("chamber")
        if ch not in chambers:
            raise ModelError(f"{p}.chamber", f"unknown chamber {ch!r}")
        pos = e.get("positive", True)
        if pos and not all(v.imag > 0 for v in vals):
            raise ModelError(f"{p}.values", "marked positive but not in the upper half-plane")
        zs[name] = NamedZ(vals, ch, pos)
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise ModelError("$.params", "expected an object")
    if "quad" in params:
        try:
            QuadSpec(**params["quad"])
        except (TypeError, ValueError) as exc:
            raise ModelError("$.params.quad", str(exc)) from None
    return Model([list(r) for r in pairing], chambers, zs, params)


BUNDLED = {"a2": "a2.json"}


def load_model(path) -> Model:
    """Load a model from a path, or a bundled model by name ("a2")."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        text = resources.files("wallcross").joinpath("data").joinpath(BUNDLED[str(path)]).read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ModelError("$", f"cannot read {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError("$", f"invalid JSON: {exc}") from None
    return parse_model(d)


# deterministic report formatting ----------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return json.dumps(str(v))
        s = format(v, ".17g")
        if "e" not in s and "." not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(v, Fraction):
        return json.dumps(_rational_str(v))
    if isinstance(v, complex):
        return _fmt([v.real, v.imag])
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if hasattr(v, "item"):
        return _fmt(v.item())
    raise TypeError(f"cannot format {type(v).__name__}")


def dumps(obj) -> str:
    """JSON with floats at 17 significant digits; key order as given."""
    return _fmt(obj) + "\n"


def num(x) -> str:
    return format(float(x), ".17g")
