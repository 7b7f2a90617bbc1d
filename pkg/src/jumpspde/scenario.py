"""Scenario files: sectioned key/value config with explicit defaults.

Field specs (u0, jump fields, perturbations) use a small mini-language:

    zero                       the zero field
    modes:a1,a2,...            sine coefficients (zero padded)
    bump:amp,center,width      amp * exp(-((x - center)/width)^2)
    singular:amp,center,exp    amp * |x - center|^(-exp), floored at h/2 on the grid

Jump fields list one spec per atom separated by ``|``.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields as dc_fields
from typing import Optional, Sequence

import numpy as np

from .noise import JumpSpec, WienerSpec
from .scalar_monotone import CATALOG, MonotoneFn, from_name
from .solver import Problem, Regime
from .spectral import Field, SpectralBasis
from .verify import Thresholds

DEFAULTS = {
    "drift": {"name": "cubic", "c": "1.0", "p": "4.0"},
    "space": {"n_modes": "32", "n_grid": "0"},
    "time": {"T": "1.0", "dt": "0.001"},
    "wiener": {"sigma": "0.5", "beta": "1.0", "cutoff": "0"},
    "jumps": {"weights": "2.0, 1.0", "marks": "", "fields": "modes:0.5 | modes:0,0.3"},
    "u0": {"field": "modes:1.0,0.5"},
    "solver": {"lambdas": "0.1, 0.05, 0.025, 0.0125, 0.00625", "tol_picard": "1e-10",
               "max_picard": "200", "kappa": "0.5", "formulation": "hidden", "require_regime": "true"},
    "experiment": {"samples": "64", "seed": "20240601"},
    "simulate": {"lambda": "", "sample": "0"},
    "bj": {"thetas": "1, 4, 16", "amplitudes": "1, 2, 8", "q_values": "2, 4"},
    "continuity": {"scales": "1, 0.5, 0.25, 0.125", "lambda": "0.00625", "du0": "modes:0.2,0.1",
                   "dsigma": "0.1", "dfields": "modes:0.1 | modes:0,0.05"},
    "generalized": {"levels": "1, 2, 4, 8", "cutoffs": "", "lambda": "0.00625"},
    "oracle": {"c": "1.0", "lambda": "0.1", "refine": "2"},
    "thresholds": {f.name: repr(f.default) for f in dc_fields(Thresholds)},
}


class ScenarioError(ValueError):
    """Validation failed; ``errors`` holds one 'section.key: message' line per problem."""

    def __init__(self, errors: Sequence[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(errors))
        self.errors = list(errors)


# field mini-language ----------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def parse_field(spec: str, basis: SpectralBasis) -> Field:
    kind, _, args = spec.strip().partition(":")
    kind = kind.strip().lower()
    vals = _floats(args)
    if kind == "zero":
        return basis.zeros()
    if kind == "modes":
        if len(vals) > basis.n_modes:
            raise ValueError(f"{len(vals)} coefficients given but the basis has {basis.n_modes} modes")
        c = np.zeros(basis.n_modes)
        c[:len(vals)] = vals
        return basis.field(c)
    if kind == "bump":
        amp, center, width = _need(vals, 3, kind)
        if width <= 0:
            raise ValueError("bump width must be > 0")
        return basis.from_function(lambda x: amp * np.exp(-((x - center) / width) ** 2))
    if kind == "singular":
        amp, center, expo = _need(vals, 3, kind)
        floor = basis.h / 2
        return basis.from_function(lambda x: amp * np.maximum(np.abs(x - center), floor) ** (-expo))
    raise ValueError(f"unknown field kind {kind!r} (use zero, modes, bump or singular)")


def _need(vals, n, kind):
    if len(vals) != n:
        raise ValueError(f"{kind} needs {n} numbers, got {len(vals)}")
    return vals


def field_in_Lq(spec: str, q: float) -> bool:
    """Whether the continuum field described by ``spec`` lies in L_q(0,1)."""
    kind, _, args = spec.strip().partition(":")
    if kind.strip().lower() != "singular":
        return True
    amp, _, expo = _floats(args)
    return amp == 0 or expo * q < 1


def _atoms(text: str) -> list[str]:
    return [s.strip() for s in text.split("|") if s.strip()]


# scenario ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Scenario:
    config: configparser.ConfigParser

    def get(self, section: str, key: str) -> str:
        return self.config.get(section, key)

    def getfloat(self, section: str, key: str) -> float:
        return self.config.getfloat(section, key)

    def getint(self, section: str, key: str) -> int:
        return self.config.getint(section, key)

    def floats(self, section: str, key: str) -> list[float]:
        return _floats(self.get(section, key))

    @property
    def lambdas(self) -> list[float]:
        return self.floats("solver", "lambdas")

    @property
    def samples(self) -> int:
        return self.getint("experiment", "samples")

    @property
    def seed(self) -> int:
        return self.getint("experiment", "seed")

    @property
    def dt(self) -> float:
        return self.getfloat("time", "dt")

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(**{f.name: self.getfloat("thresholds", f.name) for f in dc_fields(Thresholds)})

    def picard_kw(self) -> dict:
        return {"tol": self.getfloat("solver", "tol_picard"), "max_iter": self.getint("solver", "max_picard"),
                "kappa": self.getfloat("solver", "kappa"), "formulation": self.get("solver", "formulation")}

    def drift(self, name: Optional[str] = None) -> MonotoneFn:
        return from_name(name or self.get("drift", "name"), c=self.getfloat("drift", "c"),
                         p=self.getfloat("drift", "p"))

    def basis(self) -> SpectralBasis:
        return SpectralBasis(self.getint("space", "n_modes"), self.getint("space", "n_grid"))

    def wiener(self, basis: SpectralBasis, sigma: Optional[float] = None) -> WienerSpec:
        cutoff = self.getint("wiener", "cutoff") or None
        sigma = self.getfloat("wiener", "sigma") if sigma is None else sigma
        return WienerSpec.power_law(sigma, self.getfloat("wiener", "beta"), basis.n_modes, cutoff)

    def jumps(self, basis: SpectralBasis, fields_key: str = "fields", section: str = "jumps") -> JumpSpec:
        weights = self.floats("jumps", "weights")
        marks = self.floats("jumps", "marks") or list(range(len(weights)))
        specs = _atoms(self.get(section, fields_key))
        if not weights:
            return JumpSpec.none(basis.n_modes)
        return JumpSpec(marks, weights, np.stack([parse_field(s, basis).coeffs for s in specs]))

    def regime(self) -> Regime:
        f = self.drift()
        p, ps = f.p, f.p_star
        u0 = self.get("u0", "field")
        sigma, beta = self.getfloat("wiener", "sigma"), self.getfloat("wiener", "beta")
        # b_k = sigma k^-beta is gamma-radonifying into every L_q(0,1) iff it is square summable
        b_ok = sigma == 0 or self.getint("wiener", "cutoff") > 0 or beta > 0.5
        atoms = _atoms(self.get("jumps", "fields"))
        return Regime(u0_Lp=field_in_Lq(u0, p), B_gamma_p=b_ok, G_Lm_pstar=all(field_in_Lq(a, ps) for a in atoms),
                      u0_L2=field_in_Lq(u0, 2), B_gamma_2=b_ok, G_Lm_2=all(field_in_Lq(a, 2) for a in atoms))

    def problem(self, drift: Optional[MonotoneFn] = None) -> Problem:
        basis = self.basis()
        return Problem(drift or self.drift(), basis, self.wiener(basis), self.jumps(basis),
                       parse_field(self.get("u0", "field"), basis), self.getfloat("time", "T"), self.regime())

    def perturbed_problem(self, base: Problem) -> Problem:
        """Base data plus the [continuity] perturbation (du0, dsigma, dfields)."""
        basis = base.basis
        du0 = parse_field(self.get("continuity", "du0"), basis)
        db = self.wiener(basis, sigma=self.getfloat("continuity", "dsigma")).b
        dg = self.jumps(basis, "dfields", "continuity").fields
        return base.with_data(u0=base.u0 + du0, wiener=base.wiener.with_b(base.wiener.b + db),
                              jumps=base.jumps.with_fields(base.jumps.fields + dg))

    def effective(self) -> str:
        buf = io.StringIO()
        self.config.write(buf)
        return buf.getvalue()


def _validate(cfg: configparser.ConfigParser) -> list[str]:
    errs = []

    def num(section, key, kind=float):
        try:
            return kind(cfg.get(section, key))
        except ValueError:
            errs.append(f"{section}.{key}: expected {kind.__name__}, got {cfg.get(section, key)!r}")
            return None

    def lst(section, key):
        try:
            return _floats(cfg.get(section, key))
        except ValueError:
            errs.append(f"{section}.{key}: expected comma separated numbers, got {cfg.get(section, key)!r}")
            return None

    known = set(DEFAULTS)
    for s in cfg.sections():
        if s not in known:
            errs.append(f"[{s}]: unknown section (known: {', '.join(sorted(known))})")
        else:
            for k in cfg[s]:
                if k not in DEFAULTS[s]:
                    errs.append(f"{s}.{k}: unknown key (known: {', '.join(DEFAULTS[s])})")

    name = cfg.get("drift", "name")
    if name not in CATALOG:
        errs.append(f"drift.name: unknown drift {name!r}; choose from {', '.join(sorted(CATALOG))}")
    p = num("drift", "p")
    if name == "power" and p is not None and not p >= 2:
        errs.append(f"drift.p: growth exponent must be >= 2 (got {p!r})")
    c = num("drift", "c")
    if name == "linear" and c is not None and c < 0:
        errs.append(f"drift.c: linear drift needs c >= 0 (got {c!r})")
    K = num("space", "n_modes", int)
    if K is not None and K < 1:
        errs.append(f"space.n_modes: need at least one mode (got {K})")
    G = num("space", "n_grid", int)
    if K is not None and G is not None and 0 < G < K:
        errs.append(f"space.n_grid: need n_grid >= n_modes or 0 for the default (got {G})")
    T, dt = num("time", "T"), num("time", "dt")
    if T is not None and not T > 0:
        errs.append(f"time.T: final time must be > 0 (got {T!r})")
    if dt is not None and not dt > 0:
        errs.append(f"time.dt: time step must be > 0 (got {dt!r})")
    elif T is not None and dt is not None and T > 0 and abs(round(T / dt) * dt - T) > 1e-9 * T:
        errs.append(f"time.dt: T={T!r} is not a whole number of steps dt={dt!r}")
    num("wiener", "sigma")
    num("wiener", "beta")
    cut = num("wiener", "cutoff", int)
    if cut is not None and cut < 0:
        errs.append(f"wiener.cutoff: must be >= 0, 0 meaning no cutoff (got {cut})")
    w = lst("jumps", "weights")
    if w:
        if any(x < 0 for x in w):
            errs.append(f"jumps.weights: atom masses must be >= 0, so theta >= 0 (got {w})")
        marks = lst("jumps", "marks")
        if marks and len(marks) != len(w):
            errs.append(f"jumps.marks: {len(marks)} marks for {len(w)} weights")
        for key, sec in (("fields", "jumps"), ("dfields", "continuity")):
            atoms = _atoms(cfg.get(sec, key))
            if len(atoms) != len(w):
                errs.append(f"{sec}.{key}: {len(atoms)} field specs for {len(w)} weights")
            errs += _check_fields(atoms, K, f"{sec}.{key}")
    errs += _check_fields([cfg.get("u0", "field")], K, "u0.field")
    errs += _check_fields([cfg.get("continuity", "du0")], K, "continuity.du0")
    lams = lst("solver", "lambdas")
    if lams is not None:
        if not lams or min(lams) <= 0:
            errs.append(f"solver.lambdas: need positive values (got {lams})")
        elif any(b >= a for a, b in zip(lams, lams[1:])):
            errs.append(f"solver.lambdas: schedule must be strictly decreasing (got {lams})")
    for key, kind in (("tol_picard", float), ("max_picard", int), ("kappa", float)):
        v = num("solver", key, kind)
        if v is not None and not v > 0:
            errs.append(f"solver.{key}: must be > 0 (got {v!r})")
    if cfg.get("solver", "formulation") not in ("hidden", "direct"):
        errs.append(f"solver.formulation: use 'hidden' or 'direct' (got {cfg.get('solver', 'formulation')!r})")
    try:
        cfg.getboolean("solver", "require_regime")
    except ValueError:
        errs.append(f"solver.require_regime: expected true or false, got {cfg.get('solver', 'require_regime')!r}")
    M = num("experiment", "samples", int)
    if M is not None and M < 2:
        errs.append(f"experiment.samples: Monte Carlo estimates need >= 2 samples (got {M})")
    seed = num("experiment", "seed", int)
    if seed is not None and not 0 <= seed < 2 ** 64:
        errs.append(f"experiment.seed: must be an unsigned 64-bit integer (got {seed})")
    for sec, keys in (("bj", ("thetas", "amplitudes", "q_values")), ("continuity", ("scales",)),
                      ("generalized", ("levels", "cutoffs"))):
        for k in keys:
            lst(sec, k)
    for sec, key in (("continuity", "lambda"), ("generalized", "lambda"), ("oracle", "lambda"), ("oracle", "c")):
        v = num(sec, key)
        if v is not None and v <= 0:
            errs.append(f"{sec}.{key}: must be > 0 (got {v!r})")
    if cfg.get("simulate", "lambda").strip():
        num("simulate", "lambda")
    num("simulate", "sample", int)
    num("oracle", "refine", int)
    for k in DEFAULTS["thresholds"]:
        num("thresholds", k)
    return errs


def _check_fields(specs, K, where) -> list[str]:
    if K is None or K < 1:
        return []
    basis = SpectralBasis(K)
    errs = []
    for s in specs:
        try:
            parse_field(s, basis)
        except ValueError as e:
            errs.append(f"{where}: {s!r}: {e}")
    return errs


def load_scenario(path: Optional[str] = None, overrides: Sequence[str] = (), text: Optional[str] = None) -> Scenario:
    """Defaults, then the file (or ``text``), then ``section.key=value`` overrides."""
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str  # keep 'T' distinct from 't'
    cfg.read_dict(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            cfg.read_file(fh, source=str(path))
    if text is not None:
        cfg.read_string(text)
    errs = []
    for item in overrides:
        key, eq, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not eq or not dot:
            errs.append(f"--set {item!r}: expected section.key=value")
            continue
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, name, value.strip())
    errs += _validate(cfg)
    if errs:
        raise ScenarioError(errs)
    return Scenario(cfg)
