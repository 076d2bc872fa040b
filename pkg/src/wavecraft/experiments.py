"""Experiment presets, config resolution, validation and execution.

A config is a nested mapping (YAML or JSON on disk).  Resolution layers a
preset for the experiment kind, then file values, then command-line
overrides; the fully resolved mapping is what gets hashed, echoed and stored.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import oracle, states
from .grid import WaveFunction, fidelity, make_grid
from .metrics import fit_four_cat, fit_squeezed_cat, wigner
from .nges import SubtractionSpec
from .teleport import (DEFAULT_REGION, DEFAULT_RESOLUTION, MAX_R_TELE, BellOutcome,
                       IterationPlan, TeleportConfig, density_map, run_plan, success_sweep,
                       teleport_step)

KINDS = ("cat", "fourcat", "fock", "cps", "success-sweep", "oracle-check", "custom-plan")
FITS = ("squeezed_cat", "four_cat", None)
DEFAULT_OUT = "wavecraft-out"


class ConfigError(ValueError):
    """Config cannot be resolved into a runnable experiment."""


# -- presets -----------------------------------------------------------------

#: Bell outcomes per Fock-superposition target; m_p = 0 throughout.
FOCK_PLANS = {
    "0+1": [-0.63],
    "0+3": [-0.91, 0.93, 0.46],
    "0+1+2+3": [-1.06, 0.13, 0.36],
    "2+3": [-1.27, -0.13, 0.99],
}

#: Cubic-phase panels: target, input squeezing and Bell outcomes.
CPS_PANELS = {
    "A": {"target": {"variant": "hermite", "order": 1, "xi": 0.0, "p0": 0.0},
          "r": 0.0, "m_x": [0.78, -1.51, 0.58]},
    "B": {"target": {"variant": "hermite", "order": 2, "xi": 0.0, "p0": 0.0},
          "r": 0.7, "m_x": [0.61, -1.15, -0.23, 0.60]},
    "C": {"target": {"variant": "airy", "order": 1, "xi": 0.6, "p0": 8.0},
          "r": -0.7, "m_x": [2.80, 1.39, -1.18, -0.08, 1.02]},
    "D": {"target": {"variant": "airy", "order": 1, "xi": 0.6, "p0": 9.0},
          "r": -0.7, "m_x": [-1.73, 1.72, -0.68, 1.02, 0.08]},
}

SWEEP_THRESHOLDS = [0.0, 0.5, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999]

_BASE = {
    "grid": {"n_points": 1024, "extent": 12.0},
    "teleport": {"r_tele": 1.0, "k": 1, "l": 0},
    "input": {"state": "squeezed_vacuum", "r": 0.0},
    "plan": {"m_x": [], "m_p": None, "rotate_after": False},
    "target": None,
    "fit": None,
    "wigner": {"p_extent": 6.0, "p_points": 121, "x_stride": 4},
}


def preset(kind: str) -> dict:
    """Default config for an experiment kind."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    cfg = copy.deepcopy(_BASE)
    cfg["kind"] = kind
    if kind == "cat":
        cfg["input"] = {"state": "squeezed_vacuum", "r": -1.0}
        cfg["iters"] = 4
        cfg["fit"] = "squeezed_cat"
    elif kind == "fourcat":
        cfg["teleport"].update(k=1, l=1)
        cfg["iters"] = 4
        cfg["fit"] = "four_cat"
    elif kind == "fock":
        cfg["input"] = {"state": "squeezed_vacuum", "r": 0.0}
        cfg["target"] = {"state": "fock_superposition", "label": "0+1"}
    elif kind == "cps":
        # panel defaults fill whatever the file or flags leave open
        cfg["panel"] = None
        cfg["input"] = None
        cfg["target"] = {"state": "cps", "gamma": 0.5}
    elif kind == "success-sweep":
        cfg["sweep"] = {"r": 1.0, "photons": [0, 1], "thresholds": list(SWEEP_THRESHOLDS),
                        "region": None, "resolution": DEFAULT_RESOLUTION,
                        "calibration_region": list(DEFAULT_REGION),
                        "calibration_resolution": DEFAULT_RESOLUTION}
    elif kind == "oracle-check":
        cfg["grid"] = {"n_points": oracle.ORACLE_POINTS, "extent": oracle.ORACLE_EXTENT}
        cfg["oracle"] = {"cases": 10, "seed": 20240521, "m_range": 2.0}
    return cfg


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config_file(path: str | os.PathLike) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def resolve(file_values: dict | None = None, overrides: dict | None = None,
            kind: str | None = None) -> dict:
    """Preset, then file values, then overrides; derived fields filled in."""
    file_values = file_values or {}
    overrides = overrides or {}
    kind = kind or overrides.get("kind") or file_values.get("kind")
    if kind is None:
        raise ConfigError("config does not name an experiment kind")
    base = preset(kind)
    given = [file_values, overrides]
    if any(g.get("plan", {}).get("m_x") for g in given) and not any("iters" in g for g in given):
        base.pop("iters", None)  # explicit outcomes replace the preset's all-zero plan
    cfg = _merge(_merge(base, file_values), overrides)
    cfg["kind"] = kind
    _derive(cfg)
    return cfg


def _derive(cfg: dict):
    kind = cfg["kind"]
    plan = cfg.setdefault("plan", {})
    if kind == "fock":
        label = cfg["target"].get("label", "0+1")
        if not plan.get("m_x"):
            if label not in FOCK_PLANS:
                raise ConfigError(f"no preset Bell outcomes for target {label!r}; pass --mx")
            plan["m_x"] = list(FOCK_PLANS[label])
        cfg["input"] = {"state": "squeezed_vacuum", "r": cfg["input"].get("r", 0.0)}
    elif kind == "cps":
        tgt = cfg["target"]
        panel = cfg.get("panel") or _infer_panel(tgt)
        if panel not in CPS_PANELS:
            raise ConfigError(f"unknown cubic phase panel {panel!r}; expected one of A, B, C, D")
        spec = CPS_PANELS[panel]
        cfg["panel"] = panel
        cfg["target"] = {**spec["target"], **{k: v for k, v in tgt.items() if v is not None},
                         "state": "cps"}
        inp = dict(cfg.get("input") or {})
        inp.setdefault("state", "squeezed_vacuum")
        inp.setdefault("r", spec["r"])
        cfg["input"] = inp
        if not plan.get("m_x"):
            plan["m_x"] = list(spec["m_x"])
    iters = cfg.pop("iters", None)
    if iters is not None and not plan.get("m_x"):
        plan["m_x"] = [0.0] * int(iters)
    elif iters is not None and len(plan["m_x"]) != int(iters):
        raise ConfigError(f"--iters {iters} disagrees with {len(plan['m_x'])} m_x entries")
    n = len(plan.get("m_x") or [])
    if plan.get("m_p") is None:
        plan["m_p"] = [0.0] * n
    if isinstance(plan.get("rotate_after"), bool):
        plan["rotate_after"] = [plan["rotate_after"]] * n


def _infer_panel(target: dict) -> str:
    if target.get("variant") == "hermite":
        return "A" if int(target.get("order") or 1) == 1 else "B"
    return "C" if target.get("p0") is not None and float(target["p0"]) == 8.0 else "D"


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "out_dir"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- validation --------------------------------------------------------------

@dataclass
class Finding:
    level: str  # "error" or "warning"
    code: str
    message: str

    def as_dict(self) -> dict:
        return {"level": self.level, "code": self.code, "message": self.message}


def _input_width(desc: dict) -> tuple[float, int]:
    """(Gaussian width e^{-r}, photon number) of an input descriptor."""
    state = desc.get("state", "squeezed_vacuum")
    if state == "squeezed_vacuum":
        return float(np.exp(-float(desc.get("r", 0.0)))), 0
    if state == "squeezed_fock":
        return float(np.exp(-float(desc.get("r", 0.0)))), int(desc.get("n", 0))
    if state == "fock_superposition":
        return 1.0, len(states.parse_fock_label(desc["label"])) - 1
    raise ConfigError(f"unknown input state {state!r}")


def validate(cfg: dict) -> list[Finding]:
    """Static checks on a resolved config; nothing is simulated."""
    out: list[Finding] = []

    def err(code, msg):
        out.append(Finding("error", code, msg))

    def warn(code, msg):
        out.append(Finding("warning", code, msg))

    kind = cfg.get("kind")
    if kind not in KINDS:
        err("kind", f"unknown experiment kind {kind!r}")
        return out
    grid = cfg.get("grid", {})
    n_points, extent = int(grid.get("n_points", 0)), float(grid.get("extent", 0))
    if n_points < 16 or extent <= 0:
        err("grid", f"grid needs >= 16 points and positive extent, got {n_points}, {extent}")
        return out
    spacing = 2 * extent / (n_points - 1)
    p_nyquist = np.pi / spacing

    tele = cfg.get("teleport", {})
    r_tele = float(tele.get("r_tele", 0))
    if not 0 < r_tele <= MAX_R_TELE:
        err("r_tele", f"r_tele must lie in (0, {MAX_R_TELE}], got {r_tele}")
    try:
        spec = SubtractionSpec(int(tele.get("k", 1)), int(tele.get("l", 0)))
    except ValueError as exc:
        err("subtraction", str(exc))
        spec = None
    if r_tele > 0 and np.exp(r_tele) * np.sqrt(2) * 3 > p_nyquist:
        warn("r_tele_resolution", f"resource squeezing r_tele={r_tele} is barely resolved by "
             f"grid spacing {spacing:.3g}")

    plan = cfg.get("plan", {})
    m_x = plan.get("m_x") or []
    m_p = plan.get("m_p") or []
    rot = plan.get("rotate_after") or []
    if kind not in ("success-sweep", "oracle-check"):
        if not m_x:
            err("plan_empty", "iteration plan has no steps")
        if not len(m_x) == len(m_p) == len(rot):
            err("plan_length", f"m_x, m_p and rotate_after lengths differ "
                f"({len(m_x)}, {len(m_p)}, {len(rot)})")
        if not all(np.isfinite(v) for v in list(m_x) + list(m_p)):
            err("plan_values", "Bell outcomes must be finite")

    if kind not in ("oracle-check", "success-sweep"):
        try:
            width, photons = _input_width(cfg.get("input", {}))
        except (ConfigError, ValueError, KeyError) as exc:
            err("input", str(exc))
            width, photons = None, 0
        if width is not None:
            if 6 * width / np.sqrt(2) > extent:
                err("input_support", f"input of width {width:.3g} does not fit in extent {extent}")
            if 7 * np.sqrt(2) / width > p_nyquist:
                err("input_resolution", f"input of width {width:.3g} is not resolved by spacing {spacing:.3g}")
            if spec is not None and m_x and not any(rot):
                # each step multiplies by a polynomial of degree k + l; a polynomial of
                # degree d on a Gaussian of width s peaks near sqrt(d) s
                degree = photons + len(m_x) * spec.order
                peak = np.sqrt(degree) * width + max(abs(v) for v in m_x)
                if peak > extent:
                    err("support", f"predicted extrema near |x| = {peak:.2f} exceed the grid "
                        f"extent {extent}")
                elif peak + 2 * width > extent:
                    warn("support_margin", f"predicted extrema near |x| = {peak:.2f} leave little "
                         f"margin inside extent {extent}")

    target = cfg.get("target")
    if target is not None:
        try:
            _target_desc_check(target)
        except (ConfigError, ValueError, KeyError) as exc:
            err("target", str(exc))
    if cfg.get("fit") not in FITS:
        err("fit", f"unknown fit family {cfg.get('fit')!r}")

    if kind == "success-sweep":
        sw = cfg.get("sweep", {})
        th = sw.get("thresholds", [])
        if not th or any(not 0 <= t <= 1 for t in th):
            err("thresholds", "thresholds must be a nonempty list in [0, 1]")
        if int(sw.get("resolution", 0)) < 2 or int(sw.get("calibration_resolution", 0)) < 2:
            err("sweep_resolution", "sweep resolution must be at least 2")
        for key in ("region", "calibration_region"):
            reg = sw.get(key)
            if reg is not None and len(reg) not in (2, 4):
                err("sweep_region", f"{key} needs 2 or 4 numbers")
    if kind == "oracle-check" and n_points > 512:
        warn("oracle_cost", f"oracle at {n_points} points is slow; 256 is the intended size")
    return out


def _target_desc_check(desc: dict):
    state = desc.get("state")
    if state == "fock_superposition":
        states.parse_fock_label(desc["label"])
    elif state == "cps":
        states.CpsSpec(float(desc["gamma"]), desc.get("variant", "hermite"), int(desc.get("order", 1)),
                       float(desc.get("xi", 0.0)), float(desc.get("p0", 0.0)))
    elif state == "cat":
        states.CatSpec(float(desc["alpha"]), desc.get("parity", "plus"), float(desc.get("squeeze", 0.0)))
    elif state == "four_cat":
        if int(desc.get("m", 0)) not in range(4):
            raise ConfigError("four-cat type m must be 0..3")
    else:
        raise ConfigError(f"unknown target state {state!r}")


# -- execution ---------------------------------------------------------------

def build_input(desc: dict, grid) -> WaveFunction:
    state = desc.get("state", "squeezed_vacuum")
    if state == "squeezed_vacuum":
        return states.squeezed_vacuum(float(desc.get("r", 0.0)), grid)
    if state == "squeezed_fock":
        return states.squeezed_fock(int(desc["n"]), float(desc.get("r", 0.0)), grid)
    if state == "fock_superposition":
        return states.fock_superposition(states.parse_fock_label(desc["label"]), grid)
    raise ConfigError(f"unknown input state {state!r}")


def build_target(desc: dict, grid) -> WaveFunction:
    state = desc.get("state")
    if state == "fock_superposition":
        return states.fock_superposition(states.parse_fock_label(desc["label"]), grid)
    if state == "cps":
        spec = states.CpsSpec(float(desc["gamma"]), desc.get("variant", "hermite"),
                              int(desc.get("order", 1)), float(desc.get("xi", 0.0)),
                              float(desc.get("p0", 0.0)))
        return states.cps_target(spec, grid)
    if state == "cat":
        return states.cat_state(states.CatSpec(float(desc["alpha"]), desc.get("parity", "plus"),
                                               float(desc.get("squeeze", 0.0))), grid)
    if state == "four_cat":
        return states.four_cat_state(float(desc["beta"]), int(desc["m"]), grid)
    raise ConfigError(f"unknown target state {state!r}")


@dataclass
class RunSummary:
    kind: str
    config_hash: str
    step_weights: list = field(default_factory=list)
    fidelity: float | None = None
    fit: dict | None = None
    density_residual: float | None = None
    wall_clock_seconds: float = 0.0
    details: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "step_weights": self.step_weights,
            "fidelity": self.fidelity,
            "fit": self.fit,
            "density_residual": self.density_residual,
            "wall_clock_seconds": self.wall_clock_seconds,
            "details": self.details,
            "config": self.config,
        }


@dataclass
class RunOutput:
    summary: RunSummary
    final: WaveFunction | None = None
    tables: dict = field(default_factory=dict)  # file name -> (header, 2-D array)


def _teleport_config(cfg: dict, grid) -> TeleportConfig:
    tele = cfg["teleport"]
    return TeleportConfig(float(tele["r_tele"]), SubtractionSpec(int(tele["k"]), int(tele["l"])), grid)


def run(cfg: dict) -> RunOutput:
    """Execute a resolved config.  Raises ConfigError, GridError or NullStateError."""
    findings = [f for f in validate(cfg) if f.level == "error"]
    if findings:
        raise ConfigError("; ".join(f"{f.code}: {f.message}" for f in findings))
    start = time.perf_counter()
    grid = make_grid(int(cfg["grid"]["n_points"]), float(cfg["grid"]["extent"]))
    summary = RunSummary(cfg["kind"], config_hash(cfg), config=cfg)
    if cfg["kind"] == "success-sweep":
        out = _run_sweep(cfg, grid, summary)
    elif cfg["kind"] == "oracle-check":
        out = _run_oracle(cfg, grid, summary)
    else:
        out = _run_plan(cfg, grid, summary)
    summary.wall_clock_seconds = round(time.perf_counter() - start, 3)
    return out


def _run_plan(cfg, grid, summary) -> RunOutput:
    tconf = _teleport_config(cfg, grid)
    plan = IterationPlan.from_vectors(cfg["plan"]["m_x"], cfg["plan"]["m_p"],
                                      cfg["plan"]["rotate_after"])
    psi_in = build_input(cfg["input"], grid)
    res = run_plan(psi_in, tconf, plan)
    summary.step_weights = [float(w) for w in res.step_weights]
    if cfg.get("target") is not None:
        summary.fidelity = fidelity(res.final, build_target(cfg["target"], grid))
    fit = cfg.get("fit")
    if fit is not None:
        fr = fit_squeezed_cat(res.final) if fit == "squeezed_cat" else fit_four_cat(res.final)
        summary.fit = {"family": fit, "params": fr.params, "fidelity": fr.fidelity,
                       "converged": fr.converged}
        if summary.fidelity is None:
            summary.fidelity = fr.fidelity
    summary.details["eta"] = tconf.eta
    return RunOutput(summary, res.final)


def _run_sweep(cfg, grid, summary) -> RunOutput:
    sw = cfg["sweep"]
    tconf = _teleport_config(cfg, grid)
    r = float(sw["r"])
    thresholds = np.asarray(sw["thresholds"], dtype=float)
    columns, names, residuals, edges, coarse = [thresholds], [], [], {}, {}
    for n in sw["photons"]:
        for sign in (1, -1):
            psi = states.squeezed_fock(int(n), sign * r, grid)
            target = teleport_step(psi, tconf, BellOutcome()).normalize()
            region = None if sw.get("region") is None else tuple(sw["region"])
            cal_region = tuple(sw["calibration_region"])
            cal_res = int(sw["calibration_resolution"])
            calib = None
            if region is not None or cal_region != DEFAULT_REGION or cal_res != int(sw["resolution"]):
                calib = density_map(psi, tconf, cal_region, cal_res)
            res = success_sweep(psi, tconf, target, thresholds, region=region,
                                resolution=int(sw["resolution"]), calibration=calib)
            name = f"S({sign * r:g})|{n}>"
            names.append(name)
            columns.append(res.probabilities)
            residuals.append(res.calibration.residual)
            edges[name] = [float(t) for t, hit in zip(thresholds, res.touches_edge) if hit and t > 0]
            coarse[name] = [float(t) for t in thresholds[res.under_resolved()]]
    summary.density_residual = float(max(residuals))
    summary.details = {"inputs": names, "residuals": [float(v) for v in residuals],
                       "thresholds_touching_region_edge": edges,
                       "thresholds_under_resolved": coarse,
                       "probabilities": {n: [float(v) for v in c] for n, c in zip(names, columns[1:])}}
    table = np.column_stack(columns)
    return RunOutput(summary, None, {"sweep.csv": (["threshold"] + names, table)})


def _run_oracle(cfg, grid, summary) -> RunOutput:
    oc = cfg["oracle"]
    rng = np.random.default_rng(int(oc["seed"]))
    r_tele = float(cfg["teleport"]["r_tele"])
    rows, report = [], {}
    worst_fid, worst_spread = 1.0, 0.0
    for k, l in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
        spec = SubtractionSpec(k, l)
        tconf = TeleportConfig(r_tele, spec, grid)
        nges = oracle.build_nges_2d(spec, r_tele, grid)
        ratios = []
        for _ in range(int(oc["cases"])):
            coeffs = rng.normal(size=3) + 1j * rng.normal(size=3)
            psi = states.fock_superposition(coeffs, grid)
            m = rng.uniform(-oc["m_range"], oc["m_range"], 2)
            outcome = BellOutcome(float(m[0]), float(m[1]))
            a = teleport_step(psi, tconf, outcome)
            b = oracle.teleport_brute(psi, nges, outcome)
            f = fidelity(a, b)
            ratios.append(b.weight / a.weight)
            rows.append([k, l, m[0], m[1], f, ratios[-1]])
            worst_fid = min(worst_fid, f)
        spread = float(np.ptp(ratios) / np.mean(ratios))
        worst_spread = max(worst_spread, spread)
        report[f"{k},{l}"] = {"min_fidelity": float(min(r[4] for r in rows if r[:2] == [k, l])),
                              "weight_ratio": float(np.mean(ratios)), "ratio_spread": spread}
    eta = float(np.tanh(r_tele))
    n_max = max(40, int(np.ceil(np.log(1e-12) / np.log(eta))) if eta > 0 else 40)
    identity = {f"k={k}": oracle.subtraction_identity_check(eta, n_max, k) for k in (1, 2)}
    summary.fidelity = float(worst_fid)
    summary.details = {"per_subtraction": report, "max_ratio_spread": worst_spread,
                       "subtraction_identity": identity,
                       "passed": bool(worst_fid > 1 - 1e-6 and worst_spread < 1e-4
                                      and max(identity.values()) < 1e-7)}
    header = ["k", "l", "m_x", "m_p", "fidelity", "weight_ratio"]
    return RunOutput(summary, None, {"oracle.csv": (header, np.array(rows, dtype=float))})


# -- files -------------------------------------------------------------------

def _write_csv(path: Path, header: list[str], table: np.ndarray, cfg_hash: str):
    with open(path, "w") as fh:
        fh.write(f"# wavecraft config_hash={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, table, delimiter=",", fmt="%.12e")


def write_outputs(out: RunOutput, out_dir: str | os.PathLike) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = out.summary.config
    h = out.summary.config_hash
    written = []
    if out.final is not None:
        psi = out.final.normalize()
        a = psi.amplitudes
        table = np.column_stack([psi.x, a.real, a.imag, np.abs(a) ** 2])
        path = out_dir / "wavefunction.csv"
        _write_csv(path, ["x", "re", "im", "abs2"], table, h)
        written.append(path)
        wc = cfg.get("wigner", {})
        w = wigner(psi, p_extent=float(wc.get("p_extent", 6.0)), p_points=int(wc.get("p_points", 121)),
                   x_stride=int(wc.get("x_stride", 4)))
        X, P = np.meshgrid(w.x, w.p, indexing="ij")
        path = out_dir / "wigner.csv"
        _write_csv(path, ["x", "p", "W"], np.column_stack([X.ravel(), P.ravel(), w.values.ravel()]), h)
        written.append(path)
    for name, (header, table) in out.tables.items():
        path = out_dir / name
        _write_csv(path, header, table, h)
        written.append(path)
    path = out_dir / "summary.json"
    path.write_text(json.dumps(out.summary.as_dict(), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def default_out_dir() -> str:
    return os.environ.get("WAVECRAFT_OUT", DEFAULT_OUT)
