"""Domain fixtures: builders for the model domains and the YAML file format.

File schema (all reals written with 17 significant digits)::

    name: egg2
    description: ...
    type_m: 4
    collar_eps: 3.0000000000000000e-01
    base_point: [re z1, im z1, re z2, im z2]
    bbox: {lo: [4 reals], hi: [4 reals]}
    conj_symmetric: true
    reinhardt: true               # r depends on |z1|, |z2| only
    defining_function:          # r = sum c * z1^a zb1^b z2^c zb2^d
      - {exponents: [a, b, c, d], re: ..., im: ...}
    frames:                     # unitary 2x2 matrices, w = U z
      identity: [[re, im, re, im], [re, im, re, im]]
    reference_points:
      - {point: [4 reals], type: 4, frame: identity, radius: ...}
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import DomainModel, ReferenceChart, to_complex, to_real
from .poly import Poly

FRAMES = {
    "identity": np.eye(2, dtype=complex),
    "swap": np.array([[0, 1], [1, 0]], dtype=complex),
}

BUILTIN = ("ball", "egg2", "egg3")

# (grid spacing, chart radius) per exponent k; checked to cover the blend band
CHART_LAYOUT = {1: (0.6, 0.95), 2: (0.5, 0.7), 3: (0.55, 0.8)}


def _fmt(x: float) -> str:
    return f"{float(x):.16e}"


def egg_polynomial(k: int) -> Poly:
    """r = |z1|^(2k) + |z2|^2 - 1 (k = 1 is the unit ball)."""
    return Poly.from_dict({(k, k, 0, 0): 1.0, (0, 0, 1, 1): 1.0, (0, 0, 0, 0): -1.0})


def _meridian(k: int, spacing: float) -> list:
    """Latitudes a = |z1| on the profile curve a^(2k) + b^2 = 1, spaced by arclength."""
    a = np.linspace(0.0, 1.0, 4001)
    b = np.sqrt(np.clip(1.0 - a ** (2 * k), 0.0, None))
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(a), np.diff(b)))])
    n = max(int(np.ceil(s[-1] / spacing)), 1)
    return [float(np.interp(t, s, a)) for t in np.linspace(0.0, s[-1], n + 1)]


def _egg_charts(k: int, spacing: float = 0.3, radius: float = 0.6, max_slope: float = 2.0) -> list:
    """Reference charts on a latitude/phase grid of the egg boundary.

    Points with z1 = 0 have type 2k; the rest are strongly pseudoconvex.
    Phases are roots of unity, so the set is invariant under conjugation.
    Each point uses whichever coordinate frame has the larger normal
    derivative in w2.
    """
    charts = []
    for a in _meridian(k, spacing):
        b = float(np.sqrt(max(1.0 - a ** (2 * k), 0.0)))
        frame = "identity" if b >= k * a ** (2 * k - 1) else "swap"
        n1 = max(int(np.ceil(2 * np.pi * a / spacing)), 1)
        n2 = max(int(np.ceil(2 * np.pi * b / spacing)), 1)
        typ = 2 * k if a == 0.0 else 2
        for j1 in range(n1):
            for j2 in range(n2):
                z = np.array([a * np.exp(2j * np.pi * j1 / n1), b * np.exp(2j * np.pi * j2 / n2)])
                charts.append(ReferenceChart(z, typ, FRAMES[frame], radius, frame, max_slope))
    return charts


def build_egg(k: int, collar_eps: float | None = None) -> DomainModel:
    name = "ball" if k == 1 else f"egg{k}"
    lo = np.array([-1.05, -1.05, -1.05, -1.05])
    desc = (
        "unit ball |z1|^2 + |z2|^2 < 1"
        if k == 1
        else f"egg |z1|^{2 * k} + |z2|^2 < 1, type {2 * k} on the circle z1 = 0"
    )
    if collar_eps is None:
        collar_eps = 0.55 if k == 1 else 0.3
    return DomainModel(
        name=name,
        r=egg_polynomial(k),
        type_m=2 * k,
        collar_eps=collar_eps,
        charts=tuple(_egg_charts(k, *CHART_LAYOUT.get(k, (0.5, 0.75)))),
        bbox_lo=lo,
        bbox_hi=-lo,
        base_point=np.zeros(2, dtype=complex),
        description=desc,
        conj_symmetric=True,
        reinhardt=True,
    )


# ---------------------------------------------------------------------------
# serialization


def domain_to_dict(domain: DomainModel) -> dict:
    frames = {}
    refs = []
    for c in domain.charts:
        frames[c.frame_name] = [[_fmt(v) for re_im in zip(row.real, row.imag) for v in re_im] for row in c.frame]
        refs.append(
            {
                "point": [_fmt(v) for v in to_real(c.center)],
                "type": int(c.type_m),
                "frame": c.frame_name,
                "radius": _fmt(c.radius),
                "max_slope": _fmt(c.max_slope),
            }
        )
    return {
        "name": domain.name,
        "description": domain.description,
        "type_m": int(domain.type_m),
        "collar_eps": _fmt(domain.collar_eps),
        "base_point": [_fmt(v) for v in to_real(domain.base_point)],
        "bbox": {"lo": [_fmt(v) for v in domain.bbox_lo], "hi": [_fmt(v) for v in domain.bbox_hi]},
        "conj_symmetric": bool(domain.conj_symmetric),
        "reinhardt": bool(domain.reinhardt),
        "defining_function": [
            {"exponents": [int(e) for e in ex], "re": _fmt(c.real), "im": _fmt(c.imag)}
            for ex, c in zip(domain.r.exps, domain.r.coeffs)
        ],
        "frames": frames,
        "reference_points": refs,
    }


def dump_domain(domain: DomainModel, path) -> None:
    text = yaml.safe_dump(domain_to_dict(domain), sort_keys=False, default_flow_style=None, width=120)
    # reals were formatted as strings to pin 17 significant digits; unquote them
    text = text.replace("'", "")
    Path(path).write_text(text)


def domain_from_dict(d: dict) -> DomainModel:
    try:
        frames = {}
        for name, rows in d["frames"].items():
            m = np.array([[float(rows[i][2 * j]) + 1j * float(rows[i][2 * j + 1]) for j in range(2)] for i in range(2)])
            if not np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12):
                raise ConfigError(f"frame {name!r} is not unitary")
            frames[name] = m
        terms = {}
        for t in d["defining_function"]:
            terms[tuple(int(e) for e in t["exponents"])] = float(t["re"]) + 1j * float(t.get("im", 0.0))
        charts = tuple(
            ReferenceChart(
                to_complex(np.array([float(v) for v in ref["point"]])),
                int(ref["type"]),
                frames[ref["frame"]],
                float(ref["radius"]),
                ref["frame"],
                float(ref.get("max_slope", 2.0)),
            )
            for ref in d["reference_points"]
        )
        dom = DomainModel(
            name=str(d["name"]),
            r=Poly.from_dict(terms),
            type_m=int(d["type_m"]),
            collar_eps=float(d["collar_eps"]),
            charts=charts,
            bbox_lo=np.array([float(v) for v in d["bbox"]["lo"]]),
            bbox_hi=np.array([float(v) for v in d["bbox"]["hi"]]),
            base_point=to_complex(np.array([float(v) for v in d["base_point"]])),
            description=str(d.get("description", "")),
            conj_symmetric=bool(d.get("conj_symmetric", False)),
            reinhardt=bool(d.get("reinhardt", False)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed domain fixture: {exc}") from exc
    validate_domain(dom)
    return dom


def validate_domain(dom: DomainModel) -> None:
    if dom.type_m < 1 or dom.collar_eps <= 0:
        raise ConfigError("type_m must be >= 1 and collar_eps > 0")
    if not dom.contains(dom.base_point[None])[0]:
        raise ConfigError("base point must satisfy r < 0")
    if dom.type_m != max(c.type_m for c in dom.charts):
        raise ConfigError("type_m must equal the maximal reference-point type")
    refs = dom.reference_points
    rv = dom.r_of_real(to_real(refs))
    if np.max(np.abs(rv)) > 1e-9:
        raise ConfigError("reference points must lie on the boundary")
    if np.min(np.abs(dom.dbar_r(refs)).max(axis=-1)) < 1e-9:
        raise ConfigError("dbar r vanishes at a reference point")
    for c in dom.charts:
        w2 = (c.frame @ dom.d_r(c.center[None])[0].conj())  # frame applied to the gradient
        if abs(w2[1]) < 1e-9:
            raise ConfigError("reference chart frame has vanishing normal derivative")


def load_domain_file(path) -> DomainModel:
    try:
        d = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read domain fixture {path}: {exc}") from exc
    return domain_from_dict(d)


def list_domains() -> list[str]:
    files = resources.files("catlin_gh") / "data"
    return sorted(p.name[: -len(".yaml")] for p in files.iterdir() if p.name.endswith(".yaml"))


@lru_cache(maxsize=None)
def load_domain(name: str) -> DomainModel:
    path = resources.files("catlin_gh") / "data" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown domain {name!r}; available: {', '.join(list_domains())}")
    return load_domain_file(path)
