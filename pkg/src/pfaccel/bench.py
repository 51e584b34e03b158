"""Benchmark cases: single-notch tension, single-notch shear and the L-shaped panel.

Units are kN and mm throughout. The ``paper`` profile keeps the published
material data, step counts and (approximately) the fine mesh sizes; the
``desk`` profile coarsens the meshes so that a full run takes minutes, and
widens the regularisation length when the published one would fall below
the finest element size.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .material import MaterialParams
from .mesh import DofMap, Mesh, lshape_mesh, refine_region, unit_square_slit_mesh

__all__ = ["BenchmarkCase", "get_case", "CASE_NAMES", "PROFILES"]

CASE_NAMES = ("tensile", "shear", "lshape")
PROFILES = ("desk", "paper")

LAME_NOTCH = (121.15, 80.77)
LAME_LSHAPE = (6.16, 10.95)


@dataclass(frozen=True)
class BenchmarkCase:
    """Everything needed to run one benchmark.

    ``mesh_recipe`` is a plain dict so the case serialises to JSON:
    ``{"kind": "slit_square", "n": 32, "slit": [y, x0, x1], "refine": [[xmin, xmax, ymin, ymax]], "levels": 1}``
    or ``{"kind": "lshape", "h": 15.625}``. ``constraints`` are
    ``(tag, field, value per load step)`` triples; later entries win on
    shared nodes.
    """

    name: str
    profile: str
    mesh_recipe: dict
    constraints: tuple
    params: MaterialParams
    n_steps: int
    load_size: float
    traction_tag: str
    notes: tuple = field(default_factory=tuple)

    @property
    def use_split(self) -> bool:
        return self.params.use_split

    def build_mesh(self) -> Mesh:
        r = self.mesh_recipe
        if r["kind"] == "slit_square":
            mesh = unit_square_slit_mesh(r["n"], tuple(r["slit"]) if r.get("slit") else None)
            for box in r.get("refine", []):
                mesh = refine_region(mesh, tuple(box), r.get("levels", 1))
            return mesh
        if r["kind"] == "lshape":
            return lshape_mesh(r["h"])
        raise ValueError(f"unknown mesh kind {r['kind']!r}")

    def build_dofmap(self, mesh: Mesh) -> DofMap:
        return DofMap.from_constraints(mesh, self.constraints)

    def applied_displacement(self, n) -> float:
        return self.load_size * n

    def replace(self, **changes) -> "BenchmarkCase":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["constraints"] = [list(c) for c in self.constraints]
        d["params"]["body_force"] = list(self.params.body_force)
        d["notes"] = list(self.notes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkCase":
        d = dict(d)
        d["params"] = MaterialParams(**d["params"])
        d["constraints"] = tuple(tuple(c) for c in d["constraints"])
        d["notes"] = tuple(d.get("notes", ()))
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkCase":
        return cls.from_dict(json.loads(text))


def _resolve_ell(ell_paper: float, h_fine: float, profile: str, notes: list) -> float:
    if profile == "desk" and ell_paper < h_fine:
        notes.append(f"ell widened from {ell_paper!r} to 2*h_fine = {2 * h_fine!r} mm")
        return 2.0 * h_fine
    return ell_paper


def _notch_recipe(profile: str, band: tuple) -> tuple[dict, float]:
    if profile == "desk":
        n, levels = 32, 1
    else:
        n, levels = 128, 3 if band == "tensile" else 1
    h = 1.0 / n
    if band == "tensile":
        # horizontal crack from the tip to the right edge, +-2h
        box = [0.5 - h, 1.0, 0.5 - 2 * h, 0.5 + 2 * h]
    else:
        # crack curving from the tip towards the lower right corner
        box = [0.5 - h, 1.0, 0.0, 0.5 + 2 * h]
    recipe = {"kind": "slit_square", "n": n, "slit": [0.5, 0.0, 0.5], "refine": [box], "levels": levels}
    return recipe, h / 2**levels


def get_case(name: str, profile: str = "desk") -> BenchmarkCase:
    """Return a named benchmark.

    Raises
    ------
    KeyError
        For an unknown case name or profile.
    """
    if name not in CASE_NAMES:
        raise KeyError(f"unknown case {name!r}; choose from {CASE_NAMES}")
    if profile not in PROFILES:
        raise KeyError(f"unknown profile {profile!r}; choose from {PROFILES}")
    notes: list = []
    if name in ("tensile", "shear"):
        lam, mu = LAME_NOTCH
        recipe, h_fine = _notch_recipe(profile, name)
        ell = _resolve_ell(0.0075, h_fine, profile, notes)
        gc = 2.7e-3  # 2.7 N/mm
        if name == "tensile":
            ubar = 2e-4
            params = MaterialParams(lam, mu, ell, gc, use_split=False)
            constraints = (
                ("Top", "ux", 0.0),
                ("Top", "uy", ubar),
                ("Bottom", "ux", 0.0),
                ("Bottom", "uy", 0.0),
            )
            return BenchmarkCase(name, profile, recipe, constraints, params, 50, ubar, "Top", tuple(notes))
        ubar = 1e-4
        params = MaterialParams(lam, mu, ell, gc, use_split=True)
        constraints = (
            ("Left", "uy", 0.0),
            ("Right", "uy", 0.0),
            ("SlitLower", "uy", 0.0),
            ("Top", "ux", ubar),
            ("Top", "uy", 0.0),
            ("Bottom", "ux", 0.0),
            ("Bottom", "uy", 0.0),
        )
        return BenchmarkCase(name, profile, recipe, constraints, params, 150, ubar, "Top", tuple(notes))

    lam, mu = LAME_LSHAPE
    h = 125.0 / 8 if profile == "desk" else 125.0 / 32
    ell = _resolve_ell(10.0, h, profile, notes)
    params = MaterialParams(lam, mu, ell, 9.5e-5, use_split=True)
    ubar = 1e-3
    n_steps = 800
    if profile == "desk":
        n_steps = 400
        notes.append("truncated to the first 400 of 800 loading steps")
    constraints = (
        ("LoadSegment", "uy", ubar),
        ("Bottom", "ux", 0.0),
        ("Bottom", "uy", 0.0),
    )
    return BenchmarkCase(name, profile, {"kind": "lshape", "h": h}, constraints, params, n_steps, ubar,
                         "Bottom", tuple(notes))
