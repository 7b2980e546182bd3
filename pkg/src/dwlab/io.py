"""Artifact serialization: delimited tables, JSON sidecars, manifests.

Float formatting uses repr (shortest round-trip), JSON keys are sorted and
nothing carries a timestamp, so identical inputs produce byte-identical
artifacts and manifests.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .domain import GridDomain, make_domain
from .fieldsolver import Field, SolutionRecord
from .radial import RadialGrid, RadialProfile

__all__ = [
    "write_csv",
    "dump_json",
    "save_radial_profile",
    "load_radial_profile",
    "save_record",
    "load_record",
    "save_catalog",
    "save_mask_csv",
    "write_manifest",
    "sha256_file",
]


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return repr(obj)


def dump_json(payload: dict, path: Path):
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n")


def write_csv(path, header, rows):
    """Delimited table with repr-formatted floats (round-trip stable)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating))
                             else x for x in row])
    return path


def save_radial_profile(profile: RadialProfile, csv_path) -> Path:
    """Profile as (r, u) rows plus a JSON sidecar with the derived scalars."""
    csv_path = Path(csv_path)
    write_csv(csv_path, ["r", "u"],
              zip(profile.grid.nodes.tolist(), profile.values.tolist()))
    sidecar = {
        "gamma": profile.gamma,
        "lambda": profile.lam,
        "energy": profile.energy,
        "support_radius": profile.support_radius,
        "mass": profile.mass,
        "dim": profile.grid.dim,
        "h": profile.grid.h,
        "r_max": profile.grid.r_max,
        "n_cells": profile.grid.n_cells,
        "residual": profile.residual,
        "iterations": profile.iterations,
        "converged": profile.converged,
        "diagnostics": profile.diagnostics,
    }
    dump_json(sidecar, csv_path.with_suffix(".json"))
    return csv_path


def load_radial_profile(csv_path) -> RadialProfile:
    csv_path = Path(csv_path)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    grid = RadialGrid(int(meta["dim"]), float(meta["r_max"]), int(meta["n_cells"]))
    return RadialProfile(
        grid=grid,
        values=data[:, 1].copy(),
        gamma=float(meta["gamma"]),
        lam=float(meta["lambda"]),
        energy=float(meta["energy"]),
        support_radius=float(meta["support_radius"]),
        mass=float(meta["mass"]),
        residual=float(meta["residual"]),
        iterations=int(meta["iterations"]),
        converged=bool(meta["converged"]),
        diagnostics=dict(meta.get("diagnostics", {})),
    )


def _domain_spec(domain: GridDomain) -> dict:
    return {"family": domain.family, "params": domain.params, "h": domain.h,
            "r_deform": domain.r_deform}


def domain_from_spec(spec: dict) -> GridDomain:
    return make_domain(spec["family"], dict(spec["params"]), float(spec["h"]),
                       r_deform=float(spec["r_deform"]))


def save_record(record: SolutionRecord, csv_path) -> Path:
    """Field values as a dense grid table plus a JSON sidecar."""
    csv_path = Path(csv_path)
    vals = record.field.values
    if vals.ndim == 1:
        vals = vals[None, :]
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in vals:
            writer.writerow([repr(float(x)) for x in row])
    sidecar = {
        "domain": _domain_spec(record.field.domain),
        "eps": record.eps,
        "volume": record.volume,
        "lambda": record.lam,
        "energy": record.energy,
        "residual_inf": record.residual_inf,
        "barycenter": list(record.barycenter),
        "iterations": record.iterations,
        "converged": record.converged,
        "morse_index": record.morse_index,
        "nondegenerate": record.nondegenerate,
        "diagnostics": record.diagnostics,
    }
    dump_json(sidecar, csv_path.with_suffix(".json"))
    return csv_path


def load_record(csv_path) -> SolutionRecord:
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    domain = domain_from_spec(meta["domain"])
    vals = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    if domain.dim == 1:
        vals = vals.ravel()
    field = Field(domain, vals)
    return SolutionRecord(
        field=field,
        lam=float(meta["lambda"]),
        energy=float(meta["energy"]),
        residual_inf=float(meta["residual_inf"]),
        barycenter=np.asarray(meta["barycenter"], dtype=float),
        iterations=int(meta["iterations"]),
        converged=bool(meta["converged"]),
        eps=float(meta["eps"]),
        volume=float(meta["volume"]),
        morse_index=meta.get("morse_index"),
        nondegenerate=meta.get("nondegenerate"),
        diagnostics=dict(meta.get("diagnostics", {})),
    )


def save_catalog(catalog, out_dir, stem="record") -> Path:
    """Catalog JSON plus one field table per deduplicated record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, rec in enumerate(catalog.records):
        name = f"{stem}_{i:03d}.csv"
        save_record(rec, out_dir / name)
        entries.append({
            "file": name,
            "energy": rec.energy,
            "lambda": rec.lam,
            "barycenter": list(rec.barycenter),
            "morse_index": rec.morse_index,
            "nondegenerate": rec.nondegenerate,
            "cluster_size": catalog.cluster_sizes[i],
            "below_c": bool(rec.energy <= catalog.c_level),
        })
    payload = {
        "records": entries,
        "c_level": catalog.c_level,
        "distinct_below_c": catalog.distinct_below_c,
        "distinct_total": catalog.distinct_total,
        "dedup_l2": catalog.dedup_l2,
        "dedup_barycenter": catalog.dedup_barycenter,
        "seeds": catalog.seeds,
        "failures": catalog.failures,
        "notes": catalog.notes,
    }
    if catalog.params is not None:
        payload["admissible"] = {
            "V1": catalog.params.V1, "eps1": catalog.params.eps1,
            "gamma": catalog.params.gamma, "c_level": catalog.params.c_level,
            "inside": catalog.params.inside,
            "bump_radius": catalog.params.bump_radius,
        }
    path = out_dir / "catalog.json"
    dump_json(payload, path)
    return path


def save_mask_csv(domain: GridDomain, path) -> Path:
    """Interior mask as a portable 0/1 table (one row per x index)."""
    path = Path(path)
    mask = domain.mask
    if mask.ndim == 1:
        mask = mask[None, :]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mask.astype(int):
            writer.writerow(row.tolist())
    return path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(out_dir, config_echo: dict | None = None,
                   exclude=("manifest.json",)) -> Path:
    """Hash every artifact under out_dir into a deterministic manifest."""
    out_dir = Path(out_dir)
    artifacts = []
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file() or path.name in exclude:
            continue
        rel = path.relative_to(out_dir).as_posix()
        artifacts.append({"name": rel, "sha256": sha256_file(path),
                          "bytes": path.stat().st_size})
    payload = {"artifacts": artifacts}
    if config_echo is not None:
        payload["config"] = _jsonable(config_echo)
    path = out_dir / "manifest.json"
    dump_json(payload, path)
    return path
