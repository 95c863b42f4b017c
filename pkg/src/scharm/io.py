"""File formats: matrix CSV, cohort manifest JSON, site/effect JSON.

Matrices are plain headerless CSV, N rows x N columns of base-10 integers.
Manifests are JSON indexes pointing at matrix files by relative path.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import CohortManifest, ConnectivityMatrix, SiteDescriptor, SubjectRecord
from .errors import IoError, NonIntegerEntry, ParseError
from .synthetic import SyntheticSiteEffect


def save_matrix(m: ConnectivityMatrix, path) -> None:
    try:
        rows = "\n".join(",".join(str(int(v)) for v in row) for row in m.values)
        Path(path).write_text(rows + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def load_matrix(path) -> ConnectivityMatrix:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    rows = []
    for line_no, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        row = []
        for col_no, tok in enumerate(line.split(",")):
            tok = tok.strip()
            try:
                row.append(int(tok))
            except ValueError:
                try:
                    float(tok)
                except ValueError:
                    raise ParseError(f"{path}: bad token {tok!r} at row {line_no}, col {col_no}") from None
                raise NonIntegerEntry(line_no, col_no) from None
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    n = len(rows)
    if any(len(r) != n for r in rows):
        widths = sorted({len(r) for r in rows})
        raise ParseError(f"{path}: expected {n}x{n} matrix, got row widths {widths}")
    return ConnectivityMatrix(np.array(rows, dtype=np.int64))


def save_effect(effect: SyntheticSiteEffect, path) -> None:
    payload = {
        "beta1": effect.beta1.tolist(),
        "beta2": effect.beta2.tolist(),
        "beta3": effect.beta3.tolist(),
        "noise_sigma": effect.noise_sigma,
    }
    Path(path).write_text(json.dumps(payload))


def load_effect(path, d: int | None = None) -> SyntheticSiteEffect:
    """Load an effect file; scalar *_const fields broadcast to all d edges."""
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    sigma = float(payload.get("noise_sigma", 0.0))
    if "beta1_const" in payload:
        if d is None:
            raise ParseError(f"{path}: scalar effect shorthand requires a known edge count")
        return SyntheticSiteEffect.constant(
            d,
            beta1=float(payload["beta1_const"]),
            beta2=float(payload.get("beta2_const", 0.0)),
            beta3=float(payload.get("beta3_const", 0.0)),
            noise_sigma=sigma,
        )
    try:
        return SyntheticSiteEffect(
            beta1=np.asarray(payload["beta1"], dtype=np.float64),
            beta2=np.asarray(payload["beta2"], dtype=np.float64),
            beta3=np.asarray(payload["beta3"], dtype=np.float64),
            noise_sigma=sigma,
        )
    except KeyError as e:
        raise ParseError(f"{path}: missing field {e}") from e


def save_sites(sites: list[SiteDescriptor], path) -> None:
    Path(path).write_text(
        json.dumps(
            [
                {"site_index": s.site_index, "b_value": s.b_value, "resolution": s.resolution}
                for s in sites
            ]
        )
    )


def load_sites(path) -> list[SiteDescriptor]:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    return [
        SiteDescriptor(
            b_value=float(s["b_value"]),
            resolution=float(s["resolution"]),
            site_index=int(s["site_index"]),
        )
        for s in payload
    ]


def save_cohort(manifest: CohortManifest, out_dir) -> Path:
    """Write all matrices plus a manifest.json index; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "matrices").mkdir(parents=True, exist_ok=True)
    latent_dir = out_dir / "latents"
    subjects = []
    latent_saved = set()
    for rec in manifest.subjects:
        mpath = f"matrices/{rec.subject_id}_site{rec.site.site_index}.csv"
        save_matrix(rec.matrix, out_dir / mpath)
        entry = {
            "id": rec.subject_id,
            "site_index": rec.site.site_index,
            "matrix_path": mpath,
            "group_key": rec.group_key,
            "split": manifest.split_labels.get(rec.subject_id),
        }
        if rec.latent_truth is not None:
            lpath = f"latents/{rec.subject_id}.csv"
            if rec.subject_id not in latent_saved:
                latent_dir.mkdir(parents=True, exist_ok=True)
                save_matrix(rec.latent_truth, out_dir / lpath)
                latent_saved.add(rec.subject_id)
            entry["latent_path"] = lpath
        subjects.append(entry)
    payload = {
        "n_nodes": manifest.n_nodes,
        "seed": manifest.seed,
        "sites": [
            {"site_index": s.site_index, "b_value": s.b_value, "resolution": s.resolution}
            for s in manifest.sites
        ],
        "subjects": subjects,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(payload, indent=1))
    return manifest_path


def load_cohort(manifest_path) -> CohortManifest:
    manifest_path = Path(manifest_path)
    try:
        payload = json.loads(manifest_path.read_text())
    except OSError as e:
        raise IoError(f"cannot read {manifest_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{manifest_path}: invalid JSON: {e}") from e
    base = manifest_path.parent
    sites = {
        int(s["site_index"]): SiteDescriptor(
            b_value=float(s["b_value"]),
            resolution=float(s["resolution"]),
            site_index=int(s["site_index"]),
        )
        for s in payload["sites"]
    }
    latent_cache: dict[str, ConnectivityMatrix] = {}
    records = []
    split_labels = {}
    for entry in payload["subjects"]:
        latent = None
        if entry.get("latent_path"):
            lp = entry["latent_path"]
            if lp not in latent_cache:
                latent_cache[lp] = load_matrix(base / lp)
            latent = latent_cache[lp]
        records.append(
            SubjectRecord(
                subject_id=entry["id"],
                site=sites[int(entry["site_index"])],
                matrix=load_matrix(base / entry["matrix_path"]),
                group_key=entry.get("group_key"),
                latent_truth=latent,
            )
        )
        if entry.get("split"):
            split_labels[entry["id"]] = entry["split"]
    return CohortManifest(
        subjects=records,
        sites=[sites[k] for k in sorted(sites)],
        split_labels=split_labels,
        seed=int(payload.get("seed", 0)),
    )
