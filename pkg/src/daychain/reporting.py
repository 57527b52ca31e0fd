"""Corpus-level evaluation: fidelity, quality, diversity, validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from daychain.categories import ACTIVITY_CATEGORIES
from daychain.chains import ActivityChain, DAY_MIN, discretize
from daychain.clustering import diversity_score, select_k, silhouette, ward_cluster
from daychain.config import EvaluationConfig
from daychain.metrics import LN2, js_divergence, ks_statistic, objective_quality, pairwise_dtw, spatial_density, total_quality
from daychain.services import WorldServices
from daychain.validation import validate_chain


@dataclass
class EvaluationReport:
    js_spatial: float
    js_segments: list
    ks_by_type: dict  # category -> {start, end, duration}
    ks_temporal: float
    q_obj: float
    q_subjective: Optional[float] = None
    q_total: Optional[float] = None
    k_star: Optional[int] = None
    silhouette_at_k: Optional[float] = None
    between: Optional[float] = None
    within: Optional[float] = None
    diversity_index: Optional[float] = None
    score_gd: Optional[float] = None
    validation_counts: dict = field(default_factory=dict)
    n_generated: int = 0
    n_reference: int = 0

    def to_dict(self) -> dict:
        return {
            "js_spatial": self.js_spatial,
            "js_segments": self.js_segments,
            "ks_by_type": self.ks_by_type,
            "ks_temporal": self.ks_temporal,
            "q_obj": self.q_obj,
            "q_subjective": self.q_subjective,
            "q_total": self.q_total,
            "k_star": self.k_star,
            "silhouette_at_k": self.silhouette_at_k,
            "between": self.between,
            "within": self.within,
            "diversity_index": self.diversity_index,
            "score_gd": self.score_gd,
            "validation_counts": self.validation_counts,
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def summary_text(self) -> str:
        lines = [
            f"generated chains: {self.n_generated}   reference chains: {self.n_reference}",
            f"JS spatial (all day): {self.js_spatial:.4f}  (ceiling ln2={LN2:.4f})",
            f"KS temporal (mean):   {self.ks_temporal:.4f}",
            f"Q_obj (0-10):         {self.q_obj:.2f}",
        ]
        if self.q_subjective is not None:
            lines.append(f"Q_subjective:         {self.q_subjective:.2f}")
        if self.q_total is not None:
            lines.append(f"Q_total:              {self.q_total:.2f}")
        if self.k_star is not None:
            lines.append(
                f"diversity: k*={self.k_star} silhouette={self.silhouette_at_k:.3f} "
                f"DIV={self.diversity_index:.3f} score={self.score_gd:.2f}"
            )
        if self.validation_counts:
            lines.append(f"validation violations: {self.validation_counts}")
        return "\n".join(lines)


def activity_points(chains: Sequence[ActivityChain]) -> list:
    pts = []
    for chain in chains:
        for rec in chain.records:
            if rec.category != "travel":
                pts.append((rec.lon, rec.lat))
    return pts


def segment_points(chains: Sequence[ActivityChain], seg_start: int, seg_end: int) -> tuple[list, list]:
    pts, weights = [], []
    for chain in chains:
        for rec in chain.records:
            if rec.category == "travel":
                continue
            overlap = min(rec.end, seg_end) - max(rec.start, seg_start)
            if overlap > 0:
                pts.append((rec.lon, rec.lat))
                weights.append(float(overlap))
    return pts, weights


def shared_bbox(generated: Sequence[ActivityChain], reference: Sequence[ActivityChain], margin: float) -> tuple:
    pts = activity_points(generated) + activity_points(reference)
    lons = [p[0] for p in pts]
    lats = [p[1] for p in pts]
    pad_x = (max(lons) - min(lons) or 1e-3) * margin
    pad_y = (max(lats) - min(lats) or 1e-3) * margin
    return (min(lons) - pad_x, min(lats) - pad_y, max(lons) + pad_x, max(lats) + pad_y)


def temporal_samples(chains: Sequence[ActivityChain]) -> dict:
    """Per-category start/end/duration samples."""
    out = {c: {"start": [], "end": [], "duration": []} for c in ACTIVITY_CATEGORIES}
    for chain in chains:
        for rec in chain.records:
            if rec.category in out:
                out[rec.category]["start"].append(rec.start)
                out[rec.category]["end"].append(rec.end)
                out[rec.category]["duration"].append(rec.duration)
    return out


def evaluate_corpus(
    generated: Sequence[ActivityChain],
    reference: Sequence[ActivityChain],
    config: Optional[EvaluationConfig] = None,
    services: Optional[WorldServices] = None,
    q_subjective: Optional[float] = None,
) -> EvaluationReport:
    """Score a generated corpus against a reference corpus."""
    config = config or EvaluationConfig()
    if not generated or not reference:
        raise ValueError("both corpora must be nonempty")
    bbox = shared_bbox(generated, reference, config.kde_margin_frac)

    gen_density = spatial_density(activity_points(generated), bbox, grid=config.kde_grid)
    ref_density = spatial_density(activity_points(reference), bbox, grid=config.kde_grid)
    js_all = js_divergence(ref_density.ravel(), gen_density.ravel())

    seg_len = DAY_MIN // config.time_segments
    js_segments = []
    for s in range(config.time_segments):
        lo, hi = s * seg_len, (s + 1) * seg_len
        g_pts, g_w = segment_points(generated, lo, hi)
        r_pts, r_w = segment_points(reference, lo, hi)
        if not g_pts or not r_pts:
            js_segments.append(None)
            continue
        g_d = spatial_density(g_pts, bbox, grid=config.kde_grid, weights=g_w)
        r_d = spatial_density(r_pts, bbox, grid=config.kde_grid, weights=r_w)
        js_segments.append(js_divergence(r_d.ravel(), g_d.ravel()))

    gen_t = temporal_samples(generated)
    ref_t = temporal_samples(reference)
    ks_by_type: dict = {}
    ks_values = []
    for category in ACTIVITY_CATEGORIES:
        row = {}
        for metric in ("start", "end", "duration"):
            xs, ys = ref_t[category][metric], gen_t[category][metric]
            if xs and ys:
                row[metric] = ks_statistic(xs, ys)
            elif xs or ys:
                row[metric] = 1.0  # category present on one side only
            else:
                continue
            ks_values.append(row[metric])
        if row:
            ks_by_type[category] = row
    ks_mean = float(np.mean(ks_values)) if ks_values else 0.0

    q_obj = objective_quality(js_all, ks_mean, scaled=True)
    q_total = None
    if q_subjective is not None:
        q_total = total_quality(q_subjective, q_obj, alpha=config.subjective_weight)

    k_star = sil = between = within = div = score_gd = None
    if len(generated) >= 3:
        sequences = [discretize(c) for c in generated]
        d = pairwise_dtw(sequences)
        k_hi = min(config.k_max, len(generated) - 1)
        k_star, _ = select_k(d, range(config.k_min, k_hi + 1))
        labels = ward_cluster(d, k_star, max_dim=config.mds_max_dim)
        sil = silhouette(d, labels)
        stats = diversity_score(d, labels)
        between, within = stats["between"], stats["within"]
        div, score_gd = stats["diversity_index"], stats["score"]

    validation_counts: dict = {}
    if services is not None:
        for chain in generated:
            for kind, count in validate_chain(chain, services).counts().items():
                validation_counts[kind] = validation_counts.get(kind, 0) + count

    return EvaluationReport(
        js_spatial=js_all,
        js_segments=js_segments,
        ks_by_type=ks_by_type,
        ks_temporal=ks_mean,
        q_obj=q_obj,
        q_subjective=q_subjective,
        q_total=q_total,
        k_star=k_star,
        silhouette_at_k=sil,
        between=between,
        within=within,
        diversity_index=div,
        score_gd=score_gd,
        validation_counts=validation_counts,
        n_generated=len(generated),
        n_reference=len(reference),
    )
